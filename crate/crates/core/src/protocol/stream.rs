use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::error::{bail, Result};
use crate::numkit::SeededRng;

/// Fraction of each base class held out for the base query set.
pub const BASE_QUERY_FRACTION: f64 = 0.2;

/// Shape of a session stream.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamConfig {
    pub base_classes: usize,
    /// Number of incremental sessions `T`.
    pub sessions: usize,
    pub n_way: usize,
    pub k_shot: usize,
    #[serde(default = "default_query_per_class")]
    pub query_per_class: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_query_per_class() -> usize {
    15
}

impl StreamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.base_classes == 0 || self.n_way == 0 || self.k_shot == 0 || self.query_per_class == 0 {
            bail!(Parameter, "base_classes, n_way, k_shot and query_per_class must be positive");
        }
        Ok(())
    }

    pub fn total_classes(&self) -> usize {
        self.base_classes + self.sessions * self.n_way
    }
}

/// One learning session: the classes it introduces, their support samples
/// (grouped per class), and the cumulative query set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Session {
    pub index: usize,
    pub classes: Vec<String>,
    pub support: Vec<Vec<usize>>,
    pub query: Vec<usize>,
}

impl Session {
    pub fn support_flat(&self) -> impl Iterator<Item = (usize, &str)> + '_ {
        self.classes
            .iter()
            .zip(&self.support)
            .flat_map(|(c, idx)| idx.iter().map(move |&i| (i, c.as_str())))
    }

    pub fn support_len(&self) -> usize {
        self.support.iter().map(Vec::len).sum()
    }

    pub fn support_of(&self, class: &str) -> Option<&[usize]> {
        self.classes.iter().position(|c| c == class).map(|p| self.support[p].as_slice())
    }
}

/// Sessions `0..=T`; session 0 is the base session.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SessionStream {
    pub sessions: Vec<Session>,
}

impl SessionStream {
    pub fn base(&self) -> &Session {
        &self.sessions[0]
    }

    pub fn base_classes(&self) -> &[String] {
        &self.sessions[0].classes
    }

    /// Number of incremental sessions.
    pub fn num_incremental(&self) -> usize {
        self.sessions.len() - 1
    }

    /// `C^(≤t)` in introduction order.
    pub fn classes_upto(&self, t: usize) -> Vec<String> {
        self.sessions[..=t].iter().flat_map(|s| s.classes.iter().cloned()).collect()
    }

    /// `C^(<t)` in introduction order.
    pub fn classes_before(&self, t: usize) -> Vec<String> {
        self.sessions[..t].iter().flat_map(|s| s.classes.iter().cloned()).collect()
    }

    /// Session in which `class` was introduced.
    pub fn session_of(&self, class: &str) -> Option<usize> {
        self.sessions.iter().position(|s| s.classes.iter().any(|c| c == class))
    }

    /// Checks disjointness, cumulative query coverage and support sizes;
    /// returns one message per violation.
    pub fn violations(&self, data: &LabeledDataset, cfg: &StreamConfig) -> Vec<String> {
        let mut out = Vec::new();
        let mut seen: HashSet<&str> = HashSet::new();
        let support: HashSet<usize> = self.sessions.iter().flat_map(|s| s.support.iter().flatten().copied()).collect();
        for s in &self.sessions {
            for c in &s.classes {
                if !seen.insert(c) {
                    out.push(format!("session {}: class {c} already introduced", s.index));
                }
            }
            if s.index >= 1 && s.support_len() != cfg.n_way * cfg.k_shot {
                out.push(format!("session {}: |S| = {}, expected {}", s.index, s.support_len(), cfg.n_way * cfg.k_shot));
            }
            for (c, idx) in s.classes.iter().zip(&s.support) {
                if idx.iter().any(|&i| data.label(i) != c) {
                    out.push(format!("session {}: support of {c} holds another class", s.index));
                }
            }
            let allowed: HashSet<String> = self.classes_upto(s.index).into_iter().collect();
            let covered: HashSet<&str> = s.query.iter().map(|&i| data.label(i)).collect();
            if covered.len() != allowed.len() || covered.iter().any(|c| !allowed.contains(*c)) {
                out.push(format!("session {}: query classes differ from C(<=t)", s.index));
            }
            if s.query.iter().any(|i| support.contains(i)) {
                out.push(format!("session {}: query overlaps a support set", s.index));
            }
        }
        out
    }
}

/// Splits `data` into a base session and `cfg.sessions` N-way K-shot sessions.
///
/// Classes are taken in dataset order: the first `base_classes` form the base
/// session, then `n_way` per incremental session. Base classes hold out 20% of
/// their samples (at least one) for queries and train on the rest; novel
/// classes draw `k_shot` support and `query_per_class` query samples.
pub fn build_session_stream(data: &LabeledDataset, cfg: &StreamConfig) -> Result<SessionStream> {
    cfg.validate()?;
    let classes = data.classes();
    if cfg.total_classes() > classes.len() {
        bail!(
            Parameter,
            "stream needs {} classes, dataset has {}",
            cfg.total_classes(),
            classes.len()
        );
    }
    let shuffled = |pos: usize| {
        let mut idx = data.samples_of(&classes[pos]).to_vec();
        SeededRng::derive(cfg.seed, pos as u64).shuffle(&mut idx);
        idx
    };

    let mut base_support = Vec::with_capacity(cfg.base_classes);
    let mut base_query = Vec::new();
    for pos in 0..cfg.base_classes {
        let idx = shuffled(pos);
        if idx.len() < 2 {
            bail!(Capacity, "base class {} has {} samples, needs at least 2", classes[pos], idx.len());
        }
        let n_query = ((idx.len() as f64 * BASE_QUERY_FRACTION).floor() as usize).max(1);
        base_query.extend_from_slice(&idx[..n_query]);
        base_support.push(idx[n_query..].to_vec());
    }
    let mut sessions = vec![Session {
        index: 0,
        classes: classes[..cfg.base_classes].to_vec(),
        support: base_support,
        query: base_query.clone(),
    }];

    let mut query = base_query;
    for t in 1..=cfg.sessions {
        let start = cfg.base_classes + (t - 1) * cfg.n_way;
        let mut support = Vec::with_capacity(cfg.n_way);
        for pos in start..start + cfg.n_way {
            let idx = shuffled(pos);
            let need = cfg.k_shot + cfg.query_per_class;
            if idx.len() < need {
                bail!(Capacity, "class {} has {} samples, needs {need}", classes[pos], idx.len());
            }
            support.push(idx[..cfg.k_shot].to_vec());
            query.extend_from_slice(&idx[cfg.k_shot..need]);
        }
        sessions.push(Session {
            index: t,
            classes: classes[start..start + cfg.n_way].to_vec(),
            support,
            query: query.clone(),
        });
    }
    Ok(SessionStream { sessions })
}
