//! Session evaluation, the Δ interference metric and table emission.

mod report;

pub use report::{config_hash, parse_csv_report, MethodRow, ParsedRow, Report, ReportFormat, RunMetadata};

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::model::Model;
use crate::numkit::argmax;
use crate::protocol::LabeledDataset;

/// Correct/total counts for one class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCount {
    pub class: String,
    pub correct: usize,
    pub total: usize,
}

/// Accuracy of one session's cumulative query set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub session: usize,
    /// Accuracy with the argmax over all classes seen so far.
    pub joint_accuracy: f64,
    /// Joint-argmax accuracy on base-class queries.
    pub base_accuracy: Option<f64>,
    /// Joint-argmax accuracy on novel-class queries.
    pub novel_accuracy: Option<f64>,
    /// Base queries scored against base rows only.
    pub base_individual: Option<f64>,
    /// Novel queries scored against novel rows only.
    pub novel_individual: Option<f64>,
    pub per_class: Vec<ClassCount>,
}

impl SessionMetrics {
    pub fn total(&self) -> usize {
        self.per_class.iter().map(|c| c.total).sum()
    }

    pub fn correct(&self) -> usize {
        self.per_class.iter().map(|c| c.correct).sum()
    }

    /// Δ inputs, when the session has both base and novel queries.
    pub fn delta_inputs(&self) -> Option<DeltaInputs> {
        Some(DeltaInputs {
            base_individual: self.base_individual?,
            base_joint: self.base_accuracy?,
            novel_individual: self.novel_individual?,
            novel_joint: self.novel_accuracy?,
        })
    }
}

fn ratio(correct: usize, total: usize) -> Option<f64> {
    (total > 0).then(|| correct as f64 / total as f64)
}

/// Scores `query` (dataset indices) with predictions restricted to `allowed`.
/// Classes in `base` count as base, every other allowed class as novel.
pub fn evaluate_session<S: AsRef<str>>(
    session: usize,
    model: &Model,
    data: &LabeledDataset,
    query: &[usize],
    allowed: &[S],
    base: &[S],
) -> Result<SessionMetrics> {
    let classifier = &model.classifier;
    let mut allowed_rows = Vec::with_capacity(allowed.len());
    for c in allowed {
        match classifier.position(c.as_ref()) {
            Some(r) => allowed_rows.push(r),
            None => bail!(MissingClass, "class {} has no classifier row", c.as_ref()),
        }
    }
    // classifier order so ties resolve to the lowest class index
    allowed_rows.sort_unstable();
    let base_set: HashSet<&str> = base.iter().map(|b| b.as_ref()).collect();
    let is_base_row = |r: usize| base_set.contains(classifier.class_ids()[r].as_str());
    let base_rows: Vec<usize> = allowed_rows.iter().copied().filter(|&r| is_base_row(r)).collect();
    let novel_rows: Vec<usize> = allowed_rows.iter().copied().filter(|&r| !is_base_row(r)).collect();

    let mut counts: Vec<ClassCount> = allowed
        .iter()
        .map(|c| ClassCount { class: c.as_ref().to_string(), correct: 0, total: 0 })
        .collect();
    let (mut bc, mut bt, mut nc, mut nt, mut bi, mut ni) = (0, 0, 0, 0, 0, 0);
    let pick = |logits: &[f64], rows: &[usize]| {
        let scores: Vec<f64> = rows.iter().map(|&r| logits[r]).collect();
        argmax(&scores).map(|i| rows[i])
    };
    for &i in query {
        if i >= data.len() {
            bail!(Protocol, "query index {i} out of range");
        }
        let label = data.label(i);
        let Some(slot) = counts.iter().position(|c| c.class == label) else {
            bail!(Protocol, "query label {label} is not among the allowed classes");
        };
        let truth = classifier.position(label).expect("allowed classes have rows");
        let logits = model.classifier.logits(&model.backbone.features(data.feature(i))?)?;
        let hit = pick(&logits, &allowed_rows) == Some(truth);
        counts[slot].total += 1;
        counts[slot].correct += usize::from(hit);
        if is_base_row(truth) {
            bt += 1;
            bc += usize::from(hit);
            bi += usize::from(pick(&logits, &base_rows) == Some(truth));
        } else {
            nt += 1;
            nc += usize::from(hit);
            ni += usize::from(pick(&logits, &novel_rows) == Some(truth));
        }
    }
    if query.is_empty() {
        bail!(Parameter, "empty query set for session {session}");
    }
    Ok(SessionMetrics {
        session,
        joint_accuracy: (bc + nc) as f64 / query.len() as f64,
        base_accuracy: ratio(bc, bt),
        novel_accuracy: ratio(nc, nt),
        base_individual: ratio(bi, bt),
        novel_individual: ratio(ni, nt),
        per_class: counts,
    })
}

/// Individual and joint accuracies on base and novel queries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaInputs {
    pub base_individual: f64,
    pub base_joint: f64,
    pub novel_individual: f64,
    pub novel_joint: f64,
}

impl DeltaInputs {
    pub fn validate(&self) -> Result<()> {
        for v in [self.base_individual, self.base_joint, self.novel_individual, self.novel_joint] {
            if !(0.0..=1.0).contains(&v) {
                bail!(Parameter, "accuracy {v} outside [0, 1]");
            }
        }
        Ok(())
    }
}

/// Mean joint-minus-individual accuracy gap over base and novel queries, in percent.
pub fn delta_metric(d: &DeltaInputs) -> f64 {
    ((d.base_joint - d.base_individual) + (d.novel_joint - d.novel_individual)) / 2.0 * 100.0
}
