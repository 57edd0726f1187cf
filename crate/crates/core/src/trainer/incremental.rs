use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::LogRecord;
use crate::error::{bail, Result};
use crate::model::{extend_classifier, Model};
use crate::numkit::{axpy, norm, softmax_with_temperature, sq_dist, Matrix};
use crate::protocol::{LabeledDataset, MemoryBuffer, Session};
use crate::semantic::{subspace_anchors, EmbeddingTable};

/// How novel classifier rows are initialised.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NovelInit {
    /// At the semantic subspace anchor.
    #[default]
    Anchor,
    /// Mean support feature, rescaled to the mean norm of the existing rows.
    Imprint,
}

/// How the quadratic penalties enter each update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyStep {
    /// Gradient step on the data term, then the exact minimiser of the
    /// penalties plus the proximity term `‖η − y‖²/(2·lr)`. Stable for any lr.
    #[default]
    Proximal,
    /// Plain gradient step on the full objective; needs `lr < 1/(2(α+β+γ))`.
    Explicit,
}

/// Incremental-session hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IncrementalHyper {
    /// Weight on `‖η‖²`.
    pub alpha: f64,
    /// Weight on the old-row drift penalty.
    pub beta: f64,
    /// Weight on the novel-row anchor penalty.
    pub gamma: f64,
    /// Anchor softmax temperature.
    pub tau: f64,
    pub lr: f64,
    pub steps: usize,
    /// Include cross-entropy over the support set (and memory).
    pub include_ce: bool,
    pub use_memory: bool,
    pub init: NovelInit,
    pub penalty_step: PenaltyStep,
    /// L2-normalise embeddings before the anchor dot products.
    pub normalize_embeddings: bool,
}

impl Default for IncrementalHyper {
    fn default() -> Self {
        Self {
            alpha: 1e-4,
            beta: 1.0,
            gamma: 1.0,
            tau: 1.0,
            lr: 0.01,
            steps: 200,
            include_ce: true,
            use_memory: false,
            init: NovelInit::Anchor,
            penalty_step: PenaltyStep::Proximal,
            normalize_embeddings: false,
        }
    }
}

impl IncrementalHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && self.gamma >= 0.0) {
            bail!(Parameter, "alpha, beta and gamma must be non-negative");
        }
        if !(self.tau > 0.0) || !(self.lr > 0.0) {
            bail!(Parameter, "tau and lr must be positive");
        }
        Ok(())
    }
}

/// Classifier rows frozen at the end of one session.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightSnapshot {
    pub session: usize,
    /// Classes first introduced in this session.
    pub introduced: Vec<String>,
    /// Every class known at the end of the session, in classifier order.
    pub class_ids: Vec<String>,
    pub rows: Matrix,
}

impl WeightSnapshot {
    pub fn capture(session: usize, introduced: Vec<String>, model: &Model) -> Self {
        Self {
            session,
            introduced,
            class_ids: model.classifier.class_ids().to_vec(),
            rows: model.classifier.weights().clone(),
        }
    }

    pub fn row(&self, class: &str) -> Option<&[f64]> {
        self.class_ids.iter().position(|c| c == class).map(|i| self.rows.row(i))
    }
}

/// A penalty value with its gradient over the classifier matrix.
#[derive(Clone, Debug)]
pub struct Penalty {
    pub value: f64,
    pub grad: Matrix,
}

/// Per-row targets for the old-row penalty: `(row index, snapshot row)`.
fn old_targets<'a>(class_ids: &[String], snapshots: &'a [WeightSnapshot], t: usize) -> Result<Vec<(usize, &'a [f64])>> {
    let mut out = Vec::new();
    for tp in 0..t {
        let Some(snap) = snapshots.iter().find(|s| s.session == tp) else {
            bail!(MissingClass, "no snapshot for session {tp}");
        };
        for c in &snap.introduced {
            let Some(row) = class_ids.iter().position(|id| id == c) else {
                bail!(MissingClass, "class {c} from session {tp} not in classifier");
            };
            let target = snap.row(c).ok_or_else(|| crate::FscilError::MissingClass(format!("{c} missing in snapshot {tp}")))?;
            out.push((row, target));
        }
    }
    Ok(out)
}

/// `Σ_{t'<t} Σ_{c∈C^(t')} ‖η_c^{t'} − η_c‖²` with gradient `−2(η_c^{t'} − η_c)`.
pub fn r_old(class_ids: &[String], weights: &Matrix, snapshots: &[WeightSnapshot], t: usize) -> Result<Penalty> {
    let mut grad = Matrix::zeros(weights.rows(), weights.cols());
    let mut value = 0.0;
    for (row, target) in old_targets(class_ids, snapshots, t)? {
        value += sq_dist(weights.row(row), target);
        for ((g, w), s) in grad.row_mut(row).iter_mut().zip(weights.row(row)).zip(target) {
            *g += 2.0 * (w - s);
        }
    }
    Ok(Penalty { value, grad })
}

/// `Σ_{c∈C^(t)} ‖η_c − l_c‖²`; anchors are constants.
pub fn r_new(class_ids: &[String], weights: &Matrix, novel: &[String], anchors: &BTreeMap<String, Vec<f64>>) -> Result<Penalty> {
    let mut grad = Matrix::zeros(weights.rows(), weights.cols());
    let mut value = 0.0;
    for c in novel {
        let Some(anchor) = anchors.get(c) else {
            bail!(MissingClass, "no anchor for novel class {c}");
        };
        let Some(row) = class_ids.iter().position(|id| id == c) else {
            bail!(MissingClass, "novel class {c} not in classifier");
        };
        value += sq_dist(weights.row(row), anchor);
        for ((g, w), a) in grad.row_mut(row).iter_mut().zip(weights.row(row)).zip(anchor) {
            *g += 2.0 * (w - a);
        }
    }
    Ok(Penalty { value, grad })
}

/// Everything the session objective depends on besides `η` itself.
#[derive(Clone, Debug)]
pub struct SessionObjective<'a> {
    pub class_ids: Vec<String>,
    /// Frozen-backbone features and row labels of the training samples.
    pub samples: Vec<(Vec<f64>, usize)>,
    pub snapshots: &'a [WeightSnapshot],
    pub session: usize,
    pub novel: Vec<String>,
    pub anchors: BTreeMap<String, Vec<f64>>,
    pub hyper: IncrementalHyper,
}

/// Objective value split into its terms.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObjectiveTerms {
    pub ce: Option<f64>,
    pub weight: f64,
    pub old: f64,
    pub new: f64,
}

impl ObjectiveTerms {
    pub fn total(&self, h: &IncrementalHyper) -> f64 {
        self.ce.unwrap_or(0.0) + h.alpha * self.weight + h.beta * self.old + h.gamma * self.new
    }
}

impl SessionObjective<'_> {
    /// Mean cross-entropy over the training samples and its gradient.
    fn cross_entropy(&self, weights: &Matrix) -> Result<(f64, Matrix)> {
        let mut grad = Matrix::zeros(weights.rows(), weights.cols());
        if self.samples.is_empty() {
            return Ok((0.0, grad));
        }
        let inv = 1.0 / self.samples.len() as f64;
        let mut value = 0.0;
        for (f, y) in &self.samples {
            let logits = weights.matvec(f)?;
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
            value += lse - logits[*y];
            let mut d = softmax_with_temperature(&logits, 1.0)?;
            d[*y] -= 1.0;
            grad.add_outer(inv, &d, f);
        }
        Ok((value * inv, grad))
    }

    /// Value and `∂/∂η` of `CE + α‖η‖² + β·R_old + γ·R_new`.
    pub fn evaluate(&self, weights: &Matrix) -> Result<(ObjectiveTerms, Matrix)> {
        let h = &self.hyper;
        let (ce, mut grad) = if h.include_ce {
            let (v, g) = self.cross_entropy(weights)?;
            (Some(v), g)
        } else {
            (None, Matrix::zeros(weights.rows(), weights.cols()))
        };
        let old = r_old(&self.class_ids, weights, self.snapshots, self.session)?;
        let new = r_new(&self.class_ids, weights, &self.novel, &self.anchors)?;
        axpy(2.0 * h.alpha, weights.as_slice(), grad.as_mut_slice());
        axpy(h.beta, old.grad.as_slice(), grad.as_mut_slice());
        axpy(h.gamma, new.grad.as_slice(), grad.as_mut_slice());
        let terms = ObjectiveTerms {
            ce,
            weight: weights.frobenius_sq(),
            old: old.value,
            new: new.value,
        };
        Ok((terms, grad))
    }

    /// One update of `weights`.
    pub fn step(&self, weights: &mut Matrix) -> Result<()> {
        let h = &self.hyper;
        match h.penalty_step {
            PenaltyStep::Explicit => {
                let (_, grad) = self.evaluate(weights)?;
                axpy(-h.lr, grad.as_slice(), weights.as_mut_slice());
            }
            PenaltyStep::Proximal => {
                if h.include_ce {
                    let (_, grad) = self.cross_entropy(weights)?;
                    axpy(-h.lr, grad.as_slice(), weights.as_mut_slice());
                }
                // Row-wise minimiser of ‖η−y‖²/(2lr) + α‖η‖² + β‖η−s‖² + γ‖η−l‖².
                let mut pull = Matrix::zeros(weights.rows(), weights.cols());
                let mut stiff = vec![h.alpha; weights.rows()];
                for (row, target) in old_targets(&self.class_ids, self.snapshots, self.session)? {
                    axpy(h.beta, target, pull.row_mut(row));
                    stiff[row] += h.beta;
                }
                for c in &self.novel {
                    let row = self.class_ids.iter().position(|id| id == c).expect("validated by evaluate");
                    let anchor = &self.anchors[c];
                    axpy(h.gamma, anchor, pull.row_mut(row));
                    stiff[row] += h.gamma;
                }
                for (r, s) in stiff.iter().enumerate() {
                    let denom = 1.0 + 2.0 * h.lr * s;
                    let p = pull.row(r).to_vec();
                    for (w, pv) in weights.row_mut(r).iter_mut().zip(p) {
                        *w = (*w + 2.0 * h.lr * pv) / denom;
                    }
                }
            }
        }
        if !weights.is_finite() {
            bail!(Numeric, "classifier diverged in session {}", self.session);
        }
        Ok(())
    }
}

/// Result of one incremental session.
#[derive(Clone, Debug)]
pub struct SessionOutcome {
    pub model: Model,
    pub snapshot: WeightSnapshot,
    pub anchors: BTreeMap<String, Vec<f64>>,
    pub log: Vec<LogRecord>,
}

/// Runs incremental session `session.index`: appends novel rows, then
/// optimises only the classifier with the backbone frozen.
#[allow(clippy::too_many_arguments)]
pub fn run_incremental_session(
    model: &Model,
    session: &Session,
    data: &LabeledDataset,
    emb: &EmbeddingTable,
    snapshots: &[WeightSnapshot],
    memory: Option<&MemoryBuffer>,
    hyper: &IncrementalHyper,
    seed: u64,
) -> Result<SessionOutcome> {
    hyper.validate()?;
    let t = session.index;
    if t == 0 {
        bail!(Parameter, "session 0 is the base session");
    }
    if hyper.use_memory && memory.is_none() {
        bail!(Parameter, "use_memory set but no memory buffer supplied");
    }
    let Some(base) = snapshots.iter().find(|s| s.session == 0) else {
        bail!(MissingClass, "no base snapshot");
    };
    let base_ids = &base.introduced;
    let base_rows = Matrix::from_rows(
        &base_ids
            .iter()
            .map(|c| {
                let r = model
                    .classifier
                    .position(c)
                    .ok_or_else(|| crate::FscilError::MissingClass(format!("base class {c} not in classifier")))?;
                Ok(model.classifier.weights().row(r).to_vec())
            })
            .collect::<Result<Vec<_>>>()?,
    )?;
    let anchor_list = subspace_anchors(&base_rows, base_ids, emb, &session.classes, hyper.tau, hyper.normalize_embeddings)?;
    let anchors: BTreeMap<String, Vec<f64>> = session
        .classes
        .iter()
        .cloned()
        .zip(anchor_list.into_iter().map(|a| a.vector))
        .collect();

    let features = |i: usize| model.backbone.features(data.feature(i));
    let init: Vec<Vec<f64>> = match hyper.init {
        NovelInit::Anchor => session.classes.iter().map(|c| anchors[c].clone()).collect(),
        NovelInit::Imprint => {
            let w = model.classifier.weights();
            let mean_norm = w.row_iter().map(norm).sum::<f64>() / w.rows().max(1) as f64;
            session
                .support
                .iter()
                .map(|idx| {
                    let mut m = vec![0.0; model.backbone.feature_dim()];
                    for &i in idx {
                        axpy(1.0 / idx.len() as f64, &features(i)?, &mut m);
                    }
                    let n = norm(&m);
                    Ok(if n > 0.0 { m.iter().map(|v| v * mean_norm / n).collect() } else { m })
                })
                .collect::<Result<_>>()?
        }
    };
    let classifier = extend_classifier(&model.classifier, &session.classes, &init)?;
    let class_ids = classifier.class_ids().to_vec();
    let row_of = |c: &str| class_ids.iter().position(|id| id == c).expect("known class");

    let mut samples = Vec::new();
    for (i, c) in session.support_flat() {
        samples.push((features(i)?, row_of(c)));
    }
    if hyper.use_memory {
        for (c, i) in memory.expect("checked above").iter() {
            samples.push((features(i)?, row_of(c)));
        }
    }

    let objective = SessionObjective {
        class_ids: class_ids.clone(),
        samples,
        snapshots,
        session: t,
        novel: session.classes.clone(),
        anchors,
        hyper: hyper.clone(),
    };
    let mut weights = classifier.weights().clone();
    let mut log = Vec::with_capacity(hyper.steps + 1);
    let record = |step: usize, weights: &Matrix| -> Result<LogRecord> {
        let (terms, _) = objective.evaluate(weights)?;
        let mut components = BTreeMap::new();
        if let Some(ce) = terms.ce {
            components.insert("ce".to_string(), ce);
        }
        components.insert("weight_norm".to_string(), terms.weight);
        components.insert("r_old".to_string(), terms.old);
        components.insert("r_new".to_string(), terms.new);
        Ok(LogRecord {
            phase: "session".into(),
            epoch: t,
            step: Some(step),
            stage: "incremental".into(),
            loss_total: terms.total(&objective.hyper),
            components,
            seed,
        })
    };
    log.push(record(0, &weights)?);
    for step in 1..=hyper.steps {
        objective.step(&mut weights)?;
        log.push(record(step, &weights)?);
    }

    let mut out = model.clone();
    out.classifier = classifier;
    *out.classifier.weights_mut() = weights;
    let snapshot = WeightSnapshot::capture(t, session.classes.clone(), &out);
    Ok(SessionOutcome {
        model: out,
        snapshot,
        anchors: objective.anchors,
        log,
    })
}
