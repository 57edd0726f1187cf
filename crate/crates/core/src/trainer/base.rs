use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::LogRecord;
use crate::error::{bail, Result};
use crate::model::{loss_language_reg, loss_main, BasePhase, BaseSchedule, LanguagePrior, Model, Sample};
use crate::numkit::{sgd_step, SeededRng};
use crate::semantic::{class_visual_means, default_k, EmbeddingTable, SimilarityMode};

/// Base-session hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperBase {
    /// Weight penalty on `‖η‖² + ‖θ‖²`.
    pub alpha: f64,
    pub epochs_phase1: usize,
    pub epochs_phase2: usize,
    pub lr: f64,
    pub batch_size: usize,
    /// Graph degree; `None` uses 5% of the base class count.
    pub k: Option<usize>,
    pub widths: Vec<usize>,
    pub similarity: SimilarityMode,
    /// Keep the classification loss during the language phase.
    pub phase2_keep_ce: bool,
    /// Running class-mean momentum.
    pub mean_momentum: f64,
    /// Multiplier on the language loss during phase 2.
    pub language_weight: f64,
}

impl Default for HyperBase {
    fn default() -> Self {
        Self {
            alpha: 5e-3,
            epochs_phase1: 100,
            epochs_phase2: 100,
            lr: 0.05,
            batch_size: 64,
            k: None,
            widths: vec![64, 64],
            similarity: SimilarityMode::TopkCosine,
            phase2_keep_ce: false,
            mean_momentum: 0.9,
            language_weight: 1.0,
        }
    }
}

impl HyperBase {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) || !(self.lr > 0.0) || self.batch_size == 0 {
            bail!(Parameter, "base hyper: alpha ≥ 0, lr > 0 and batch_size > 0 required");
        }
        if !(0.0..=1.0).contains(&self.mean_momentum) {
            bail!(Parameter, "mean_momentum must lie in [0, 1]");
        }
        if !(self.language_weight >= 0.0) {
            bail!(Parameter, "language_weight must be non-negative");
        }
        if self.k == Some(0) {
            bail!(Parameter, "k must be positive");
        }
        Ok(())
    }

    pub fn schedule(&self) -> BaseSchedule {
        BaseSchedule {
            epochs_phase1: self.epochs_phase1,
            epochs_phase2: self.epochs_phase2,
            phase2_keep_ce: self.phase2_keep_ce,
        }
    }

    pub fn resolved_k(&self, num_classes: usize) -> usize {
        self.k.unwrap_or_else(|| default_k(num_classes))
    }
}

/// Trains backbone and classifier on the base classes.
///
/// `samples` carry classifier row indices into `class_ids`. The semantic graph
/// is built once from `emb` restricted to `class_ids`.
pub fn train_base(
    class_ids: &[String],
    samples: &[Sample],
    emb: &EmbeddingTable,
    hyper: &HyperBase,
    seed: u64,
) -> Result<(Model, Vec<LogRecord>)> {
    hyper.validate()?;
    if samples.is_empty() {
        bail!(Parameter, "base support set is empty");
    }
    let input_dim = samples[0].0.len();
    let mut rng = SeededRng::new(seed);
    let mut model = Model::init(input_dim, &hyper.widths, class_ids.to_vec(), &mut rng)?;
    let schedule = hyper.schedule();
    let prior = if hyper.epochs_phase2 > 0 {
        Some(LanguagePrior::new(emb, class_ids, hyper.resolved_k(class_ids.len()), hyper.similarity)?)
    } else {
        // coverage still checked so a bad table fails the same way in every config
        emb.subset(class_ids)?;
        None
    };

    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut running = None;
    let mut log = Vec::with_capacity(schedule.total_epochs());
    for epoch in 1..=schedule.total_epochs() {
        let phase = schedule.phase(epoch)?;
        if phase == BasePhase::Language && running.is_none() {
            let feats = samples
                .iter()
                .map(|(x, _)| model.backbone.features(x))
                .collect::<Result<Vec<_>>>()?;
            let labels: Vec<usize> = samples.iter().map(|s| s.1).collect();
            running = Some(class_visual_means(&feats, &labels, class_ids.len())?);
        }
        rng.shuffle(&mut order);
        let mut sums: BTreeMap<String, f64> = BTreeMap::new();
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(hyper.batch_size) {
            let batch: Vec<Sample> = chunk.iter().map(|&i| samples[i]).collect();
            let mut grads = model.zero_grads();
            let mut value = 0.0;
            if schedule.uses_main(phase) {
                let m = loss_main(&model, &batch, hyper.alpha)?;
                *sums.entry("loss_main".into()).or_default() += m.value;
                value += m.value;
                grads.add_scaled(1.0, &m.grads)?;
            }
            if phase == BasePhase::Language {
                let means = running.as_mut().expect("initialised on phase entry");
                let out = loss_language_reg(&model, &batch, means, prior.as_ref().expect("phase 2 prior"), hyper.mean_momentum)?;
                let w = hyper.language_weight;
                *sums.entry("loss_language".into()).or_default() += out.loss.value;
                value += w * out.loss.value;
                grads.add_scaled(w, &out.loss.grads)?;
                for (c, v) in out.blended_means {
                    means.set(c, v);
                }
            }
            let mut params = model.params();
            sgd_step(&mut params, &grads, hyper.lr, 0.0)?;
            model.set_params(&params)?;
            total += value;
            batches += 1;
        }
        let inv = 1.0 / batches as f64;
        log.push(LogRecord {
            phase: "base".into(),
            epoch,
            step: None,
            stage: match phase {
                BasePhase::Classification => "classification".into(),
                BasePhase::Language => "language".into(),
            },
            loss_total: total * inv,
            components: sums.into_iter().map(|(k, v)| (k, v * inv)).collect(),
            seed,
        });
    }
    Ok((model, log))
}
