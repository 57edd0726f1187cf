use serde::{Deserialize, Serialize};

use super::network::{Model, CLASSIFIER_PARAM};
use crate::error::{bail, Result};
use crate::numkit::{axpy, dot, norm, softmax_with_temperature, Matrix, ParamSet};
use crate::semantic::{build_knn_graph, pairwise_similarity, ClassMeans, EmbeddingTable, KnnGraph, SimilarityMode};

/// A loss value with its gradient over every model parameter.
#[derive(Clone, Debug)]
pub struct LossOutput {
    pub value: f64,
    pub grads: ParamSet,
}

/// One labelled example: features and classifier row index.
pub type Sample<'a> = (&'a [f64], usize);

fn check_labels(model: &Model, batch: &[Sample]) -> Result<()> {
    if batch.is_empty() {
        bail!(Parameter, "empty batch");
    }
    let n = model.classifier.num_classes();
    if let Some(&(_, y)) = batch.iter().find(|(_, y)| *y >= n) {
        bail!(Label, "label index {y} outside a {n}-class classifier");
    }
    Ok(())
}

/// Mean cross-entropy plus `alpha · (‖η‖² + ‖θ‖²)`.
pub fn loss_main(model: &Model, batch: &[Sample], alpha: f64) -> Result<LossOutput> {
    check_labels(model, batch)?;
    let mut grads = model.zero_grads();
    let inv_b = 1.0 / batch.len() as f64;
    let eta = model.classifier.weights();
    let mut ce = 0.0;
    for &(x, y) in batch {
        let cache = model.backbone.forward_cached(x)?;
        let logits = eta.matvec(&cache.features)?;
        let p = softmax_with_temperature(&logits, 1.0)?;
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        ce += lse - logits[y];

        let mut dlogits = p;
        dlogits[y] -= 1.0;
        for d in &mut dlogits {
            *d *= inv_b;
        }
        grads
            .get_mut(CLASSIFIER_PARAM)
            .expect("classifier gradient")
            .add_outer(1.0, &dlogits, &cache.features);
        let dfeat = eta.matvec_t(&dlogits)?;
        model.backbone.backward(&cache, &dfeat, &mut grads)?;
    }
    let params = model.params();
    grads.add_scaled(2.0 * alpha, &params)?;
    Ok(LossOutput {
        value: ce * inv_b + alpha * params.sum_sq(),
        grads,
    })
}

/// Semantic structure the language regularizer aligns against: λ over the
/// classifier's classes, the class pairs each term ranges over, and the graph.
#[derive(Clone, Debug)]
pub struct LanguagePrior {
    mode: SimilarityMode,
    lambda: Matrix,
    graph: Option<KnnGraph>,
    /// `partners[y]`: classes `k` paired with `y` in the loss.
    partners: Vec<Vec<usize>>,
}

impl LanguagePrior {
    /// `class_ids` fixes the class index order (the classifier's row order).
    pub fn new<S: AsRef<str>>(emb: &EmbeddingTable, class_ids: &[S], k: usize, mode: SimilarityMode) -> Result<Self> {
        let table = emb.subset(class_ids)?;
        let n = table.len();
        let v = table.vectors();
        let mut lambda = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                lambda[(i, j)] = pairwise_similarity(&v[i], &v[j], mode)?;
            }
        }
        let (graph, partners) = if mode.uses_graph() {
            let g = build_knn_graph(&table, k)?;
            let partners = (0..n).map(|y| g.in_neighbors(y)).collect();
            (Some(g), partners)
        } else {
            let partners = (0..n).map(|y| (0..n).filter(|&k| k != y).collect()).collect();
            (None, partners)
        };
        Ok(Self {
            mode,
            lambda,
            graph,
            partners,
        })
    }

    pub fn mode(&self) -> SimilarityMode {
        self.mode
    }

    pub fn lambda(&self) -> &Matrix {
        &self.lambda
    }

    pub fn graph(&self) -> Option<&KnnGraph> {
        self.graph.as_ref()
    }

    pub fn num_classes(&self) -> usize {
        self.partners.len()
    }

    pub fn partners(&self, y: usize) -> &[usize] {
        &self.partners[y]
    }
}

/// Language regularizer output plus the blended class means it used,
/// which become the next running means.
#[derive(Clone, Debug)]
pub struct LanguageRegOutput {
    pub loss: LossOutput,
    pub blended_means: Vec<(usize, Vec<f64>)>,
}

/// Graph Laplacian alignment loss `Σ_(x,y) Σ_k |λ_ky − μ_ky|`.
///
/// `μ` is computed from class means `v_i = m·M_i + (1−m)·b_i`, where `M` is the
/// frozen running mean and `b_i` the batch mean of class `i` (classes absent
/// from the batch use `M_i`). Gradients reach `θ` only through `b_i`.
pub fn loss_language_reg(
    model: &Model,
    batch: &[Sample],
    running: &ClassMeans,
    prior: &LanguagePrior,
    momentum: f64,
) -> Result<LanguageRegOutput> {
    check_labels(model, batch)?;
    if !(0.0..=1.0).contains(&momentum) {
        bail!(Parameter, "momentum must lie in [0, 1], got {momentum}");
    }
    let n = prior.num_classes();
    if let Some(&(_, y)) = batch.iter().find(|(_, y)| *y >= n) {
        bail!(MissingClass, "class index {y} has no row in the semantic graph");
    }
    let caches = batch
        .iter()
        .map(|(x, _)| model.backbone.forward_cached(x))
        .collect::<Result<Vec<_>>>()?;
    let dim = model.backbone.feature_dim();

    let mut batch_count = vec![0usize; n];
    let mut batch_sum: Vec<Option<Vec<f64>>> = vec![None; n];
    for (c, &(_, y)) in caches.iter().zip(batch) {
        batch_count[y] += 1;
        axpy(1.0, &c.features, batch_sum[y].get_or_insert_with(|| vec![0.0; dim]));
    }

    // Means touched by any term.
    let mut needed = vec![false; n];
    for y in 0..n {
        if batch_count[y] > 0 {
            needed[y] = true;
            for &k in prior.partners(y) {
                needed[k] = true;
            }
        }
    }
    let mut means: Vec<Option<Vec<f64>>> = vec![None; n];
    let mut blended_means = Vec::new();
    for i in 0..n {
        if !needed[i] {
            continue;
        }
        let v = match &batch_sum[i] {
            Some(sum) => {
                let inv = 1.0 / batch_count[i] as f64;
                let v: Vec<f64> = match running.get(i) {
                    Ok(m) => m.iter().zip(sum).map(|(r, s)| momentum * r + (1.0 - momentum) * s * inv).collect(),
                    Err(_) => sum.iter().map(|s| s * inv).collect(),
                };
                blended_means.push((i, v.clone()));
                v
            }
            None => running.get(i)?.to_vec(),
        };
        means[i] = Some(v);
    }

    let mut value = 0.0;
    let mut dmeans = vec![vec![0.0; dim]; n];
    for y in 0..n {
        if batch_count[y] == 0 {
            continue;
        }
        let ny = batch_count[y] as f64;
        let vy = means[y].as_deref().expect("needed");
        for &k in prior.partners(y) {
            let vk = means[k].as_deref().expect("needed");
            let mu = pairwise_similarity(vk, vy, prior.mode)?;
            let diff = prior.lambda[(k, y)] - mu;
            value += ny * diff.abs();
            // d|λ − μ|/dμ = −sign(λ − μ); zero at exact ties
            let dmu = -ny * sign(diff);
            if dmu != 0.0 {
                let (gk, gy) = similarity_grads(vk, vy, prior.mode);
                axpy(dmu, &gk, &mut dmeans[k]);
                axpy(dmu, &gy, &mut dmeans[y]);
            }
        }
    }

    let mut grads = model.zero_grads();
    for (cache, &(_, y)) in caches.iter().zip(batch) {
        let scale = (1.0 - momentum) / batch_count[y] as f64;
        if scale == 0.0 || dmeans[y].iter().all(|&g| g == 0.0) {
            continue;
        }
        let dfeat: Vec<f64> = dmeans[y].iter().map(|g| g * scale).collect();
        model.backbone.backward(cache, &dfeat, &mut grads)?;
    }
    Ok(LanguageRegOutput {
        loss: LossOutput { value, grads },
        blended_means,
    })
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Gradients of `sim(a, b)` with respect to `a` and `b`.
fn similarity_grads(a: &[f64], b: &[f64], mode: SimilarityMode) -> (Vec<f64>, Vec<f64>) {
    match mode {
        SimilarityMode::Cosine | SimilarityMode::TopkCosine => {
            let (na, nb) = (norm(a), norm(b));
            let c = dot(a, b) / (na * nb);
            let ga = a.iter().zip(b).map(|(ai, bi)| bi / (na * nb) - c * ai / (na * na)).collect();
            let gb = a.iter().zip(b).map(|(ai, bi)| ai / (na * nb) - c * bi / (nb * nb)).collect();
            (ga, gb)
        }
        SimilarityMode::Euclidean => {
            let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            let dist = norm(&d);
            if dist == 0.0 {
                return (vec![0.0; a.len()], vec![0.0; a.len()]);
            }
            // sim = −‖a − b‖
            let ga: Vec<f64> = d.iter().map(|v| -v / dist).collect();
            let gb = ga.iter().map(|v| -v).collect();
            (ga, gb)
        }
    }
}

/// Which loss terms are active in a base-training epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasePhase {
    /// Classification loss only.
    Classification,
    /// Language regularizer (plus classification loss when kept).
    Language,
}

/// Alternating schedule: epochs `1..=phase1` classify, the next `phase2` align.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaseSchedule {
    pub epochs_phase1: usize,
    pub epochs_phase2: usize,
    pub phase2_keep_ce: bool,
}

impl BaseSchedule {
    pub fn phase(&self, epoch: usize) -> Result<BasePhase> {
        if epoch == 0 {
            bail!(Schedule, "epochs are numbered from 1");
        }
        if epoch <= self.epochs_phase1 {
            Ok(BasePhase::Classification)
        } else if epoch <= self.epochs_phase1 + self.epochs_phase2 {
            Ok(BasePhase::Language)
        } else {
            bail!(
                Schedule,
                "epoch {epoch} beyond the {}+{} epoch schedule",
                self.epochs_phase1,
                self.epochs_phase2
            )
        }
    }

    pub fn total_epochs(&self) -> usize {
        self.epochs_phase1 + self.epochs_phase2
    }

    /// Whether the classification loss is evaluated in `phase`.
    pub fn uses_main(&self, phase: BasePhase) -> bool {
        matches!(phase, BasePhase::Classification) || self.phase2_keep_ce
    }
}

/// Combines the two base losses with the epoch's indicator weights.
///
/// A term whose indicator is zero may be passed as `None`.
pub fn loss_base(
    epoch: usize,
    main: Option<&LossOutput>,
    language: Option<&LossOutput>,
    schedule: &BaseSchedule,
) -> Result<LossOutput> {
    let phase = schedule.phase(epoch)?;
    let need = |o: Option<&LossOutput>, what: &str| -> Result<LossOutput> {
        match o {
            Some(o) => Ok(o.clone()),
            None => bail!(Parameter, "epoch {epoch} needs the {what} term"),
        }
    };
    match phase {
        BasePhase::Classification => need(main, "classification"),
        BasePhase::Language => {
            let mut out = need(language, "language regularizer")?;
            if schedule.phase2_keep_ce {
                let m = need(main, "classification")?;
                out.value += m.value;
                out.grads.add_scaled(1.0, &m.grads)?;
            }
            Ok(out)
        }
    }
}
