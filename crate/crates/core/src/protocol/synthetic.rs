use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::error::{bail, Result};
use crate::numkit::{dot, norm, Matrix, SeededRng};
use crate::semantic::EmbeddingTable;

/// Knobs for the synthetic feature-space dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub num_classes: usize,
    pub feature_dim: usize,
    pub samples_per_class: usize,
    /// Radius of the sphere the class prototypes are drawn on.
    pub class_spread: f64,
    /// Std of the Gaussian perturbation applied to prototypes to form embeddings.
    pub semantic_noise: f64,
    /// Embedding dim; when it differs from `feature_dim` the embeddings are
    /// mapped through a seeded random orthogonal projection.
    #[serde(default)]
    pub semantic_dim: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            num_classes: 40,
            feature_dim: 32,
            samples_per_class: 60,
            class_spread: 4.0,
            semantic_noise: 0.1,
            semantic_dim: None,
            seed: 0,
        }
    }
}

// Independent streams so that, e.g., changing the semantic noise leaves the
// visual samples untouched.
const STREAM_PROTOTYPES: u64 = 1;
const STREAM_SAMPLES: u64 = 2;
const STREAM_SEMANTIC: u64 = 3;
const STREAM_PROJECTION: u64 = 4;

pub fn class_label(i: usize) -> String {
    format!("class_{i:03}")
}

/// Class prototypes drawn uniformly on the sphere of radius `class_spread`.
pub fn synthetic_prototypes(cfg: &SyntheticConfig) -> Result<Vec<Vec<f64>>> {
    if cfg.feature_dim < 2 {
        bail!(Parameter, "feature_dim must be at least 2");
    }
    if !(cfg.class_spread > 0.0) {
        bail!(Parameter, "class_spread must be positive");
    }
    if cfg.num_classes == 0 || cfg.samples_per_class == 0 {
        bail!(Parameter, "num_classes and samples_per_class must be positive");
    }
    let mut rng = SeededRng::derive(cfg.seed, STREAM_PROTOTYPES);
    Ok((0..cfg.num_classes)
        .map(|_| loop {
            let v = rng.normal_vec(cfg.feature_dim);
            let n = norm(&v);
            if n > 1e-12 {
                break v.into_iter().map(|x| x * cfg.class_spread / n).collect();
            }
        })
        .collect())
}

/// Embeddings of `prototypes` perturbed by `noise` (and projected if asked).
pub fn synthetic_embeddings(cfg: &SyntheticConfig, prototypes: &[Vec<f64>], noise: f64, stream: u64) -> Result<EmbeddingTable> {
    if !(noise >= 0.0) {
        bail!(Parameter, "semantic_noise must be non-negative");
    }
    let mut rng = SeededRng::derive(cfg.seed, STREAM_SEMANTIC + 16 * stream);
    let mut vectors: Vec<Vec<f64>> = prototypes
        .iter()
        .map(|p| p.iter().map(|x| x + noise * rng.normal()).collect())
        .collect();
    if let Some(sd) = cfg.semantic_dim.filter(|&d| d != cfg.feature_dim) {
        if sd == 0 {
            bail!(Parameter, "semantic_dim must be positive");
        }
        let q = random_orthogonal(sd, cfg.feature_dim, &mut SeededRng::derive(cfg.seed, STREAM_PROJECTION))?;
        vectors = vectors.iter().map(|v| q.matvec(v)).collect::<Result<_>>()?;
    }
    EmbeddingTable::new((0..prototypes.len()).map(class_label).collect(), vectors)
}

/// `rows × cols` matrix with orthonormal rows (if rows ≤ cols) or columns.
fn random_orthogonal(rows: usize, cols: usize, rng: &mut SeededRng) -> Result<Matrix> {
    let (long, short) = (rows.max(cols), rows.min(cols));
    // Gram-Schmidt on `short` Gaussian vectors of length `long`
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(short);
    while basis.len() < short {
        let mut v = rng.normal_vec(long);
        for b in &basis {
            let p = dot(&v, b);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= p * bi;
            }
        }
        let n = norm(&v);
        if n > 1e-8 {
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    let mut m = Matrix::zeros(rows, cols);
    for (i, b) in basis.iter().enumerate() {
        for (j, &v) in b.iter().enumerate() {
            if rows <= cols {
                m[(i, j)] = v;
            } else {
                m[(j, i)] = v;
            }
        }
    }
    Ok(m)
}

/// Gaussian clusters around spherical prototypes, plus semantic embeddings
/// that are noisy copies of the prototypes.
pub fn generate_synthetic_dataset(cfg: &SyntheticConfig) -> Result<(LabeledDataset, EmbeddingTable)> {
    let prototypes = synthetic_prototypes(cfg)?;
    let mut rng = SeededRng::derive(cfg.seed, STREAM_SAMPLES);
    let mut features = Vec::with_capacity(cfg.num_classes * cfg.samples_per_class);
    let mut labels = Vec::with_capacity(features.capacity());
    for (c, p) in prototypes.iter().enumerate() {
        for _ in 0..cfg.samples_per_class {
            features.push(p.iter().map(|x| x + rng.normal()).collect());
            labels.push(class_label(c));
        }
    }
    let dataset = LabeledDataset::new(features, labels)?;
    let table = synthetic_embeddings(cfg, &prototypes, cfg.semantic_noise, 0)?;
    Ok((dataset, table))
}
