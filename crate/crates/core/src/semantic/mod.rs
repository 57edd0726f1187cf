//! Semantic-space structure: embedding tables, the top-K class graph,
//! similarity measures, per-class visual means and subspace anchors.

mod table;

pub use table::EmbeddingTable;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::numkit::{axpy, cosine_similarity, dot, softmax_with_temperature, sq_dist, Matrix};

/// Directed binary top-K neighbour graph over the classes of a table.
#[derive(Clone, Debug, PartialEq)]
pub struct KnnGraph {
    k: usize,
    adjacency: Matrix,
    neighbors: Vec<Vec<usize>>,
}

impl KnnGraph {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    /// 0/1 adjacency, `R[i][j] = 1` iff `j` is among the K nearest classes of `i`.
    pub fn adjacency(&self) -> &Matrix {
        &self.adjacency
    }

    /// Neighbours of `i`, nearest first.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn is_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[(i, j)] == 1.0
    }

    /// Classes `k` with `R[k][y] = 1`, ascending.
    pub fn in_neighbors(&self, y: usize) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.is_edge(k, y)).collect()
    }
}

/// `K` as 5% of the class count, at least 1.
pub fn default_k(num_classes: usize) -> usize {
    ((num_classes as f64 * 0.05).round() as usize).max(1)
}

/// Builds the top-K graph by Euclidean distance; ties go to the lower class index.
pub fn build_knn_graph(table: &EmbeddingTable, k: usize) -> Result<KnnGraph> {
    let n = table.len();
    if k == 0 || k >= n {
        bail!(Parameter, "K must satisfy 0 < K < {n}, got {k}");
    }
    let vectors = table.vectors();
    let mut adjacency = Matrix::zeros(n, n);
    let mut neighbors = Vec::with_capacity(n);
    for i in 0..n {
        let mut cand: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (sq_dist(&vectors[i], &vectors[j]), j))
            .collect();
        cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let nn: Vec<usize> = cand[..k].iter().map(|&(_, j)| j).collect();
        for &j in &nn {
            adjacency[(i, j)] = 1.0;
        }
        neighbors.push(nn);
    }
    Ok(KnnGraph { k, adjacency, neighbors })
}

/// How class-pair similarity is measured for the language regularizer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityMode {
    /// Negated Euclidean distance over all class pairs.
    Euclidean,
    /// Cosine similarity over all class pairs.
    Cosine,
    /// Cosine similarity over the top-K graph edges only.
    #[default]
    TopkCosine,
}

impl SimilarityMode {
    pub const ALL: [SimilarityMode; 3] = [Self::Euclidean, Self::Cosine, Self::TopkCosine];

    pub fn uses_graph(self) -> bool {
        matches!(self, Self::TopkCosine)
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Euclidean => "Euclidean distance",
            Self::Cosine => "Cosine similarity",
            Self::TopkCosine => "Top-K Cosine similarity",
        }
    }
}

impl std::str::FromStr for SimilarityMode {
    type Err = crate::FscilError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "euclidean" => Ok(Self::Euclidean),
            "cosine" => Ok(Self::Cosine),
            "topk_cosine" | "top_k_cosine" => Ok(Self::TopkCosine),
            other => bail!(Parameter, "unknown similarity mode {other:?}"),
        }
    }
}

/// Larger means more similar in every mode; Euclidean mode returns `−‖a − b‖`.
pub fn pairwise_similarity(a: &[f64], b: &[f64], mode: SimilarityMode) -> Result<f64> {
    match mode {
        SimilarityMode::Cosine | SimilarityMode::TopkCosine => cosine_similarity(a, b),
        SimilarityMode::Euclidean => {
            if a.len() != b.len() {
                bail!(Shape, "dims {} and {}", a.len(), b.len());
            }
            Ok(-sq_dist(a, b).sqrt())
        }
    }
}

/// Mean backbone feature per class index.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassMeans {
    means: Vec<Option<Vec<f64>>>,
    counts: Vec<usize>,
}

impl ClassMeans {
    pub fn from_means(means: Vec<Option<Vec<f64>>>, counts: Vec<usize>) -> Result<Self> {
        if means.len() != counts.len() {
            bail!(Shape, "{} means for {} counts", means.len(), counts.len());
        }
        Ok(Self { means, counts })
    }

    pub fn num_classes(&self) -> usize {
        self.means.len()
    }

    pub fn count(&self, class: usize) -> usize {
        self.counts.get(class).copied().unwrap_or(0)
    }

    pub fn get(&self, class: usize) -> Result<&[f64]> {
        match self.means.get(class) {
            Some(Some(m)) => Ok(m),
            _ => bail!(MissingClass, "no samples for class index {class}"),
        }
    }

    pub(crate) fn set(&mut self, class: usize, mean: Vec<f64>) {
        self.means[class] = Some(mean);
    }
}

/// Arithmetic mean of `features` per label in `0..num_classes`.
pub fn class_visual_means<F: AsRef<[f64]>>(features: &[F], labels: &[usize], num_classes: usize) -> Result<ClassMeans> {
    if features.len() != labels.len() {
        bail!(Shape, "{} features for {} labels", features.len(), labels.len());
    }
    let dim = features.first().map_or(0, |f| f.as_ref().len());
    let mut sums = vec![vec![0.0; dim]; num_classes];
    let mut counts = vec![0usize; num_classes];
    for (f, &y) in features.iter().zip(labels) {
        let f = f.as_ref();
        if y >= num_classes {
            bail!(Label, "label index {y} outside 0..{num_classes}");
        }
        if f.len() != dim {
            bail!(Shape, "feature of dim {} among dim-{dim} features", f.len());
        }
        axpy(1.0, f, &mut sums[y]);
        counts[y] += 1;
    }
    let means = sums
        .into_iter()
        .zip(&counts)
        .map(|(s, &c)| (c > 0).then(|| s.into_iter().map(|v| v / c as f64).collect()))
        .collect();
    Ok(ClassMeans { means, counts })
}

/// Convex combination of base classifier rows pulled toward a novel class.
#[derive(Clone, Debug, PartialEq)]
pub struct Anchor {
    /// Softmax weights over the base classes, in base row order.
    pub weights: Vec<f64>,
    pub vector: Vec<f64>,
}

/// Semantic subspace anchor for novel class `novel`.
///
/// Weights are `softmax_j(e_j · e_c / tau)` over the base classes; the anchor
/// is the matching weighted sum of base classifier rows.
pub fn subspace_anchor<S: AsRef<str>>(
    base_weights: &Matrix,
    base_ids: &[S],
    embeddings: &EmbeddingTable,
    novel: &str,
    tau: f64,
) -> Result<Anchor> {
    if !(tau > 0.0) {
        bail!(Parameter, "tau must be positive, got {tau}");
    }
    if base_ids.len() != base_weights.rows() || base_ids.is_empty() {
        bail!(Shape, "{} base ids for {} base rows", base_ids.len(), base_weights.rows());
    }
    if base_ids.iter().any(|b| b.as_ref() == novel) {
        bail!(Parameter, "{novel} is a base class");
    }
    let e_c = embeddings.get(novel)?;
    let scores = base_ids
        .iter()
        .map(|b| embeddings.get(b.as_ref()).map(|e_j| dot(e_j, e_c)))
        .collect::<Result<Vec<_>>>()?;
    let weights = softmax_with_temperature(&scores, tau)?;
    let mut vector = vec![0.0; base_weights.cols()];
    for (w, row) in weights.iter().zip(base_weights.row_iter()) {
        axpy(*w, row, &mut vector);
    }
    Ok(Anchor { weights, vector })
}

/// Anchors for several novel classes, optionally on unit-normalized embeddings.
pub fn subspace_anchors<S: AsRef<str>>(
    base_weights: &Matrix,
    base_ids: &[S],
    embeddings: &EmbeddingTable,
    novel: &[S],
    tau: f64,
    normalize: bool,
) -> Result<Vec<Anchor>> {
    let normalized;
    let emb = if normalize {
        normalized = embeddings.normalized();
        &normalized
    } else {
        embeddings
    };
    novel
        .iter()
        .map(|c| subspace_anchor(base_weights, base_ids, emb, c.as_ref(), tau))
        .collect()
}
