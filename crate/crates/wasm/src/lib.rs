//! Browser bindings for the demo page in `www/`.
//!
//! Everything here takes and returns flat `f64`/`u32` arrays so the same
//! functions run natively in tests and through wasm-bindgen in the page.

use fscil::model::Model;
use fscil::numkit::Matrix;
use fscil::pipeline::{evaluate_stream_session, run_sessions, stream_for_seed, train_base_model};
use fscil::protocol::{generate_synthetic_dataset, LabeledDataset, SessionStream, StreamConfig, SyntheticConfig};
use fscil::semantic::{build_knn_graph, subspace_anchor, EmbeddingTable};
use fscil::trainer::{HyperBase, IncrementalHyper};
use wasm_bindgen::prelude::*;

fn points_2d(points: &[f64]) -> Result<Vec<Vec<f64>>, String> {
    if points.is_empty() || points.len() % 2 != 0 {
        return Err(format!("expected flat (x, y) pairs, got {} values", points.len()));
    }
    Ok(points.chunks(2).map(<[f64]>::to_vec).collect())
}

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("b{i}")).collect()
}

/// Softmax weights of each base point for a novel point at `(x, y)`, followed
/// by the anchor position (the weighted mean of the base points).
///
/// `points` holds the base embeddings as flat `(x, y)` pairs; they double as
/// the base classifier rows so the anchor can be drawn in the same plane.
#[wasm_bindgen]
pub fn anchor_weights(points: &[f64], x: f64, y: f64, tau: f64) -> Result<Vec<f64>, String> {
    let base = points_2d(points)?;
    let n = base.len();
    let mut all_ids = ids(n);
    all_ids.push("novel".into());
    let mut vectors = base.clone();
    vectors.push(vec![x, y]);
    let table = EmbeddingTable::new(all_ids, vectors).map_err(|e| e.to_string())?;
    let rows = Matrix::from_rows(&base).map_err(|e| e.to_string())?;
    let a = subspace_anchor(&rows, &ids(n), &table, "novel", tau).map_err(|e| e.to_string())?;
    let mut out = a.weights;
    out.extend(a.vector);
    Ok(out)
}

/// Directed KNN edges as flat `(from, to)` pairs.
#[wasm_bindgen]
pub fn knn_edges(points: &[f64], k: usize) -> Result<Vec<u32>, String> {
    let base = points_2d(points)?;
    let table = EmbeddingTable::new(ids(base.len()), base).map_err(|e| e.to_string())?;
    let g = build_knn_graph(&table, k).map_err(|e| e.to_string())?;
    Ok((0..g.len())
        .flat_map(|i| g.neighbors(i).iter().flat_map(move |&j| [i as u32, j as u32]))
        .collect())
}

/// A small synthetic run with a trained base model, re-run per `gamma`.
#[wasm_bindgen]
pub struct SessionLab {
    data: LabeledDataset,
    emb: EmbeddingTable,
    stream: SessionStream,
    base: Model,
    base_accuracy: f64,
    seed: u64,
}

#[wasm_bindgen]
impl SessionLab {
    /// Generates the data and trains the base model; well under a second natively.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32) -> Result<SessionLab, String> {
        let seed = u64::from(seed);
        let synth = SyntheticConfig { seed, ..Default::default() };
        let cfg = StreamConfig { base_classes: 20, sessions: 4, n_way: 5, k_shot: 5, query_per_class: 15, seed };
        let hyper = HyperBase {
            epochs_phase1: 40,
            epochs_phase2: 20,
            widths: vec![32],
            phase2_keep_ce: true,
            ..Default::default()
        };
        let run = || -> fscil::Result<SessionLab> {
            let (data, emb) = generate_synthetic_dataset(&synth)?;
            let stream = stream_for_seed(&data, &cfg, seed)?;
            let (base, _) = train_base_model(&data, &emb, &stream, &hyper, seed)?;
            let base_accuracy = evaluate_stream_session(&base, &data, &stream, 0)?.joint_accuracy;
            Ok(SessionLab { data, emb, stream, base, base_accuracy, seed })
        };
        run().map_err(|e| e.to_string())
    }

    #[wasm_bindgen(getter)]
    pub fn base_accuracy(&self) -> f64 {
        self.base_accuracy
    }

    #[wasm_bindgen(getter)]
    pub fn sessions(&self) -> usize {
        self.stream.sessions.len()
    }

    /// Joint accuracy per session (session 0 is the base model) for a given `gamma`.
    pub fn curve(&self, gamma: f64, tau: f64) -> Result<Vec<f64>, String> {
        let hyper = IncrementalHyper { gamma, tau, ..Default::default() };
        let (_, metrics, _) =
            run_sessions(&self.base, &self.data, &self.emb, &self.stream, &hyper, self.seed).map_err(|e| e.to_string())?;
        Ok(metrics.iter().map(|m| m.joint_accuracy).collect())
    }
}
