//! End-to-end runs: base training, every incremental session, per-session metrics.

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::eval::{evaluate_session, SessionMetrics};
use crate::model::{Model, Sample};
use crate::protocol::{build_session_stream, sample_memory, LabeledDataset, MemoryBuffer, SessionStream, StreamConfig};
use crate::semantic::EmbeddingTable;
use crate::trainer::{run_incremental_session, train_base, HyperBase, IncrementalHyper, LogRecord, WeightSnapshot};

/// Everything a run needs besides data and the seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub stream: StreamConfig,
    #[serde(default)]
    pub base: HyperBase,
    #[serde(default)]
    pub incremental: IncrementalHyper,
}

#[derive(Clone, Debug)]
pub struct Experiment {
    pub stream: SessionStream,
    pub base_model: Model,
    pub final_model: Model,
    pub metrics: Vec<SessionMetrics>,
    pub log: Vec<LogRecord>,
}

/// Builds the stream for `seed`; the run seed replaces `cfg.seed`.
pub fn stream_for_seed(data: &LabeledDataset, cfg: &StreamConfig, seed: u64) -> Result<SessionStream> {
    build_session_stream(data, &StreamConfig { seed, ..cfg.clone() })
}

/// Trains on the base support set of `stream`.
pub fn train_base_model(
    data: &LabeledDataset,
    emb: &EmbeddingTable,
    stream: &SessionStream,
    hyper: &HyperBase,
    seed: u64,
) -> Result<(Model, Vec<LogRecord>)> {
    let classes = stream.base_classes();
    let samples: Vec<Sample> = stream
        .base()
        .support_flat()
        .map(|(i, c)| (data.feature(i), classes.iter().position(|x| x == c).expect("base class")))
        .collect();
    train_base(classes, &samples, emb, hyper, seed)
}

/// Joint metrics for session `t` of `stream`.
pub fn evaluate_stream_session(model: &Model, data: &LabeledDataset, stream: &SessionStream, t: usize) -> Result<SessionMetrics> {
    let Some(session) = stream.sessions.get(t) else {
        bail!(Parameter, "session {t} out of range");
    };
    evaluate_session(t, model, data, &session.query, &stream.classes_upto(t), stream.base_classes())
}

/// Runs sessions `1..=T` from a trained base model, evaluating after each.
pub fn run_sessions(
    base_model: &Model,
    data: &LabeledDataset,
    emb: &EmbeddingTable,
    stream: &SessionStream,
    hyper: &IncrementalHyper,
    seed: u64,
) -> Result<(Model, Vec<SessionMetrics>, Vec<LogRecord>)> {
    if base_model.classifier.class_ids() != stream.base_classes() {
        bail!(Parameter, "model classes do not match the stream's base classes");
    }
    let mut model = base_model.clone();
    let mut snapshots = vec![WeightSnapshot::capture(0, stream.base_classes().to_vec(), &model)];
    let mut metrics = vec![evaluate_stream_session(&model, data, stream, 0)?];
    let mut memory = MemoryBuffer::new();
    let mut log = Vec::new();
    for t in 1..=stream.num_incremental() {
        if hyper.use_memory {
            memory = sample_memory(stream, t, &memory, seed)?;
        }
        let mem = hyper.use_memory.then_some(&memory);
        let out = run_incremental_session(&model, &stream.sessions[t], data, emb, &snapshots, mem, hyper, seed)?;
        model = out.model;
        snapshots.push(out.snapshot);
        log.extend(out.log);
        metrics.push(evaluate_stream_session(&model, data, stream, t)?);
    }
    Ok((model, metrics, log))
}

/// Full run for one seed.
pub fn run_experiment(data: &LabeledDataset, emb: &EmbeddingTable, cfg: &ExperimentConfig, seed: u64) -> Result<Experiment> {
    let stream = stream_for_seed(data, &cfg.stream, seed)?;
    let (base_model, mut log) = train_base_model(data, emb, &stream, &cfg.base, seed)?;
    let (final_model, metrics, session_log) = run_sessions(&base_model, data, emb, &stream, &cfg.incremental, seed)?;
    log.extend(session_log);
    Ok(Experiment { stream, base_model, final_model, metrics, log })
}
