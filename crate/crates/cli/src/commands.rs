use std::fs;
use std::path::{Path, PathBuf};

use fscil::eval::{evaluate_session, MethodRow, Report, ReportFormat, RunMetadata, SessionMetrics};
use fscil::gradsuite::{run_gradient_suite, GRAD_TOLERANCE};
use fscil::model::{load_checkpoint, save_checkpoint, Checkpoint};
use fscil::pipeline::{run_experiment, run_sessions, stream_for_seed, train_base_model};
use fscil::protocol::{generate_synthetic_dataset, synthetic_embeddings, synthetic_prototypes, LabeledDataset};
use fscil::semantic::{EmbeddingTable, SimilarityMode};
use fscil::trainer::write_ndjson;

use crate::config::{Resolved, RunConfig};
use crate::parallel::{parallel_map, thread_cap};
use crate::{Axis, CliError};

pub fn load(path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<Resolved, CliError> {
    let (mut cfg, root) = RunConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    cfg.validate()?;
    Ok(Resolved::new(cfg, root, out))
}

fn inputs(r: &Resolved) -> Result<(LabeledDataset, EmbeddingTable), CliError> {
    r.require_inputs()?;
    Ok((LabeledDataset::load(r.dataset())?, EmbeddingTable::load(r.embeddings())?))
}

fn out_dir(r: &Resolved) -> Result<PathBuf, CliError> {
    let dir = r.output_dir();
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn metadata(cfg: &RunConfig, extra: Option<(&str, serde_json::Value)>) -> RunMetadata {
    let mut hyper = cfg.hyper_json();
    if let Some((key, value)) = extra {
        hyper[key] = value;
    }
    RunMetadata { config_hash: cfg.hash(), seeds: cfg.seeds.clone(), hyper }
}

fn write_report(report: &Report, dir: &Path, stem: &str, format: ReportFormat) -> Result<PathBuf, CliError> {
    let text = report.render(format)?;
    let path = match format {
        ReportFormat::Csv => {
            fs::write(dir.join(format!("{stem}.meta.json")), report.metadata_json())?;
            dir.join(format!("{stem}.csv"))
        }
        ReportFormat::Markdown => dir.join(format!("{stem}.md")),
    };
    fs::write(&path, text)?;
    Ok(path)
}

fn write_log(path: &Path, records: &[fscil::trainer::LogRecord]) -> Result<(), CliError> {
    let mut buf = Vec::new();
    write_ndjson(&mut buf, records)?;
    fs::write(path, buf)?;
    Ok(())
}

fn checkpoint_hyper(cfg: &RunConfig) -> serde_json::Value {
    serde_json::json!({ "config_hash": cfg.hash(), "base": cfg.base, "incremental": cfg.incremental })
}

pub fn gen_data(r: &Resolved) -> Result<(), CliError> {
    let Some(syn) = &r.cfg.synthetic else {
        return Err(CliError::Config("gen-data needs a `synthetic` section".into()));
    };
    let (data, emb) = generate_synthetic_dataset(syn)?;
    for p in [r.dataset(), r.embeddings()] {
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir)?;
        }
    }
    data.save(r.dataset())?;
    emb.save(r.embeddings())?;
    println!("wrote {} samples of {} classes to {}", data.len(), data.classes().len(), r.dataset().display());
    println!("wrote embeddings (noise {}) to {}", syn.semantic_noise, r.embeddings().display());
    if !r.cfg.source_noise.is_empty() {
        let prototypes = synthetic_prototypes(syn)?;
        for (i, (tag, &noise)) in r.cfg.source_noise.iter().enumerate() {
            let path = r.source(tag)?;
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir)?;
            }
            synthetic_embeddings(syn, &prototypes, noise, i as u64 + 1)?.save(&path)?;
            println!("wrote {tag} embeddings (noise {noise}) to {}", path.display());
        }
    }
    Ok(())
}

fn base_ckpt(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("base_seed{seed}.ckpt"))
}

fn final_ckpt(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("final_seed{seed}.ckpt"))
}

pub fn train_base(r: &Resolved) -> Result<(), CliError> {
    let (data, emb) = inputs(r)?;
    let dir = out_dir(r)?;
    let cfg = &r.cfg;
    let results = parallel_map(&cfg.seeds, thread_cap()?, |&seed| -> Result<_, CliError> {
        let stream = stream_for_seed(&data, &cfg.stream, seed)?;
        let (model, log) = train_base_model(&data, &emb, &stream, &cfg.base, seed)?;
        let acc = evaluate_session(0, &model, &data, &stream.base().query, stream.base_classes(), stream.base_classes())?;
        Ok((seed, model, log, acc.joint_accuracy))
    });
    for res in results {
        let (seed, model, log, acc) = res?;
        save_checkpoint(base_ckpt(&dir, seed), &Checkpoint { model, seed, hyper: checkpoint_hyper(cfg) })?;
        write_log(&dir.join(format!("base_seed{seed}.log.ndjson")), &log)?;
        println!("seed {seed}: base query accuracy {:.2}%", acc * 100.0);
    }
    Ok(())
}

fn single_checkpoint(cfg: &RunConfig, checkpoint: &Option<PathBuf>) -> Result<(), CliError> {
    if checkpoint.is_some() && cfg.seeds.len() != 1 {
        return Err(CliError::Config("--checkpoint needs exactly one seed (use --seed)".into()));
    }
    Ok(())
}

fn read_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    if !path.is_file() {
        return Err(CliError::Config(format!("missing checkpoint {}", path.display())));
    }
    Ok(load_checkpoint(path)?)
}

pub fn run_incremental(r: &Resolved, format: ReportFormat, checkpoint: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = &r.cfg;
    single_checkpoint(cfg, &checkpoint)?;
    let (data, emb) = inputs(r)?;
    let dir = out_dir(r)?;
    let start: Vec<(u64, Checkpoint)> = cfg
        .seeds
        .iter()
        .map(|&s| {
            let path = checkpoint.clone().unwrap_or_else(|| base_ckpt(&dir, s));
            Ok((s, read_checkpoint(&path)?))
        })
        .collect::<Result<_, CliError>>()?;
    let results = parallel_map(&start, thread_cap()?, |(seed, ckpt)| -> Result<_, CliError> {
        let stream = stream_for_seed(&data, &cfg.stream, *seed)?;
        Ok(run_sessions(&ckpt.model, &data, &emb, &stream, &cfg.incremental, *seed)?)
    });
    let mut runs = Vec::with_capacity(results.len());
    for ((seed, _), res) in start.iter().zip(results) {
        let (model, metrics, log) = res?;
        save_checkpoint(final_ckpt(&dir, *seed), &Checkpoint { model, seed: *seed, hyper: checkpoint_hyper(cfg) })?;
        write_log(&dir.join(format!("sessions_seed{seed}.log.ndjson")), &log)?;
        fs::write(dir.join(format!("metrics_seed{seed}.json")), serde_json::to_string_pretty(&metrics).expect("metrics serialise") + "\n")?;
        let last = metrics.last().expect("session 0 always evaluated");
        println!("seed {seed}: final session {} joint accuracy {:.2}%", last.session, last.joint_accuracy * 100.0);
        runs.push(metrics);
    }
    let report = Report {
        label_column: "Method".into(),
        rows: vec![MethodRow::from_runs(cfg.method.clone(), &runs)?],
        reference: None,
        metadata: metadata(cfg, None),
    };
    let path = write_report(&report, &dir, "incremental", format)?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn evaluate(r: &Resolved, format: ReportFormat, checkpoint: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = &r.cfg;
    single_checkpoint(cfg, &checkpoint)?;
    let (data, _) = inputs(r)?;
    let dir = out_dir(r)?;
    let mut runs: Vec<Vec<SessionMetrics>> = Vec::new();
    let mut session = None;
    for &seed in &cfg.seeds {
        let path = checkpoint.clone().unwrap_or_else(|| final_ckpt(&dir, seed));
        let ckpt = read_checkpoint(&path)?;
        let stream = stream_for_seed(&data, &cfg.stream, seed)?;
        let known = ckpt.model.classifier.class_ids();
        let Some(t) = (0..stream.sessions.len()).find(|&t| stream.classes_upto(t) == known) else {
            return Err(CliError::Config(format!("{} does not match any session of the stream", path.display())));
        };
        if *session.get_or_insert(t) != t {
            return Err(CliError::Config("checkpoints cover different sessions".into()));
        }
        let mut m = evaluate_session(t, &ckpt.model, &data, &stream.sessions[t].query, known, stream.base_classes())?;
        println!("seed {seed}: session {t} joint accuracy {:.2}%", m.joint_accuracy * 100.0);
        m.session = 0;
        runs.push(vec![m]);
    }
    let report = Report {
        label_column: "Method".into(),
        rows: vec![MethodRow::from_runs(cfg.method.clone(), &runs)?],
        reference: None,
        metadata: metadata(cfg, Some(("evaluated_session", serde_json::json!(session)))),
    };
    let path = write_report(&report, &dir, "evaluate", format)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn axis_name(axis: Axis) -> &'static str {
    match axis {
        Axis::K => "k",
        Axis::Similarity => "similarity",
        Axis::Embedding => "embedding",
        Axis::LangReg => "lang-reg",
    }
}

/// One ablation setting: its row label, config and embedding table path.
struct Variant {
    label: String,
    cfg: RunConfig,
    embeddings: PathBuf,
}

fn variants(r: &Resolved, axis: Axis, values: Option<&str>) -> Result<Vec<Variant>, CliError> {
    let cfg = &r.cfg;
    let listed: Option<Vec<String>> =
        values.map(|v| v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect());
    let values: Vec<String> = match (listed, axis) {
        (Some(v), _) => v,
        (None, Axis::K) => cfg.ablation.k.iter().map(ToString::to_string).collect(),
        (None, Axis::Similarity) => {
            let modes = if cfg.ablation.similarity.is_empty() { &SimilarityMode::ALL[..] } else { &cfg.ablation.similarity[..] };
            modes.iter().map(|m| serde_json::to_value(m).expect("unit variant")).map(|v| v.as_str().unwrap_or_default().to_string()).collect()
        }
        (None, Axis::Embedding) if cfg.ablation.embedding.is_empty() => cfg.paths.sources.keys().cloned().collect(),
        (None, Axis::Embedding) => cfg.ablation.embedding.clone(),
        (None, Axis::LangReg) => vec!["with".into(), "without".into()],
    };
    if values.is_empty() {
        return Err(CliError::Config(format!("no values to sweep for axis {}", axis_name(axis))));
    }
    values
        .iter()
        .map(|v| {
            let mut c = cfg.clone();
            let mut embeddings = r.embeddings();
            let label = match axis {
                Axis::K => {
                    let k: usize = v.parse().map_err(|_| CliError::Config(format!("bad K value {v:?}")))?;
                    c.base.k = Some(k);
                    k.to_string()
                }
                Axis::Similarity => {
                    let m: SimilarityMode = v.parse()?;
                    c.base.similarity = m;
                    m.label().to_string()
                }
                Axis::Embedding => {
                    embeddings = r.source(v)?;
                    v.clone()
                }
                Axis::LangReg => match v.as_str() {
                    "with" => "With language regularizer".to_string(),
                    "without" => {
                        if c.base.phase2_keep_ce {
                            c.base.language_weight = 0.0;
                        } else {
                            c.base.epochs_phase2 = 0;
                        }
                        "Without language regularizer".to_string()
                    }
                    other => return Err(CliError::Config(format!("lang-reg values are with/without, got {other:?}"))),
                },
            };
            c.validate()?;
            Ok(Variant { label, cfg: c, embeddings })
        })
        .collect()
}

pub fn ablate(r: &Resolved, axis: Axis, values: Option<&str>, format: ReportFormat) -> Result<(), CliError> {
    r.require_inputs()?;
    let data = LabeledDataset::load(r.dataset())?;
    let variants = variants(r, axis, values)?;
    let tables = variants
        .iter()
        .map(|v| {
            if !v.embeddings.is_file() {
                return Err(CliError::Config(format!("missing embedding file {}", v.embeddings.display())));
            }
            Ok(EmbeddingTable::load(&v.embeddings)?)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let jobs: Vec<(usize, u64)> =
        (0..variants.len()).flat_map(|i| r.cfg.seeds.iter().map(move |&s| (i, s))).collect();
    let results = parallel_map(&jobs, thread_cap()?, |&(i, seed)| -> Result<_, CliError> {
        Ok(run_experiment(&data, &tables[i], &variants[i].cfg.experiment(), seed)?.metrics)
    });
    let mut per_variant: Vec<Vec<Vec<SessionMetrics>>> = vec![Vec::new(); variants.len()];
    for (&(i, _), res) in jobs.iter().zip(results) {
        per_variant[i].push(res?);
    }
    let rows = variants
        .iter()
        .zip(&per_variant)
        .map(|(v, runs)| MethodRow::from_runs(v.label.clone(), runs))
        .collect::<Result<Vec<_>, _>>()?;
    for row in &rows {
        println!("{}: final session {:.2}%", row.method, row.final_accuracy() * 100.0);
    }
    let label_column = match axis {
        Axis::K => "K",
        Axis::Similarity => "Similarity",
        Axis::Embedding => "Embedding",
        Axis::LangReg => "Method",
    };
    let extra = serde_json::json!({
        "axis": axis_name(axis),
        "values": variants.iter().map(|v| v.label.clone()).collect::<Vec<_>>(),
    });
    let report = Report { label_column: label_column.into(), rows, reference: None, metadata: metadata(&r.cfg, Some(("ablation", extra))) };
    let dir = out_dir(r)?;
    let stem = format!("ablate_{}", axis_name(axis).replace('-', "_"));
    let path = write_report(&report, &dir, &stem, format)?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn gradcheck(seed: Option<u64>) -> Result<(), CliError> {
    let seeds: Vec<u64> = match seed {
        Some(s) => vec![s],
        None => (0..10).collect(),
    };
    let results = run_gradient_suite(&seeds)?;
    let mut failed = 0;
    for r in &results {
        let status = if r.passed() { "ok" } else { "FAIL" };
        failed += usize::from(!r.passed());
        println!("{:<22} seed {:<3} max rel err {:.3e}  {status}", r.check, r.seed, r.max_relative_error);
    }
    if failed > 0 {
        return Err(CliError::Runtime(format!("{failed} gradient checks above {GRAD_TOLERANCE:e}")));
    }
    println!("all {} gradient checks passed", results.len());
    Ok(())
}

pub fn report(input: &Path, format: ReportFormat, out: Option<PathBuf>) -> Result<(), CliError> {
    let meta = input.with_extension("meta.json");
    let text = fs::read_to_string(&meta).map_err(|e| CliError::Config(format!("{}: {e}", meta.display())))?;
    let doc: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", meta.display())))?;
    let report = Report {
        label_column: serde_json::from_value(doc["label_column"].clone()).map_err(|e| CliError::Config(e.to_string()))?,
        rows: serde_json::from_value(doc["rows"].clone()).map_err(|e| CliError::Config(e.to_string()))?,
        reference: serde_json::from_value(doc["reference"].clone()).map_err(|e| CliError::Config(e.to_string()))?,
        metadata: serde_json::from_value(doc["metadata"].clone()).map_err(|e| CliError::Config(e.to_string()))?,
    };
    // the table on disk must agree with the sidecar it is rendered from
    let csv = fs::read_to_string(input)?;
    if report.render(ReportFormat::Csv)? != csv {
        return Err(CliError::Config(format!("{} does not match {}", input.display(), meta.display())));
    }
    let rendered = report.render(format)?;
    match out {
        Some(dir) => {
            fs::create_dir_all(&dir)?;
            let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
            let ext = match format {
                ReportFormat::Csv => "csv",
                ReportFormat::Markdown => "md",
            };
            let path = dir.join(format!("{stem}.{ext}"));
            fs::write(&path, rendered)?;
            println!("wrote {}", path.display());
        }
        None => print!("{rendered}"),
    }
    Ok(())
}
