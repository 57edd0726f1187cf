use std::collections::BTreeMap;

use super::*;
use crate::model::{Backbone, Classifier, Model};
use crate::numkit::{gradcheck_with, Matrix, ParamSet, SeededRng};
use crate::protocol::{build_session_stream, generate_synthetic_dataset, StreamConfig, SyntheticConfig};
use crate::FscilError;

fn ids(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn snap(session: usize, introduced: &[&str], all: &[&str], rows: Vec<Vec<f64>>) -> WeightSnapshot {
    WeightSnapshot {
        session,
        introduced: ids(introduced),
        class_ids: ids(all),
        rows: Matrix::from_rows(&rows).unwrap(),
    }
}

#[test]
fn r_old_counts_each_class_against_its_own_session() {
    let snaps = vec![
        snap(0, &["a"], &["a"], vec![vec![1.0, 0.0]]),
        snap(1, &["b"], &["a", "b"], vec![vec![5.0, 5.0], vec![0.0, 2.0]]),
    ];
    let w = Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 0.0], vec![3.0, 3.0]]).unwrap();
    let all = ids(&["a", "b", "c"]);
    // a vs session-0 row (1,0): 1; b vs (0,2): 4.
    let p = r_old(&all, &w, &snaps, 2).unwrap();
    assert_eq!(p.value, 5.0);
    assert_eq!(p.grad.row(0), &[0.0, 2.0]);
    assert_eq!(p.grad.row(1), &[0.0, -4.0]);
    assert_eq!(p.grad.row(2), &[0.0, 0.0]);
    assert_eq!(r_old(&all, &w, &snaps, 1).unwrap().value, 1.0);
}

#[test]
fn r_old_missing_snapshot_is_an_error() {
    let w = Matrix::zeros(1, 2);
    let err = r_old(&ids(&["a"]), &w, &[], 1).unwrap_err();
    assert!(matches!(err, FscilError::MissingClass(_)));
}

#[test]
fn r_new_hand_value_and_missing_anchor() {
    let w = Matrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 0.0]]).unwrap();
    let mut anchors = BTreeMap::new();
    anchors.insert("n".to_string(), vec![0.0, 1.0]);
    let p = r_new(&ids(&["a", "n"]), &w, &ids(&["n"]), &anchors).unwrap();
    assert_eq!(p.value, 5.0);
    assert_eq!(p.grad.row(1), &[4.0, -2.0]);
    let err = r_new(&ids(&["a", "n"]), &w, &ids(&["m"]), &anchors).unwrap_err();
    assert!(matches!(err, FscilError::MissingClass(_)));
}

fn objective_fixture(seed: u64, hyper: IncrementalHyper) -> (SessionObjective<'static>, Matrix) {
    let mut rng = SeededRng::new(seed);
    let snaps: &'static [WeightSnapshot] = Box::leak(Box::new(vec![snap(
        0,
        &["a", "b"],
        &["a", "b"],
        vec![rng.normal_vec(3), rng.normal_vec(3)],
    )]));
    let mut anchors = BTreeMap::new();
    anchors.insert("n".to_string(), rng.normal_vec(3));
    let samples = (0..4).map(|i| (rng.normal_vec(3), i % 3)).collect();
    let w = Matrix::from_rows(&[rng.normal_vec(3), rng.normal_vec(3), rng.normal_vec(3)]).unwrap();
    let obj = SessionObjective {
        class_ids: ids(&["a", "b", "n"]),
        samples,
        snapshots: snaps,
        session: 1,
        novel: ids(&["n"]),
        anchors,
        hyper,
    };
    (obj, w)
}

#[test]
fn objective_gradient_matches_finite_differences() {
    for seed in 0..5 {
        let hyper = IncrementalHyper { alpha: 0.3, beta: 0.7, gamma: 1.3, ..Default::default() };
        let (obj, w) = objective_fixture(seed, hyper);
        let (_, grad) = obj.evaluate(&w).unwrap();
        let params = ParamSet::new().with("classifier.weight", w).unwrap();
        let analytic = ParamSet::new().with("classifier.weight", grad).unwrap();
        let report = gradcheck_with(
            |p| Ok(obj.evaluate(p.require("classifier.weight")?)?.0.total(&obj.hyper)),
            &analytic,
            &params,
            1e-6,
        )
        .unwrap();
        assert!(report.max_relative_error < 1e-6, "seed {seed}: {report:?}");
    }
}

#[test]
fn proximal_step_pins_rows_under_huge_penalties() {
    let hyper = IncrementalHyper { beta: 1e6, gamma: 1e6, ..Default::default() };
    let (obj, mut w) = objective_fixture(3, hyper.clone());
    for _ in 0..20 {
        obj.step(&mut w).unwrap();
    }
    assert!(w.is_finite());
    let (terms, _) = obj.evaluate(&w).unwrap();
    assert!(terms.old < 1e-6 && terms.new < 1e-6, "{terms:?}");

    let explicit = IncrementalHyper { penalty_step: PenaltyStep::Explicit, ..hyper };
    let (obj, mut w) = objective_fixture(3, explicit);
    let err = (0..200).try_for_each(|_| obj.step(&mut w)).unwrap_err();
    assert!(matches!(err, FscilError::Numeric(_)));
}

#[test]
fn proximal_and_explicit_agree_for_small_steps() {
    let hyper = IncrementalHyper { lr: 1e-4, alpha: 0.1, ..Default::default() };
    let (a, w0) = objective_fixture(1, hyper.clone());
    let (b, _) = objective_fixture(1, IncrementalHyper { penalty_step: PenaltyStep::Explicit, ..hyper });
    let (mut wa, mut wb) = (w0.clone(), w0);
    for _ in 0..10 {
        a.step(&mut wa).unwrap();
        b.step(&mut wb).unwrap();
    }
    let diff: f64 = wa.as_slice().iter().zip(wb.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    // splitting error is O(lr²) per step
    assert!(diff < 1e-5, "{diff}");
}

#[test]
fn objective_decreases_over_steps() {
    let (obj, mut w) = objective_fixture(2, IncrementalHyper { lr: 0.05, ..Default::default() });
    let start = obj.evaluate(&w).unwrap().0.total(&obj.hyper);
    for _ in 0..100 {
        obj.step(&mut w).unwrap();
    }
    let end = obj.evaluate(&w).unwrap().0.total(&obj.hyper);
    assert!(end < start, "{start} -> {end}");
}

fn tiny_setup() -> (crate::protocol::LabeledDataset, crate::semantic::EmbeddingTable, crate::protocol::SessionStream) {
    let cfg = SyntheticConfig { num_classes: 8, feature_dim: 6, samples_per_class: 24, ..Default::default() };
    let (data, emb) = generate_synthetic_dataset(&cfg).unwrap();
    let stream = build_session_stream(
        &data,
        &StreamConfig { base_classes: 4, sessions: 2, n_way: 2, k_shot: 3, query_per_class: 5, seed: 1 },
    )
    .unwrap();
    (data, emb, stream)
}

fn base_model(data: &crate::protocol::LabeledDataset, stream: &crate::protocol::SessionStream) -> Model {
    let classes = stream.base_classes().to_vec();
    let mut rng = SeededRng::new(9);
    let backbone = Backbone::identity(data.dim());
    let classifier = Classifier::random(classes, data.dim(), &mut rng).unwrap();
    Model::new(backbone, classifier).unwrap()
}

#[test]
fn session_only_touches_the_classifier_and_appends_rows() {
    let (data, emb, stream) = tiny_setup();
    let model = base_model(&data, &stream);
    let snaps = vec![WeightSnapshot::capture(0, stream.base_classes().to_vec(), &model)];
    let hyper = IncrementalHyper { steps: 5, ..Default::default() };
    let out = run_incremental_session(&model, &stream.sessions[1], &data, &emb, &snaps, None, &hyper, 0).unwrap();
    assert_eq!(out.model.backbone, model.backbone);
    assert_eq!(out.model.classifier.num_classes(), 6);
    assert_eq!(&out.model.classifier.class_ids()[4..], stream.sessions[1].classes.as_slice());
    assert_eq!(out.log.len(), 6);
    assert_eq!(out.snapshot.introduced, stream.sessions[1].classes);

    let zero = IncrementalHyper { steps: 0, ..Default::default() };
    let out = run_incremental_session(&model, &stream.sessions[1], &data, &emb, &snaps, None, &zero, 0).unwrap();
    for c in &stream.sessions[1].classes {
        let r = out.model.classifier.position(c).unwrap();
        assert_eq!(out.model.classifier.weights().row(r), out.anchors[c].as_slice());
    }
}

#[test]
fn imprint_rows_match_mean_base_norm() {
    let (data, emb, stream) = tiny_setup();
    let model = base_model(&data, &stream);
    let snaps = vec![WeightSnapshot::capture(0, stream.base_classes().to_vec(), &model)];
    let hyper = IncrementalHyper { steps: 0, init: NovelInit::Imprint, ..Default::default() };
    let out = run_incremental_session(&model, &stream.sessions[1], &data, &emb, &snaps, None, &hyper, 0).unwrap();
    let w = model.classifier.weights();
    let mean: f64 = w.row_iter().map(crate::numkit::norm).sum::<f64>() / w.rows() as f64;
    for c in &stream.sessions[1].classes {
        let r = out.model.classifier.position(c).unwrap();
        let n = crate::numkit::norm(out.model.classifier.weights().row(r));
        assert!((n - mean).abs() < 1e-12);
    }
}

#[test]
fn memory_flag_without_buffer_fails() {
    let (data, emb, stream) = tiny_setup();
    let model = base_model(&data, &stream);
    let snaps = vec![WeightSnapshot::capture(0, stream.base_classes().to_vec(), &model)];
    let hyper = IncrementalHyper { use_memory: true, ..Default::default() };
    let err = run_incremental_session(&model, &stream.sessions[1], &data, &emb, &snaps, None, &hyper, 0).unwrap_err();
    assert!(matches!(err, FscilError::Parameter(_)));
}

#[test]
fn base_training_logs_each_epoch_with_active_terms() {
    let (data, emb, stream) = tiny_setup();
    let classes = stream.base_classes().to_vec();
    let samples: Vec<(&[f64], usize)> = stream
        .base()
        .support_flat()
        .map(|(i, c)| (data.feature(i), classes.iter().position(|x| x == c).unwrap()))
        .collect();
    let hyper = HyperBase { epochs_phase1: 3, epochs_phase2: 2, widths: vec![5], batch_size: 8, ..Default::default() };
    let (model, log) = train_base(&classes, &samples, &emb, &hyper, 4).unwrap();
    assert_eq!(log.len(), 5);
    assert!(log[..3].iter().all(|r| r.components.contains_key("loss_main") && !r.components.contains_key("loss_language")));
    assert!(log[3..].iter().all(|r| r.components.contains_key("loss_language") && !r.components.contains_key("loss_main")));
    let (again, _) = train_base(&classes, &samples, &emb, &hyper, 4).unwrap();
    assert_eq!(model, again);
}
