//! Finite-difference checks of every hand-derived gradient on random fixtures.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::Result;
use crate::model::{loss_language_reg, loss_main, LanguagePrior, Model, Sample, CLASSIFIER_PARAM};
use crate::numkit::{gradcheck, Matrix, ParamSet, SeededRng};
use crate::semantic::{ClassMeans, EmbeddingTable, SimilarityMode};
use crate::trainer::{r_new, r_old, IncrementalHyper, SessionObjective, WeightSnapshot};

pub const GRAD_EPSILON: f64 = 1e-6;
pub const GRAD_TOLERANCE: f64 = 1e-5;

/// Names of the checked functions, in suite order.
pub const CHECKS: [&str; 5] = ["loss_main", "loss_language_reg", "r_old", "r_new", "incremental_objective"];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradResult {
    pub check: &'static str,
    pub seed: u64,
    pub max_relative_error: f64,
}

impl GradResult {
    pub fn passed(&self) -> bool {
        self.max_relative_error < GRAD_TOLERANCE
    }
}

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("c{i}")).collect()
}

fn random_matrix(rng: &mut SeededRng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, rng.normal_vec(rows * cols)).expect("sized")
}

fn weights_only(w: Matrix) -> ParamSet {
    ParamSet::new().with(CLASSIFIER_PARAM, w).expect("single entry")
}

/// Zero biases put fully-dead layers exactly on the ReLU kink.
fn with_random_biases(mut model: Model, rng: &mut SeededRng) -> Result<Model> {
    let mut p = model.params();
    for (name, v) in p.iter_mut() {
        if name.ends_with("bias") {
            v.as_mut_slice().iter_mut().for_each(|b| *b = 0.1 * rng.normal());
        }
    }
    model.set_params(&p)?;
    Ok(model)
}

fn check_main(seed: u64) -> Result<f64> {
    let mut rng = SeededRng::derive(seed, 1);
    let model = Model::init(4, &[5, 4], ids(3), &mut rng)?;
    let model = with_random_biases(model, &mut rng)?;
    let xs: Vec<Vec<f64>> = (0..6).map(|_| rng.normal_vec(4)).collect();
    let batch: Vec<Sample> = xs.iter().enumerate().map(|(i, x)| (x.as_slice(), i % 3)).collect();
    let report = gradcheck(
        |p| {
            let o = loss_main(&model.with_params(p)?, &batch, 0.05)?;
            Ok((o.value, o.grads))
        },
        &model.params(),
        GRAD_EPSILON,
    )?;
    Ok(report.max_relative_error)
}

fn check_language(seed: u64) -> Result<f64> {
    let mut rng = SeededRng::derive(seed, 2);
    let n = 4;
    let model = Model::init(3, &[4, 3], ids(n), &mut rng)?;
    let model = with_random_biases(model, &mut rng)?;
    let emb = EmbeddingTable::new(ids(n), (0..n).map(|_| rng.normal_vec(3)).collect())?;
    let running = ClassMeans::from_means((0..n).map(|_| Some(rng.normal_vec(3))).collect(), vec![1; n])?;
    let prior = LanguagePrior::new(&emb, &ids(n), 2, SimilarityMode::TopkCosine)?;
    let xs: Vec<Vec<f64>> = (0..8).map(|_| rng.normal_vec(3)).collect();
    let batch: Vec<Sample> = xs.iter().enumerate().map(|(i, x)| (x.as_slice(), i % n)).collect();
    let report = gradcheck(
        |p| {
            let o = loss_language_reg(&model.with_params(p)?, &batch, &running, &prior, 0.9)?;
            Ok((o.loss.value, o.loss.grads))
        },
        &model.params(),
        GRAD_EPSILON,
    )?;
    Ok(report.max_relative_error)
}

struct SessionFixture {
    class_ids: Vec<String>,
    snapshots: Vec<WeightSnapshot>,
    novel: Vec<String>,
    anchors: BTreeMap<String, Vec<f64>>,
    samples: Vec<(Vec<f64>, usize)>,
    weights: Matrix,
}

/// Three base classes, two from session 1, two novel in session 2.
fn session_fixture(seed: u64) -> SessionFixture {
    let mut rng = SeededRng::derive(seed, 3);
    let dim = 3;
    let class_ids = ids(7);
    let snapshots = vec![
        WeightSnapshot {
            session: 0,
            introduced: class_ids[..3].to_vec(),
            class_ids: class_ids[..3].to_vec(),
            rows: random_matrix(&mut rng, 3, dim),
        },
        WeightSnapshot {
            session: 1,
            introduced: class_ids[3..5].to_vec(),
            class_ids: class_ids[..5].to_vec(),
            rows: random_matrix(&mut rng, 5, dim),
        },
    ];
    let novel = class_ids[5..].to_vec();
    let anchors = novel.iter().map(|c| (c.clone(), rng.normal_vec(dim))).collect();
    let samples = (0..6).map(|i| (rng.normal_vec(dim), 5 + i % 2)).collect();
    let weights = random_matrix(&mut rng, 7, dim);
    SessionFixture { class_ids, snapshots, novel, anchors, samples, weights }
}

fn check_r_old(seed: u64) -> Result<f64> {
    let f = session_fixture(seed);
    let report = gradcheck(
        |p| {
            let out = r_old(&f.class_ids, p.require(CLASSIFIER_PARAM)?, &f.snapshots, 2)?;
            Ok((out.value, weights_only(out.grad)))
        },
        &weights_only(f.weights.clone()),
        GRAD_EPSILON,
    )?;
    Ok(report.max_relative_error)
}

fn check_r_new(seed: u64) -> Result<f64> {
    let f = session_fixture(seed);
    let report = gradcheck(
        |p| {
            let out = r_new(&f.class_ids, p.require(CLASSIFIER_PARAM)?, &f.novel, &f.anchors)?;
            Ok((out.value, weights_only(out.grad)))
        },
        &weights_only(f.weights.clone()),
        GRAD_EPSILON,
    )?;
    Ok(report.max_relative_error)
}

fn check_objective(seed: u64) -> Result<f64> {
    let f = session_fixture(seed);
    let objective = SessionObjective {
        class_ids: f.class_ids.clone(),
        samples: f.samples.clone(),
        snapshots: &f.snapshots,
        session: 2,
        novel: f.novel.clone(),
        anchors: f.anchors.clone(),
        hyper: IncrementalHyper { alpha: 0.1, beta: 0.5, gamma: 2.0, ..Default::default() },
    };
    let report = gradcheck(
        |p| {
            let (terms, grad) = objective.evaluate(p.require(CLASSIFIER_PARAM)?)?;
            Ok((terms.total(&objective.hyper), weights_only(grad)))
        },
        &weights_only(f.weights.clone()),
        GRAD_EPSILON,
    )?;
    Ok(report.max_relative_error)
}

/// Runs every check on every seed.
pub fn run_gradient_suite(seeds: &[u64]) -> Result<Vec<GradResult>> {
    let mut out = Vec::with_capacity(seeds.len() * CHECKS.len());
    for &seed in seeds {
        let errors = [check_main(seed)?, check_language(seed)?, check_r_old(seed)?, check_r_new(seed)?, check_objective(seed)?];
        for (check, max_relative_error) in CHECKS.into_iter().zip(errors) {
            out.push(GradResult { check, seed, max_relative_error });
        }
    }
    Ok(out)
}
