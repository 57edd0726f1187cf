//! Numeric primitives shared by every loss: dense matrices, named parameter
//! sets, seeded randomness, softmax/cosine, the SGD update and a
//! finite-difference gradient checker.

mod gradcheck;
mod matrix;
mod params;
mod rng;

pub use gradcheck::{gradcheck, gradcheck_with, GradcheckReport};
pub use matrix::{axpy, dot, norm, sq_dist, Matrix};
pub use params::ParamSet;
pub use rng::SeededRng;

use crate::error::{bail, Result};

/// Softmax of `scores / tau`, max-subtracted.
pub fn softmax_with_temperature(scores: &[f64], tau: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0) || !tau.is_finite() {
        bail!(Parameter, "temperature must be positive and finite, got {tau}");
    }
    if scores.is_empty() {
        bail!(Parameter, "softmax of an empty score vector");
    }
    if scores.iter().any(|s| !s.is_finite()) {
        bail!(Numeric, "non-finite score passed to softmax");
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = scores.iter().map(|s| ((s - max) / tau).exp()).collect();
    let z: f64 = out.iter().sum();
    for v in &mut out {
        *v /= z;
    }
    Ok(out)
}

/// Cosine similarity clamped to [-1, 1].
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        bail!(Shape, "cosine of vectors with dims {} and {}", u.len(), v.len());
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        bail!(Degenerate, "cosine similarity with a zero-norm vector");
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// In-place `p ← p − lr·(g + weight_decay·p)` for every parameter.
pub fn sgd_step(params: &mut ParamSet, grads: &ParamSet, lr: f64, weight_decay: f64) -> Result<()> {
    if !(lr >= 0.0) || !(weight_decay >= 0.0) {
        bail!(Parameter, "lr and weight decay must be non-negative (lr={lr}, wd={weight_decay})");
    }
    params.check_compatible(grads)?;
    if grads.iter().any(|(_, g)| !g.is_finite()) {
        bail!(Numeric, "non-finite gradient");
    }
    for ((_, p), (_, g)) in params.iter_mut().zip(grads.iter()) {
        for (pi, gi) in p.as_mut_slice().iter_mut().zip(g.as_slice()) {
            *pi -= lr * (gi + weight_decay * *pi);
        }
    }
    Ok(())
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}
