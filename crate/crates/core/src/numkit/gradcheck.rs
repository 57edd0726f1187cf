use super::ParamSet;
use crate::error::{bail, Result};

/// Outcome of a finite-difference gradient check.
#[derive(Clone, Debug)]
pub struct GradcheckReport {
    pub max_relative_error: f64,
    /// Parameter name, row and column of the worst coordinate.
    pub worst: Option<(String, usize, usize)>,
    pub analytic: f64,
    pub numeric: f64,
    pub coordinates: usize,
}

/// Checks the analytic gradient returned by `loss` against central differences.
///
/// The relative error per coordinate is
/// `|analytic − numeric| / max(1e-12, |analytic| + |numeric|)`.
pub fn gradcheck<F>(loss: F, params: &ParamSet, epsilon: f64) -> Result<GradcheckReport>
where
    F: Fn(&ParamSet) -> Result<(f64, ParamSet)>,
{
    let (_, analytic) = loss(params)?;
    gradcheck_with(|p| loss(p).map(|(v, _)| v), &analytic, params, epsilon)
}

/// Like [`gradcheck`] but with a value-only closure and precomputed gradients.
pub fn gradcheck_with<F>(value: F, analytic: &ParamSet, params: &ParamSet, epsilon: f64) -> Result<GradcheckReport>
where
    F: Fn(&ParamSet) -> Result<f64>,
{
    if !(epsilon > 0.0) {
        bail!(Parameter, "epsilon must be positive");
    }
    params.check_compatible(analytic)?;
    let n = params.numel();
    let mut probe = params.clone();
    let mut report = GradcheckReport {
        max_relative_error: 0.0,
        worst: None,
        analytic: 0.0,
        numeric: 0.0,
        coordinates: n,
    };
    for i in 0..n {
        let orig = params.scalar(i).expect("index within numel");
        *probe.scalar_mut(i).unwrap() = orig + epsilon;
        let plus = value(&probe)?;
        *probe.scalar_mut(i).unwrap() = orig - epsilon;
        let minus = value(&probe)?;
        *probe.scalar_mut(i).unwrap() = orig;
        if !plus.is_finite() || !minus.is_finite() {
            bail!(Numeric, "loss not finite at perturbed coordinate {i}");
        }
        let numeric = (plus - minus) / (2.0 * epsilon);
        let a = analytic.scalar(i).unwrap();
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-12);
        if rel > report.max_relative_error || report.worst.is_none() {
            report.max_relative_error = rel;
            report.worst = params.locate(i);
            report.analytic = a;
            report.numeric = numeric;
        }
    }
    Ok(report)
}
