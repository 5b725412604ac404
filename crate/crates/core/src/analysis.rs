//! Sparsity diagnostics and the convergence-constant calculator.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Gini coefficient of the magnitudes of `values`, in `[0, 1)`.
///
/// With ascending magnitudes `x_(1) <= ... <= x_(n)`:
/// `G = Σ (2i - n - 1)·x_(i) / (n · Σ x_(i))`. Equal magnitudes give 0, a
/// single nonzero among `n` gives `(n-1)/n`. An all-zero (or empty) input is
/// defined as 0.
pub fn gini(values: &[f32]) -> f64 {
    let mut mags: Vec<f64> = values.iter().map(|v| v.abs() as f64).collect();
    let total: f64 = mags.iter().sum();
    if mags.is_empty() || total == 0.0 {
        return 0.0;
    }
    mags.sort_unstable_by(f64::total_cmp);
    let n = mags.len() as f64;
    let weighted: f64 = mags
        .iter()
        .enumerate()
        .map(|(i, x)| (2.0 * (i + 1) as f64 - n - 1.0) * x)
        .sum();
    (weighted / (n * total)).max(0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub eta: f64,
    /// Smoothness constant.
    pub smoothness: f64,
    /// Contraction constant of the compressor, in (0, 1].
    pub delta: f64,
    pub beta: f64,
    pub segments: u32,
    /// Bound on the gradient norm.
    pub grad_bound: f64,
    pub rounds: u64,
    /// `F(P_0) - F*`.
    pub initial_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConstants {
    pub mu: f64,
    pub staleness_term: f64,
    pub eta_lo: f64,
    pub eta_hi: f64,
    /// Bound on the average squared gradient norm over `rounds`.
    pub bound: f64,
    /// `eta` lies strictly inside `(eta_lo, eta_hi)`.
    pub valid: bool,
}

/// Evaluates the closed-form constants of the non-convex rate:
///
/// - `mu = eta·(5/2 + delta·(2·eta·L - 1) - 3·eta·L)`
/// - `staleness = e^-beta / (1 - e^-beta) · L²·eta²·Ns²·G²`
/// - admissible step sizes `1/L < eta < (5 - 2·delta) / ((6 - 4·delta)·L)`
/// - `bound = gap / (mu·T) + eta·(2·eta·L - 1)·staleness / mu`
pub fn convergence_constants(cfg: &ConvergenceConfig) -> Result<ConvergenceConstants> {
    let l = cfg.smoothness;
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::InvalidArgument(format!("smoothness must be positive, got {l}")));
    }
    if !(cfg.delta > 0.0 && cfg.delta <= 1.0) {
        return Err(Error::InvalidArgument(format!("delta must be in (0, 1], got {}", cfg.delta)));
    }
    if !(cfg.beta > 0.0) {
        return Err(Error::InvalidArgument(format!("beta must be positive, got {}", cfg.beta)));
    }
    if !(cfg.grad_bound >= 0.0) || cfg.rounds == 0 || cfg.segments == 0 {
        return Err(Error::InvalidArgument(
            "grad_bound must be >= 0, rounds and segments >= 1".into(),
        ));
    }
    let (eta, delta) = (cfg.eta, cfg.delta);
    let mu = eta * (2.5 + delta * (2.0 * eta * l - 1.0) - 3.0 * eta * l);
    if mu == 0.0 {
        return Err(Error::OutOfRange(format!("mu is zero at eta = {eta}")));
    }
    let decay = (-cfg.beta).exp();
    let ns = cfg.segments as f64;
    let staleness_term =
        decay / (1.0 - decay) * l * l * eta * eta * ns * ns * cfg.grad_bound * cfg.grad_bound;
    let eta_lo = 1.0 / l;
    let eta_hi = (5.0 - 2.0 * delta) / ((6.0 - 4.0 * delta) * l);
    let bound = cfg.initial_gap / (mu * cfg.rounds as f64)
        + eta * (2.0 * eta * l - 1.0) * staleness_term / mu;
    Ok(ConvergenceConstants {
        mu,
        staleness_term,
        eta_lo,
        eta_hi,
        bound,
        valid: eta > eta_lo && eta < eta_hi && mu > 0.0,
    })
}

/// Largest `delta` with `‖C(x) - x‖² <= (1 - delta)·‖x‖²` over every
/// `(x, C(x))` trace. Zero-norm inputs are skipped.
pub fn empirical_contraction_delta<'a, I>(traces: I) -> Result<f64>
where
    I: IntoIterator<Item = (&'a [f32], &'a [f32])>,
{
    let mut best: Option<f64> = None;
    for (x, cx) in traces {
        if x.len() != cx.len() {
            return Err(Error::ContractViolation(format!(
                "trace input has {} scalars, output {}",
                x.len(),
                cx.len()
            )));
        }
        let norm: f64 = x.iter().map(|&v| (v as f64).powi(2)).sum();
        if norm == 0.0 {
            continue;
        }
        let err: f64 = x
            .iter()
            .zip(cx)
            .map(|(&a, &b)| (b as f64 - a as f64).powi(2))
            .sum();
        let d = 1.0 - err / norm;
        best = Some(best.map_or(d, |b: f64| b.min(d)));
    }
    best.ok_or_else(|| Error::InsufficientData("no trace with a nonzero input".into()))
}
