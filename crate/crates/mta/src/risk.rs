//! Analytic risk of linear mean estimators, the two-task mean squared error
//! and its dominance threshold, and the optimal-similarity solvers.

use nalgebra::DVector;

use crate::error::{MtaError, Result};
use crate::graph::{MeanCovariance, WeightMatrix};
use crate::util::mean_squared_pairwise_diff;

/// Risk of the linear estimator `W ybar`, split into its variance term
/// `tr(W Sigma W^T)` and squared-bias term `mu^T (I-W)^T (I-W) mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskBreakdown {
    pub total: f64,
    pub variance_term: f64,
    pub bias_term: f64,
}

/// Evaluates the risk decomposition of `W ybar` for true means `mu`.
pub fn analytic_risk(
    weights: &WeightMatrix,
    sigma: &MeanCovariance,
    mu: &DVector<f64>,
) -> Result<RiskBreakdown> {
    let t = weights.size();
    if sigma.size() != t || mu.len() != t {
        return Err(MtaError::DimensionMismatch {
            what: "risk inputs",
            expected: t,
            got: sigma.size().min(mu.len()),
        });
    }
    let w = weights.entries_raw();
    let diag = sigma.diagonal();

    // tr(W Sigma W^T) with diagonal Sigma collapses to a weighted sum of
    // squared entries.
    let mut variance_term = 0.0;
    for r in 0..t {
        for c in 0..t {
            variance_term += w[(r, c)] * w[(r, c)] * diag[c];
        }
    }

    let mut bias_term = 0.0;
    for r in 0..t {
        let mut residual = mu[r];
        for c in 0..t {
            residual -= w[(r, c)] * mu[c];
        }
        bias_term += residual * residual;
    }

    Ok(RiskBreakdown {
        total: variance_term + bias_term,
        variance_term,
        bias_term,
    })
}

/// Mean squared error of the first task's two-task joint estimate at
/// `gamma = 1`, as a function of the shared similarity `a`, the variances of
/// the two sample means `s1 = sigma_1^2/N_1` and `s2 = sigma_2^2/N_2`, and
/// the mean separation `delta = mu_2 - mu_1`.
pub fn two_task_mse(a: f64, s1: f64, s2: f64, delta: f64) -> f64 {
    assert!(a >= 0.0, "similarity must be non-negative");
    assert!(s1 > 0.0 && s2 > 0.0, "mean variances must be positive");
    let t = 2.0;
    let denom = t + s1 * a + s2 * a;
    let variance_num = t * t + 2.0 * t * s2 * a + s1 * s2 * a * a + s2 * s2 * a * a;
    (s1 * variance_num + delta * delta * s1 * s1 * a * a) / (denom * denom)
}

/// The squared mean separation below which the two-task joint estimate of
/// task 1 strictly beats its single-task sample average:
/// `4/a + s1 + s2`. At `a = 0` the threshold is infinite (any separation
/// admits some benefit from vanishing regularization).
pub fn two_task_threshold(a: f64, s1: f64, s2: f64) -> f64 {
    assert!(a >= 0.0, "similarity must be non-negative");
    if a == 0.0 {
        return f64::INFINITY;
    }
    4.0 / a + s1 + s2
}

/// Risk-optimal two-task similarity `2 / delta^2`; infinite for coincident
/// means.
pub fn optimal_a_two_task(delta: f64) -> f64 {
    if delta == 0.0 {
        return f64::INFINITY;
    }
    2.0 / (delta * delta)
}

/// Risk-optimal constant similarity for `T >= 2` tasks:
/// `2 / mean squared pairwise difference of the true means`. All-equal means
/// give the infinite-similarity signal.
pub fn optimal_a_constant(mu: &DVector<f64>) -> Result<f64> {
    if mu.len() < 2 {
        return Err(MtaError::InvalidConfig(
            "optimal constant similarity needs at least two tasks".into(),
        ));
    }
    let values: Vec<f64> = mu.iter().copied().collect();
    let msd = mean_squared_pairwise_diff(&values);
    if msd == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(2.0 / msd)
}
