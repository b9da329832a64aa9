//! Mean estimators: single-task and pooled baselines, the James-Stein
//! family, the joint graph-regularized estimators (general, constant,
//! minimax, oracle similarity), and the rank-one regularizer forms that
//! express convex shrinkage toward the pooled mean or the average of means.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{MtaError, Result};
use crate::graph::{build_laplacian, mta_apply_fast, mta_weights_dense, MeanCovariance, SimilarityMatrix};
use crate::util::mean_squared_pairwise_diff;

/// Variances at or below this floor are considered degenerate and fall back
/// to the pooled variance (or to the floor itself).
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Oracle similarity entries are capped here when two true means coincide.
pub const ORACLE_SIMILARITY_CAP: f64 = 1e12;

/// How task variances are estimated: one unbiased estimate per task, or a
/// single pooled estimate shared by all tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceMode {
    PerTask,
    Pooled,
}

impl VarianceMode {
    pub fn label(self) -> &'static str {
        match self {
            VarianceMode::PerTask => "per-task",
            VarianceMode::Pooled => "pooled",
        }
    }
}

impl std::str::FromStr for VarianceMode {
    type Err = MtaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-task" => Ok(VarianceMode::PerTask),
            "pooled" => Ok(VarianceMode::Pooled),
            other => Err(MtaError::InvalidConfig(format!(
                "unknown variance mode {other:?} (expected per-task or pooled)"
            ))),
        }
    }
}

/// Raw samples for one task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSamples {
    id: String,
    values: Vec<f64>,
}

impl TaskSamples {
    pub fn new(id: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if values.is_empty() {
            return Err(MtaError::EmptyTask { id });
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(MtaError::NonFiniteSample { id, index: i });
            }
        }
        Ok(Self { id, values })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false // non-empty by construction
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Sufficient statistics per task: sample means, variances (post-floor),
/// and counts. `variance_fallbacks` records which tasks had a degenerate
/// variance replaced by the pooled estimate or the floor.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSummary {
    means: DVector<f64>,
    variances: DVector<f64>,
    counts: Vec<u64>,
    mode: VarianceMode,
    variance_fallbacks: Vec<usize>,
}

impl TaskSummary {
    pub fn new(
        means: Vec<f64>,
        variances: Vec<f64>,
        counts: Vec<u64>,
        mode: VarianceMode,
    ) -> Result<Self> {
        let t = means.len();
        if t == 0 {
            return Err(MtaError::EmptyTasks);
        }
        if variances.len() != t || counts.len() != t {
            return Err(MtaError::DimensionMismatch {
                what: "task summary vectors",
                expected: t,
                got: variances.len().min(counts.len()),
            });
        }
        for (i, m) in means.iter().enumerate() {
            if !m.is_finite() {
                return Err(MtaError::InvalidConfig(format!(
                    "summary mean {i} is not finite"
                )));
            }
        }
        for (i, v) in variances.iter().enumerate() {
            if !v.is_finite() || *v <= 0.0 {
                return Err(MtaError::InvalidCovariance {
                    index: i,
                    value: *v,
                });
            }
        }
        if counts.iter().any(|&n| n == 0) {
            return Err(MtaError::InvalidConfig("summary counts must be >= 1".into()));
        }
        if mode == VarianceMode::Pooled {
            let first = variances[0];
            if variances.iter().any(|&v| v != first) {
                return Err(MtaError::InvalidConfig(
                    "pooled-mode summaries must carry one shared variance".into(),
                ));
            }
        }
        Ok(Self {
            means: DVector::from_vec(means),
            variances: DVector::from_vec(variances),
            counts,
            mode,
            variance_fallbacks: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        false // at least one task by construction
    }

    pub fn means(&self) -> &DVector<f64> {
        &self.means
    }

    pub fn variances(&self) -> &DVector<f64> {
        &self.variances
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn mode(&self) -> VarianceMode {
        self.mode
    }

    pub fn variance_fallbacks(&self) -> &[usize] {
        &self.variance_fallbacks
    }

    /// Diagonal covariance of the sample means, entry `variance_t / count_t`.
    pub fn mean_covariance(&self) -> MeanCovariance {
        let diag = DVector::from_fn(self.len(), |i, _| self.variances[i] / self.counts[i] as f64);
        MeanCovariance::new(diag).expect("summary variances are validated positive")
    }

    /// Unweighted average of the task sample means.
    pub fn grand_mean(&self) -> f64 {
        self.means.iter().sum::<f64>() / self.len() as f64
    }
}

/// A length-T estimate tagged with the estimator that produced it and its
/// parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateVector {
    values: DVector<f64>,
    estimator_id: String,
    params: BTreeMap<String, f64>,
}

impl EstimateVector {
    pub fn new(
        values: DVector<f64>,
        estimator_id: impl Into<String>,
        params: BTreeMap<String, f64>,
    ) -> Self {
        Self {
            values,
            estimator_id: estimator_id.into(),
            params,
        }
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn estimator_id(&self) -> &str {
        &self.estimator_id
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.estimator_id = id.into();
        self
    }

    pub fn with_param(mut self, key: impl Into<String>, value: f64) -> Self {
        self.params.insert(key.into(), value);
        self
    }
}

fn params(entries: &[(&str, f64)]) -> BTreeMap<String, f64> {
    entries
        .iter()
        .map(|(k, v)| (k.to_string(), *v))
        .collect()
}

/// Computes the sufficient statistics for a batch of tasks.
///
/// Per-task variances are unbiased (divide by `N - 1`); a task whose variance
/// is degenerate (below the floor, or a single sample) falls back to the
/// pooled variance, and to the floor itself when the pooled estimate is also
/// degenerate. Pooled mode assigns every task the single pooled unbiased
/// variance computed from all deviations from each task's own mean.
pub fn summarize(tasks: &[TaskSamples], mode: VarianceMode) -> Result<TaskSummary> {
    if tasks.is_empty() {
        return Err(MtaError::EmptyTasks);
    }
    let t = tasks.len();
    let means: Vec<f64> = tasks.iter().map(TaskSamples::mean).collect();
    let counts: Vec<u64> = tasks.iter().map(|s| s.len() as u64).collect();

    let mut pooled_ss = 0.0;
    let mut pooled_df = 0u64;
    for (task, mean) in tasks.iter().zip(&means) {
        for v in task.values() {
            let d = v - mean;
            pooled_ss += d * d;
        }
        pooled_df += task.len() as u64 - 1;
    }
    let pooled_raw = if pooled_df > 0 {
        pooled_ss / pooled_df as f64
    } else {
        0.0
    };
    let pooled = if pooled_raw >= VARIANCE_FLOOR {
        pooled_raw
    } else {
        VARIANCE_FLOOR
    };

    let mut fallbacks = Vec::new();
    let variances: Vec<f64> = match mode {
        VarianceMode::Pooled => {
            if pooled_raw < VARIANCE_FLOOR {
                fallbacks.extend(0..t);
            }
            vec![pooled; t]
        }
        VarianceMode::PerTask => tasks
            .iter()
            .zip(&means)
            .enumerate()
            .map(|(i, (task, mean))| {
                let n = task.len();
                let raw = if n >= 2 {
                    let ss: f64 = task.values().iter().map(|v| (v - mean) * (v - mean)).sum();
                    ss / (n - 1) as f64
                } else {
                    0.0
                };
                if raw >= VARIANCE_FLOOR {
                    raw
                } else {
                    fallbacks.push(i);
                    pooled
                }
            })
            .collect(),
    };

    let mut summary = TaskSummary::new(means, variances, counts, mode)?;
    summary.variance_fallbacks = fallbacks;
    Ok(summary)
}

/// The sample means, unchanged.
pub fn single_task(summary: &TaskSummary) -> EstimateVector {
    EstimateVector::new(summary.means().clone(), "single-task", BTreeMap::new())
}

/// One constant pooled mean for all tasks: `sum_ti y_ti / sum_t N_t`.
pub fn one_task_pooled(tasks: &[TaskSamples]) -> Result<EstimateVector> {
    if tasks.is_empty() {
        return Err(MtaError::EmptyTasks);
    }
    let total: f64 = tasks.iter().map(|t| t.values().iter().sum::<f64>()).sum();
    let count: usize = tasks.iter().map(TaskSamples::len).sum();
    let pooled = total / count as f64;
    Ok(EstimateVector::new(
        DVector::from_element(tasks.len(), pooled),
        "one-task",
        BTreeMap::new(),
    ))
}

/// The closed-form joint estimate `W ybar` with
/// `W = (I + (gamma/T) Sigma L(sym(A)))^{-1}`.
pub fn mta_general(
    summary: &TaskSummary,
    similarity: &SimilarityMatrix,
    gamma: f64,
) -> Result<EstimateVector> {
    if similarity.size() != summary.len() {
        return Err(MtaError::DimensionMismatch {
            what: "similarity matrix vs summary",
            expected: summary.len(),
            got: similarity.size(),
        });
    }
    let weights = mta_weights_dense(
        &summary.mean_covariance(),
        &build_laplacian(similarity),
        gamma,
    )?;
    let values = weights.apply(summary.means())?;
    Ok(EstimateVector::new(
        values,
        "mta-general",
        params(&[("gamma", gamma)]),
    ))
}

fn grand_mean_estimate(summary: &TaskSummary, id: &str, p: BTreeMap<String, f64>) -> EstimateVector {
    EstimateVector::new(
        DVector::from_element(summary.len(), summary.grand_mean()),
        id,
        p,
    )
}

/// Constant-similarity joint estimate: the similarity scale is estimated
/// from the data as `a = 2 / mean squared pairwise difference of the sample
/// means`, then applied through the O(T) fast path.
///
/// All-equal sample means are the infinite-similarity limit and return the
/// grand mean in every coordinate; `gamma = 0` returns the sample means
/// unchanged.
pub fn constant_mta(summary: &TaskSummary, gamma: f64) -> Result<EstimateVector> {
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(MtaError::InvalidArgument {
            what: "gamma (must be finite and non-negative)",
            value: gamma,
        });
    }
    let t = summary.len();
    let base = params(&[("gamma", gamma)]);
    if t == 1 || gamma == 0.0 {
        return Ok(EstimateVector::new(summary.means().clone(), "constant-mta", base));
    }
    let means: Vec<f64> = summary.means().iter().copied().collect();
    let msd = mean_squared_pairwise_diff(&means);
    let scale_ref = summary.means().dot(summary.means()).max(1.0);
    if msd < VARIANCE_FLOOR * scale_ref {
        return Ok(grand_mean_estimate(summary, "constant-mta", base));
    }
    let a_hat = 2.0 / msd;
    let scale = gamma * a_hat / t as f64;
    let values = mta_apply_fast(&summary.mean_covariance(), scale, summary.means())?;
    Ok(EstimateVector::new(
        values,
        "constant-mta",
        params(&[("gamma", gamma), ("a_hat", a_hat)]),
    ))
}

/// Minimax joint estimate: similarity scale `2 / (b_u - b_l)^2` from the
/// maximum-likelihood interval endpoints of the sample means, applied
/// through the O(T) fast path. A degenerate interval (`b_u = b_l`) returns
/// the grand mean; `gamma = 0` returns the sample means unchanged.
pub fn minimax_mta(summary: &TaskSummary, gamma: f64) -> Result<EstimateVector> {
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(MtaError::InvalidArgument {
            what: "gamma (must be finite and non-negative)",
            value: gamma,
        });
    }
    let t = summary.len();
    let base = params(&[("gamma", gamma)]);
    if t == 1 || gamma == 0.0 {
        return Ok(EstimateVector::new(summary.means().clone(), "minimax-mta", base));
    }
    let lower = summary.means().min();
    let upper = summary.means().max();
    let p = params(&[("gamma", gamma), ("b_lower", lower), ("b_upper", upper)]);
    let spread_sq = (upper - lower) * (upper - lower);
    if spread_sq == 0.0 {
        return Ok(grand_mean_estimate(summary, "minimax-mta", p));
    }
    let scale = 2.0 * gamma / (t as f64 * spread_sq);
    if !scale.is_finite() {
        return Ok(grand_mean_estimate(summary, "minimax-mta", p));
    }
    let values = mta_apply_fast(&summary.mean_covariance(), scale, summary.means())?;
    Ok(EstimateVector::new(values, "minimax-mta", p))
}

/// Joint estimate using the oracle pairwise similarity
/// `A_rs = 2 / (mu_r - mu_s)^2` built from supplied true means (simulation
/// use only). Entries for coincident means are capped at
/// [`ORACLE_SIMILARITY_CAP`].
pub fn oracle_mta(
    summary: &TaskSummary,
    true_means: &DVector<f64>,
    gamma: f64,
) -> Result<EstimateVector> {
    let t = summary.len();
    if true_means.len() != t {
        return Err(MtaError::DimensionMismatch {
            what: "oracle true means",
            expected: t,
            got: true_means.len(),
        });
    }
    let entries = DMatrix::from_fn(t, t, |r, s| {
        if r == s {
            return 0.0;
        }
        let d = true_means[r] - true_means[s];
        let dsq = d * d;
        if dsq == 0.0 {
            ORACLE_SIMILARITY_CAP
        } else {
            (2.0 / dsq).min(ORACLE_SIMILARITY_CAP)
        }
    });
    let similarity = SimilarityMatrix::new(entries)?;
    Ok(mta_general(summary, &similarity, gamma)?
        .with_id("oracle-mta")
        .with_param("gamma", gamma))
}

/// Bock-style positive-part James-Stein estimate with the actual dimension
/// `T` in place of the effective dimension, shrinking toward the average of
/// the sample means. For `T <= 3` there are no shrinkage degrees of freedom
/// and the sample means are returned unchanged.
pub fn james_stein(summary: &TaskSummary) -> EstimateVector {
    let t = summary.len();
    if t <= 3 {
        return EstimateVector::new(summary.means().clone(), "js", BTreeMap::new());
    }
    let center = summary.grand_mean();
    let cov = summary.mean_covariance();
    let mut quad = 0.0;
    for i in 0..t {
        let d = summary.means()[i] - center;
        quad += d * d / cov.diagonal()[i];
    }
    if quad == 0.0 {
        return EstimateVector::new(
            DVector::from_element(t, center),
            "js",
            params(&[("shrinkage", 1.0)]),
        );
    }
    let factor = (1.0 - (t as f64 - 3.0) / quad).max(0.0);
    let values = DVector::from_fn(t, |i, _| center + factor * (summary.means()[i] - center));
    EstimateVector::new(values, "js", params(&[("shrinkage", 1.0 - factor)]))
}

/// Convex regularization of each sample mean toward the average of means:
/// `lambda * ybar_t + (1 - lambda) * grand mean`.
pub fn js_convex(summary: &TaskSummary, lambda: f64) -> Result<EstimateVector> {
    check_lambda(lambda)?;
    let center = summary.grand_mean();
    let values = DVector::from_fn(summary.len(), |i, _| {
        lambda * summary.means()[i] + (1.0 - lambda) * center
    });
    Ok(EstimateVector::new(
        values,
        "js-convex",
        params(&[("lambda", lambda)]),
    ))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !lambda.is_finite() || lambda <= 0.0 || lambda > 1.0 {
        return Err(MtaError::LambdaOutOfRange { value: lambda });
    }
    Ok(())
}

/// Dense solve of `(I + scale * L(1 w^T)) x = ybar` where `L(1 w^T)` is the
/// asymmetric rank-one Laplacian `(sum w) I - 1 w^T`. No symmetrization.
fn solve_rank_one_form(
    scale: f64,
    col_weights: &DVector<f64>,
    ybar: &DVector<f64>,
) -> Result<DVector<f64>> {
    let t = ybar.len();
    if col_weights.len() != t {
        return Err(MtaError::DimensionMismatch {
            what: "rank-one form weights",
            expected: t,
            got: col_weights.len(),
        });
    }
    let weight_sum: f64 = col_weights.iter().sum();
    let mut system = DMatrix::from_fn(t, t, |_, c| -scale * col_weights[c]);
    for i in 0..t {
        system[(i, i)] += 1.0 + scale * weight_sum;
    }
    system
        .lu()
        .solve(ybar)
        .ok_or_else(|| MtaError::Internal("rank-one form solve failed".into()))
}

fn check_route_agreement(
    matrix: &DVector<f64>,
    direct: &DVector<f64>,
    tol: f64,
    what: &str,
) -> Result<()> {
    for i in 0..direct.len() {
        let diff = (matrix[i] - direct[i]).abs();
        if diff > tol * direct[i].abs().max(1.0) {
            return Err(MtaError::Internal(format!(
                "{what}: matrix and direct routes disagree at {i} by {diff}"
            )));
        }
    }
    Ok(())
}

/// Both routes to the pooled-mean regularizer: the matrix form
/// `(I + ((1-lambda)/(lambda N^T 1)) L(1 N^T))^{-1} ybar` (asymmetric
/// rank-one Laplacian, dense solve) and the direct convex form
/// `lambda ybar_t + (1-lambda) * count-weighted pooled mean`.
pub fn pooled_mean_routes(
    summary: &TaskSummary,
    lambda: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    check_lambda(lambda)?;
    let counts = DVector::from_fn(summary.len(), |i, _| summary.counts()[i] as f64);
    let count_sum: f64 = counts.iter().sum();
    let scale = (1.0 - lambda) / (lambda * count_sum);
    let matrix = solve_rank_one_form(scale, &counts, summary.means())?;

    let pooled = counts.dot(summary.means()) / count_sum;
    let direct = DVector::from_fn(summary.len(), |i, _| {
        lambda * summary.means()[i] + (1.0 - lambda) * pooled
    });
    Ok((matrix, direct))
}

/// Regularizes each sample mean toward the count-weighted pooled mean,
/// verifying the matrix route against the direct convex form.
pub fn pooled_mean_mta_form(summary: &TaskSummary, lambda: f64) -> Result<EstimateVector> {
    let (matrix, direct) = pooled_mean_routes(summary, lambda)?;
    check_route_agreement(&matrix, &direct, 1e-12, "pooled-mean form")?;
    Ok(EstimateVector::new(
        direct,
        "pooled-mean-mta-form",
        params(&[("lambda", lambda)]),
    ))
}

/// Both routes to the average-of-means regularizer: the matrix form
/// `(I + ((1-lambda)/(lambda T)) L(1 1^T))^{-1} ybar` (dense solve) and the
/// direct convex form `lambda ybar_t + (1-lambda) * grand mean`.
pub fn average_of_means_routes(
    summary: &TaskSummary,
    lambda: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    check_lambda(lambda)?;
    let t = summary.len();
    let ones = DVector::from_element(t, 1.0);
    let scale = (1.0 - lambda) / (lambda * t as f64);
    let matrix = solve_rank_one_form(scale, &ones, summary.means())?;

    let center = summary.grand_mean();
    let direct = DVector::from_fn(t, |i, _| lambda * summary.means()[i] + (1.0 - lambda) * center);
    Ok((matrix, direct))
}

/// Regularizes each sample mean toward the unweighted average of means,
/// verifying the matrix route against the direct convex form.
pub fn average_of_means_mta_form(summary: &TaskSummary, lambda: f64) -> Result<EstimateVector> {
    let (matrix, direct) = average_of_means_routes(summary, lambda)?;
    check_route_agreement(&matrix, &direct, 1e-12, "average-of-means form")?;
    Ok(EstimateVector::new(
        direct,
        "average-of-means-mta-form",
        params(&[("lambda", lambda)]),
    ))
}

/// Both routes to the general rank-one regularizer form: the matrix form
/// `(I + gamma L(1 alpha^T))^{-1} ybar` (asymmetric Laplacian, dense solve)
/// and the explicit convex form `(1/gamma) ybar_t + sum_r alpha_r ybar_r`.
///
/// Requires `1/gamma` in `(0, 1]`, non-negative `alpha`, and
/// `sum alpha = 1 - 1/gamma`.
pub fn alpha_form_routes(
    gamma: f64,
    alpha: &DVector<f64>,
    ybar: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if !gamma.is_finite() || gamma < 1.0 {
        return Err(MtaError::ConstraintViolation {
            constraint: "1/gamma must lie in (0, 1]",
            detail: format!("gamma = {gamma}"),
        });
    }
    if alpha.len() != ybar.len() {
        return Err(MtaError::DimensionMismatch {
            what: "alpha vector",
            expected: ybar.len(),
            got: alpha.len(),
        });
    }
    if let Some((i, &v)) = alpha.iter().enumerate().find(|(_, v)| **v < 0.0 || !v.is_finite()) {
        return Err(MtaError::ConstraintViolation {
            constraint: "alpha entries must be finite and non-negative",
            detail: format!("alpha[{i}] = {v}"),
        });
    }
    let alpha_sum: f64 = alpha.iter().sum();
    let required = 1.0 - 1.0 / gamma;
    if (alpha_sum - required).abs() > 1e-10 {
        return Err(MtaError::ConstraintViolation {
            constraint: "sum of alpha must equal 1 - 1/gamma",
            detail: format!("sum = {alpha_sum}, required = {required}"),
        });
    }

    let matrix = solve_rank_one_form(gamma, alpha, ybar)?;
    let pulled = alpha.dot(ybar);
    let explicit = DVector::from_fn(ybar.len(), |i, _| ybar[i] / gamma + pulled);
    Ok((matrix, explicit))
}

/// Evaluates the rank-one regularizer form, verifying the matrix route
/// against the explicit convex form and returning the matrix-route result.
pub fn mta_form_from_alpha(
    gamma: f64,
    alpha: &DVector<f64>,
    ybar: &DVector<f64>,
) -> Result<DVector<f64>> {
    let (matrix, explicit) = alpha_form_routes(gamma, alpha, ybar)?;
    check_route_agreement(&matrix, &explicit, 1e-10, "alpha form")?;
    Ok(matrix)
}
