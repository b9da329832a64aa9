//! Hierarchical world generators, the replicate engine that compares
//! estimators by paired percent change in risk, and the 50% holdout
//! evaluation protocol for real per-task data.
//!
//! Replicates are embarrassingly parallel. Every random stream is keyed by
//! `(seed, replicate, task)`, and per-replicate results are reduced in
//! replicate order with compensated summation, so output is bit-identical
//! for any worker count. The `MTA_THREADS` environment variable caps
//! parallelism without affecting results.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, Uniform};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{MtaError, Result};
use crate::estimators::{summarize, TaskSamples, VarianceMode};
use crate::graph::SimilarityMatrix;
use crate::registry::{run_estimator, EstimateContext, Estimator};
use crate::select::CvConfig;
use crate::util::{mix_seed, substream, KahanSum};

const CV_SEED_SALT: u64 = 0xC5;

/// Which hierarchical world generator to draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorldFamily {
    Gaussian,
    Uniform,
}

impl WorldFamily {
    pub fn label(self) -> &'static str {
        match self {
            WorldFamily::Gaussian => "gaussian",
            WorldFamily::Uniform => "uniform",
        }
    }
}

impl std::str::FromStr for WorldFamily {
    type Err = MtaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(WorldFamily::Gaussian),
            "uniform" => Ok(WorldFamily::Uniform),
            other => Err(MtaError::InvalidConfig(format!(
                "unknown world family {other:?} (expected gaussian or uniform)"
            ))),
        }
    }
}

/// Parameters of a hierarchical simulation study.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub tasks: usize,
    pub sigma_mu_sq: f64,
    pub family: WorldFamily,
    /// Inclusive range for the per-task sample count.
    pub n_range: (u64, u64),
    pub replicates: usize,
    pub seed: u64,
}

impl WorldConfig {
    pub fn new(tasks: usize, sigma_mu_sq: f64, family: WorldFamily, replicates: usize, seed: u64) -> Self {
        Self {
            tasks,
            sigma_mu_sq,
            family,
            n_range: (2, 100),
            replicates,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tasks == 0 {
            return Err(MtaError::InvalidConfig("task count must be >= 1".into()));
        }
        if !(self.sigma_mu_sq > 0.0) || !self.sigma_mu_sq.is_finite() {
            return Err(MtaError::InvalidConfig(
                "mean-distribution variance must be positive and finite".into(),
            ));
        }
        if self.n_range.0 < 1 || self.n_range.0 > self.n_range.1 {
            return Err(MtaError::InvalidConfig(
                "sample-count range must satisfy 1 <= lo <= hi".into(),
            ));
        }
        if self.replicates == 0 {
            return Err(MtaError::InvalidConfig("replicates must be >= 1".into()));
        }
        Ok(())
    }
}

/// One drawn world: true per-task parameters plus the sampled data.
#[derive(Debug, Clone)]
pub struct World {
    pub true_means: Vec<f64>,
    pub true_variances: Vec<f64>,
    pub tasks: Vec<TaskSamples>,
}

/// Draws one replicate world. Deterministic in `(cfg.seed, replicate)`;
/// each task consumes its own `(seed, replicate, task)` stream.
///
/// Gaussian family: `mu ~ N(0, sigma_mu_sq)`,
/// `sigma^2 ~ Gamma(shape 0.9, scale 1.0) + 0.1`, `N ~ uniform{lo..hi}`,
/// samples `~ N(mu, sigma^2)`. Uniform family: `mu` uniform with mean 0 and
/// variance `sigma_mu_sq`, `sigma^2 ~ U(0.1, 2.0)`, samples uniform on
/// `mu +- sqrt(3 sigma^2)`.
pub fn draw_world(cfg: &WorldConfig, replicate: u64) -> World {
    let mut true_means = Vec::with_capacity(cfg.tasks);
    let mut true_variances = Vec::with_capacity(cfg.tasks);
    let mut tasks = Vec::with_capacity(cfg.tasks);
    for t in 0..cfg.tasks {
        let mut rng = substream(cfg.seed, &[replicate, t as u64]);
        let (mu, var, values): (f64, f64, Vec<f64>) = match cfg.family {
            WorldFamily::Gaussian => {
                let mu = Normal::new(0.0, cfg.sigma_mu_sq.sqrt()).unwrap().sample(&mut rng);
                let var: f64 = Gamma::new(0.9, 1.0).unwrap().sample(&mut rng) + 0.1;
                let n = rng.random_range(cfg.n_range.0..=cfg.n_range.1) as usize;
                let noise = Normal::new(mu, var.sqrt()).unwrap();
                let values: Vec<f64> = (0..n).map(|_| noise.sample(&mut rng)).collect();
                (mu, var, values)
            }
            WorldFamily::Uniform => {
                let mean_half = (3.0 * cfg.sigma_mu_sq).sqrt();
                let mu = Uniform::new_inclusive(-mean_half, mean_half)
                    .unwrap()
                    .sample(&mut rng);
                let var: f64 = Uniform::new(0.1, 2.0).unwrap().sample(&mut rng);
                let n = rng.random_range(cfg.n_range.0..=cfg.n_range.1) as usize;
                let half = (3.0 * var).sqrt();
                let noise = Uniform::new_inclusive(mu - half, mu + half).unwrap();
                let values: Vec<f64> = (0..n).map(|_| noise.sample(&mut rng)).collect();
                (mu, var, values)
            }
        };
        true_means.push(mu);
        true_variances.push(var);
        tasks.push(TaskSamples::new(format!("task{t}"), values).expect("drawn samples are finite"));
    }
    World {
        true_means,
        true_variances,
        tasks,
    }
}

/// One estimator's row of a risk report.
#[derive(Debug, Clone, Serialize)]
pub struct RiskRow {
    pub estimator: String,
    /// Mean per-replicate risk `sum_t (estimate_t - mu_t)^2 / T`.
    pub risk: f64,
    /// `100 * (risk - single-task risk) / single-task risk`, paired over the
    /// same replicates.
    pub pct_change: f64,
    /// Monte-Carlo standard error of the percent change, from the paired
    /// per-replicate risk differences.
    pub stderr: f64,
}

/// Paired per-replicate risks for one estimator, suitable for rank-based
/// significance testing downstream.
#[derive(Debug, Clone, Serialize)]
pub struct PerDrawRisks {
    pub estimator: String,
    pub risks: Vec<f64>,
}

/// Risk comparison across estimators over common replicates.
#[derive(Debug, Clone, Serialize)]
pub struct RiskReport {
    pub replicates: usize,
    pub rows: Vec<RiskRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_draw: Option<Vec<PerDrawRisks>>,
}

impl RiskReport {
    pub fn row(&self, estimator: &str) -> Option<&RiskRow> {
        self.rows.iter().find(|r| r.estimator == estimator)
    }
}

/// Runs `f` under a worker pool capped by the `MTA_THREADS` environment
/// variable (if set and parsable); otherwise the default pool.
fn with_pool<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    let cap = std::env::var("MTA_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1);
    match cap {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

/// Arranges the estimator list with single-task first (the pairing
/// baseline), deduplicated, preserving the requested order otherwise.
fn arrange_estimators(kinds: &[Estimator]) -> Result<Vec<Estimator>> {
    if kinds.is_empty() {
        return Err(MtaError::InvalidConfig("no estimators requested".into()));
    }
    let mut arranged = vec![Estimator::SingleTask];
    for &k in kinds {
        if !arranged.contains(&k) {
            arranged.push(k);
        }
    }
    Ok(arranged)
}

fn mean_task_risk(estimate: &nalgebra::DVector<f64>, truth: &[f64]) -> f64 {
    let t = truth.len();
    let mut acc = 0.0;
    for i in 0..t {
        let d = estimate[i] - truth[i];
        acc += d * d;
    }
    acc / t as f64
}

/// Reduces per-replicate risks (replicate-major) into a paired report.
fn build_report(
    kinds: &[Estimator],
    per_replicate: Vec<Vec<f64>>,
    keep_per_draw: bool,
) -> RiskReport {
    let replicates = per_replicate.len();
    let n_est = kinds.len();

    let mut means = vec![0.0; n_est];
    for (e, mean) in means.iter_mut().enumerate() {
        let mut acc = KahanSum::default();
        for risks in &per_replicate {
            acc.add(risks[e]);
        }
        *mean = acc.value() / replicates as f64;
    }

    let single_mean = means[0];
    let mut rows = Vec::with_capacity(n_est);
    for (e, &kind) in kinds.iter().enumerate() {
        let mut diff_acc = KahanSum::default();
        for risks in &per_replicate {
            diff_acc.add(risks[e] - risks[0]);
        }
        let diff_mean = diff_acc.value() / replicates as f64;
        let mut var_acc = KahanSum::default();
        for risks in &per_replicate {
            let d = (risks[e] - risks[0]) - diff_mean;
            var_acc.add(d * d);
        }
        let diff_sd = if replicates >= 2 {
            (var_acc.value() / (replicates - 1) as f64).sqrt()
        } else {
            0.0
        };

        let (pct_change, stderr) = if e == 0 {
            (0.0, 0.0)
        } else if single_mean > 0.0 {
            (
                100.0 * (means[e] - single_mean) / single_mean,
                100.0 * diff_sd / (replicates as f64).sqrt() / single_mean,
            )
        } else if means[e] == single_mean {
            (0.0, 0.0)
        } else {
            (f64::INFINITY, f64::INFINITY)
        };

        rows.push(RiskRow {
            estimator: kind.label().to_string(),
            risk: means[e],
            pct_change,
            stderr,
        });
    }

    let per_draw = keep_per_draw.then(|| {
        kinds
            .iter()
            .enumerate()
            .map(|(e, kind)| PerDrawRisks {
                estimator: kind.label().to_string(),
                risks: per_replicate.iter().map(|r| r[e]).collect(),
            })
            .collect()
    });

    RiskReport {
        replicates,
        rows,
        per_draw,
    }
}

fn replicate_cv(base: &CvConfig, replicate: u64) -> CvConfig {
    CvConfig {
        seed: mix_seed(base.seed, &[replicate, CV_SEED_SALT]),
        ..base.clone()
    }
}

/// Runs a hierarchical study: draws `cfg.replicates` worlds, evaluates every
/// requested estimator on each (per-task unbiased variances), and reports
/// the paired percent change in risk versus single-task.
pub fn run_study(
    cfg: &WorldConfig,
    kinds: &[Estimator],
    cv: Option<&CvConfig>,
) -> Result<RiskReport> {
    cfg.validate()?;
    let arranged = arrange_estimators(kinds)?;
    if arranged.contains(&Estimator::ExpertMta) {
        return Err(MtaError::InvalidConfig(
            "expert-mta needs a similarity matrix; hierarchical studies have none".into(),
        ));
    }
    let base_cv = cv
        .cloned()
        .unwrap_or_else(|| CvConfig::new(mix_seed(cfg.seed, &[CV_SEED_SALT])));
    base_cv.validate()?;

    let per_replicate: Vec<Vec<f64>> = with_pool(|| {
        (0..cfg.replicates as u64)
            .into_par_iter()
            .map(|r| -> Result<Vec<f64>> {
                let world = draw_world(cfg, r);
                let summary = summarize(&world.tasks, VarianceMode::PerTask)?;
                let truth = nalgebra::DVector::from_column_slice(&world.true_means);
                let cv_r = replicate_cv(&base_cv, r);
                let ctx = EstimateContext {
                    gamma: 1.0,
                    variance_mode: VarianceMode::PerTask,
                    similarity: None,
                    true_means: Some(&truth),
                    cv: Some(&cv_r),
                };
                arranged
                    .iter()
                    .map(|&kind| {
                        let est = run_estimator(kind, &world.tasks, &summary, &ctx)?;
                        Ok(mean_task_risk(est.values(), &world.true_means))
                    })
                    .collect()
            })
            .collect::<Result<_>>()
    })?;

    Ok(build_report(&arranged, per_replicate, false))
}

/// A fixed-design study: true means, variances, the per-task sample count,
/// and the off-diagonal similarity are all held fixed across replicates
/// (only the samples are redrawn).
#[derive(Debug, Clone, PartialEq)]
pub struct FixedDesignConfig {
    pub mu: Vec<f64>,
    pub sigma_sq: Vec<f64>,
    pub samples_per_task: u64,
    /// Off-diagonal entry of the fixed similarity matrix.
    pub similarity: f64,
    pub gamma: f64,
    pub replicates: usize,
    pub seed: u64,
}

impl FixedDesignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mu.is_empty() {
            return Err(MtaError::InvalidConfig("fixed design needs at least one task".into()));
        }
        if self.sigma_sq.len() != self.mu.len() {
            return Err(MtaError::InvalidConfig(
                "fixed design mean and variance lists must have equal length".into(),
            ));
        }
        if self.sigma_sq.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(MtaError::InvalidConfig(
                "fixed design variances must be positive and finite".into(),
            ));
        }
        if self.samples_per_task < 1 {
            return Err(MtaError::InvalidConfig("fixed design needs N >= 1".into()));
        }
        if !(self.similarity >= 0.0) || !self.similarity.is_finite() {
            return Err(MtaError::InvalidConfig(
                "fixed design similarity must be non-negative and finite".into(),
            ));
        }
        if self.replicates == 0 {
            return Err(MtaError::InvalidConfig("replicates must be >= 1".into()));
        }
        Ok(())
    }
}

/// Runs a fixed-design study, reporting paired percent change in risk versus
/// single-task. `expert-mta` evaluates the joint estimator with the fixed
/// similarity matrix.
pub fn run_fixed_study(cfg: &FixedDesignConfig, kinds: &[Estimator]) -> Result<RiskReport> {
    cfg.validate()?;
    let arranged = arrange_estimators(kinds)?;
    let t = cfg.mu.len();
    let similarity = SimilarityMatrix::new(nalgebra::DMatrix::from_fn(t, t, |r, c| {
        if r == c {
            0.0
        } else {
            cfg.similarity
        }
    }))?;
    let truth = nalgebra::DVector::from_column_slice(&cfg.mu);
    let base_cv = CvConfig::new(mix_seed(cfg.seed, &[CV_SEED_SALT]));

    let per_replicate: Vec<Vec<f64>> = with_pool(|| {
        (0..cfg.replicates as u64)
            .into_par_iter()
            .map(|r| -> Result<Vec<f64>> {
                let tasks: Vec<TaskSamples> = (0..t)
                    .map(|i| {
                        let mut rng = substream(cfg.seed, &[r, i as u64]);
                        let noise = Normal::new(cfg.mu[i], cfg.sigma_sq[i].sqrt()).unwrap();
                        let values: Vec<f64> = (0..cfg.samples_per_task)
                            .map(|_| noise.sample(&mut rng))
                            .collect();
                        TaskSamples::new(format!("task{i}"), values)
                    })
                    .collect::<Result<_>>()?;
                let summary = summarize(&tasks, VarianceMode::PerTask)?;
                let cv_r = replicate_cv(&base_cv, r);
                let ctx = EstimateContext {
                    gamma: cfg.gamma,
                    variance_mode: VarianceMode::PerTask,
                    similarity: Some(&similarity),
                    true_means: Some(&truth),
                    cv: Some(&cv_r),
                };
                arranged
                    .iter()
                    .map(|&kind| {
                        let est = run_estimator(kind, &tasks, &summary, &ctx)?;
                        Ok(mean_task_risk(est.values(), &cfg.mu))
                    })
                    .collect()
            })
            .collect::<Result<_>>()
    })?;

    Ok(build_report(&arranged, per_replicate, false))
}

/// Evaluates estimators on real per-task data against the full-sample means:
/// for each draw, estimates are computed from a uniformly random 50% of each
/// task's samples (floor, at least one) and scored against the means of all
/// samples. Emits the paired per-draw risks alongside the summary rows.
pub fn holdout_eval(
    tasks: &[TaskSamples],
    kinds: &[Estimator],
    draws: usize,
    seed: u64,
    variance_mode: VarianceMode,
    cv: Option<&CvConfig>,
) -> Result<RiskReport> {
    if tasks.is_empty() {
        return Err(MtaError::EmptyTasks);
    }
    for task in tasks {
        if task.len() < 2 {
            return Err(MtaError::InsufficientSamples {
                id: task.id().to_string(),
                needed: 2,
                got: task.len(),
            });
        }
    }
    if draws == 0 {
        return Err(MtaError::InvalidConfig("draws must be >= 1".into()));
    }
    let arranged = arrange_estimators(kinds)?;
    if arranged
        .iter()
        .any(|k| matches!(k, Estimator::OracleMta | Estimator::ExpertMta))
    {
        return Err(MtaError::InvalidConfig(
            "holdout evaluation supports only data-driven estimators".into(),
        ));
    }
    let base_cv = cv
        .cloned()
        .unwrap_or_else(|| CvConfig::new(mix_seed(seed, &[CV_SEED_SALT])));
    base_cv.validate()?;

    let full_means: Vec<f64> = tasks.iter().map(TaskSamples::mean).collect();

    let per_draw_risks: Vec<Vec<f64>> = with_pool(|| {
        (0..draws as u64)
            .into_par_iter()
            .map(|d| -> Result<Vec<f64>> {
                let halves: Vec<TaskSamples> = tasks
                    .iter()
                    .enumerate()
                    .map(|(i, task)| {
                        let mut rng = substream(seed, &[d, i as u64]);
                        let n = task.len();
                        let keep = ((n / 2).max(1)).min(n);
                        let chosen = rand::seq::index::sample(&mut rng, n, keep);
                        let values: Vec<f64> =
                            chosen.iter().map(|j| task.values()[j]).collect();
                        TaskSamples::new(task.id(), values)
                    })
                    .collect::<Result<_>>()?;
                let summary = summarize(&halves, variance_mode)?;
                let cv_d = replicate_cv(&base_cv, d);
                let ctx = EstimateContext {
                    gamma: 1.0,
                    variance_mode,
                    similarity: None,
                    true_means: None,
                    cv: Some(&cv_d),
                };
                arranged
                    .iter()
                    .map(|&kind| {
                        let est = run_estimator(kind, &halves, &summary, &ctx)?;
                        Ok(mean_task_risk(est.values(), &full_means))
                    })
                    .collect()
            })
            .collect::<Result<_>>()
    })?;

    Ok(build_report(&arranged, per_draw_risks, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::Normal;

    #[test]
    fn drawn_mean_variance_matches_config() {
        let cfg = WorldConfig::new(1, 0.7, WorldFamily::Gaussian, 1, 424242);
        let draws = 100_000;
        let mut acc = 0.0;
        let mut acc_sq = 0.0;
        for r in 0..draws {
            let w = draw_world(&cfg, r);
            acc += w.true_means[0];
            acc_sq += w.true_means[0] * w.true_means[0];
        }
        let n = draws as f64;
        let var = acc_sq / n - (acc / n) * (acc / n);
        assert!(
            (var - 0.7).abs() <= 0.03 * 0.7,
            "empirical mean-variance {var}"
        );
    }

    #[test]
    fn gaussian_world_respects_bounds() {
        let cfg = WorldConfig::new(8, 1.0, WorldFamily::Gaussian, 1, 7);
        for r in 0..200 {
            let w = draw_world(&cfg, r);
            for (task, &var) in w.tasks.iter().zip(&w.true_variances) {
                assert!(task.len() >= 2 && task.len() <= 100);
                assert!(var > 0.1);
            }
        }
    }

    #[test]
    fn uniform_world_sample_variance_matches_target() {
        let cfg = WorldConfig {
            n_range: (90, 100),
            ..WorldConfig::new(1, 1.0, WorldFamily::Uniform, 1, 99)
        };
        let mut ratio_acc = 0.0;
        let worlds = 1200;
        for r in 0..worlds {
            let w = draw_world(&cfg, r);
            let task = &w.tasks[0];
            let mean = task.mean();
            let ss: f64 = task.values().iter().map(|v| (v - mean) * (v - mean)).sum();
            let var = ss / (task.len() - 1) as f64;
            ratio_acc += var / w.true_variances[0];
        }
        let mean_ratio = ratio_acc / worlds as f64;
        assert!(
            (mean_ratio - 1.0).abs() <= 0.03,
            "mean variance ratio {mean_ratio}"
        );
    }

    #[test]
    fn identical_seeds_reproduce_reports() {
        let cfg = WorldConfig::new(5, 0.5, WorldFamily::Gaussian, 50, 31);
        let kinds = [Estimator::ConstantMta, Estimator::Js];
        let a = run_study(&cfg, &kinds, None).unwrap();
        let b = run_study(&cfg, &kinds, None).unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.risk, rb.risk);
            assert_eq!(ra.pct_change, rb.pct_change);
        }
    }

    #[test]
    fn single_task_has_zero_percent_change() {
        let cfg = WorldConfig::new(3, 1.0, WorldFamily::Uniform, 25, 5);
        let report = run_study(&cfg, &[Estimator::SingleTask], None).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.rows[0].pct_change, 0.0);
        assert_eq!(report.rows[0].stderr, 0.0);
    }

    #[test]
    fn unknown_requirements_are_rejected() {
        let cfg = WorldConfig::new(3, 1.0, WorldFamily::Gaussian, 5, 5);
        assert!(run_study(&cfg, &[Estimator::ExpertMta], None).is_err());
        assert!(run_study(&cfg, &[], None).is_err());
    }

    #[test]
    fn holdout_with_identical_pairs_scores_single_task_zero() {
        let tasks = vec![
            TaskSamples::new("a", vec![2.0, 2.0]).unwrap(),
            TaskSamples::new("b", vec![5.0, 5.0]).unwrap(),
        ];
        let report = holdout_eval(
            &tasks,
            &[Estimator::OneTask, Estimator::ConstantMta],
            1,
            3,
            VarianceMode::PerTask,
            None,
        )
        .unwrap();
        assert_eq!(report.row("single-task").unwrap().risk, 0.0);
        // The pooled constant is (2+5)/2 per coordinate: risk (1.5^2+1.5^2)/2.
        let one_task = report.row("one-task").unwrap();
        assert!((one_task.risk - 2.25).abs() < 1e-12);
        assert!(report.per_draw.is_some());
    }

    #[test]
    fn holdout_rejects_undersized_tasks() {
        let tasks = vec![TaskSamples::new("a", vec![1.0]).unwrap()];
        assert!(holdout_eval(
            &tasks,
            &[Estimator::Js],
            4,
            1,
            VarianceMode::PerTask,
            None
        )
        .is_err());
    }

    #[test]
    fn clustered_tasks_favor_joint_estimation() {
        let mut rng = substream(2030, &[77]);
        let mean_noise = Normal::new(0.0, 0.1).unwrap();
        let tasks: Vec<TaskSamples> = (0..50)
            .map(|i| {
                let mu = mean_noise.sample(&mut rng);
                let noise = Normal::new(mu, 1.0).unwrap();
                let values: Vec<f64> = (0..10).map(|_| noise.sample(&mut rng)).collect();
                TaskSamples::new(format!("t{i}"), values).unwrap()
            })
            .collect();
        let report = holdout_eval(
            &tasks,
            &[Estimator::ConstantMta],
            1000,
            11,
            VarianceMode::PerTask,
            None,
        )
        .unwrap();
        let row = report.row("constant-mta").unwrap();
        assert!(row.pct_change < 0.0, "pct change {}", row.pct_change);
    }

    #[test]
    fn separated_tasks_punish_pooling() {
        let mut rng = substream(2031, &[78]);
        let tasks: Vec<TaskSamples> = (0..10)
            .map(|i| {
                let mu = i as f64 * 10.0;
                let noise = Normal::new(mu, 1.0).unwrap();
                let values: Vec<f64> = (0..12).map(|_| noise.sample(&mut rng)).collect();
                TaskSamples::new(format!("t{i}"), values).unwrap()
            })
            .collect();
        let report = holdout_eval(
            &tasks,
            &[Estimator::OneTask],
            200,
            13,
            VarianceMode::PerTask,
            None,
        )
        .unwrap();
        let row = report.row("one-task").unwrap();
        assert!(row.pct_change > 100.0, "pct change {}", row.pct_change);
    }
}
