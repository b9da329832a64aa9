//! Randomized cross-validated selection of the regularization strength for
//! the joint-estimator families: five independent random 50% subsample
//! rounds per task, scored against the full-sample means.

use crate::error::{MtaError, Result};
use crate::estimators::{
    constant_mta, js_convex, minimax_mta, summarize, EstimateVector, TaskSamples, TaskSummary,
    VarianceMode,
};
use crate::util::{substream, KahanSum};

/// Cross-validation protocol parameters. The default grid is
/// `2^-5 ..= 2^5` by powers of two.
#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    pub folds: usize,
    pub split_fraction: f64,
    pub gamma_grid: Vec<f64>,
    pub seed: u64,
}

impl CvConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            folds: 5,
            split_fraction: 0.5,
            gamma_grid: (-5..=5).map(|e| 2f64.powi(e)).collect(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds == 0 {
            return Err(MtaError::InvalidConfig("folds must be >= 1".into()));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(MtaError::InvalidConfig(
                "split fraction must lie in (0, 1)".into(),
            ));
        }
        if self.gamma_grid.is_empty() {
            return Err(MtaError::InvalidConfig("parameter grid is empty".into()));
        }
        let mut prev = 0.0;
        for &g in &self.gamma_grid {
            if !g.is_finite() || g <= prev {
                return Err(MtaError::InvalidConfig(
                    "parameter grid must be strictly increasing and positive".into(),
                ));
            }
            prev = g;
        }
        Ok(())
    }
}

impl Default for CvConfig {
    fn default() -> Self {
        Self::new(0)
    }
}

/// The estimator families whose strength parameter is selected by CV.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvFamily {
    ConstantMta,
    MinimaxMta,
    JsConvex,
}

impl CvFamily {
    pub fn label(self) -> &'static str {
        match self {
            CvFamily::ConstantMta => "constant-mta",
            CvFamily::MinimaxMta => "minimax-mta",
            CvFamily::JsConvex => "js-convex",
        }
    }

    /// The registry label of the refit estimate.
    fn selected_id(self) -> &'static str {
        match self {
            CvFamily::ConstantMta => "constant-mta-cv",
            CvFamily::MinimaxMta => "minimax-mta-cv",
            CvFamily::JsConvex => "js-cv",
        }
    }

    /// Grid value as used by the family: the James-Stein convex family runs
    /// on `lambda = gamma / (gamma + 1)`.
    fn param_from_gamma(self, gamma: f64) -> f64 {
        match self {
            CvFamily::JsConvex => gamma / (gamma + 1.0),
            _ => gamma,
        }
    }

    fn fit(self, summary: &TaskSummary, param: f64) -> Result<EstimateVector> {
        match self {
            CvFamily::ConstantMta => constant_mta(summary, param),
            CvFamily::MinimaxMta => minimax_mta(summary, param),
            CvFamily::JsConvex => js_convex(summary, param),
        }
    }
}

impl std::str::FromStr for CvFamily {
    type Err = MtaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant-mta" => Ok(CvFamily::ConstantMta),
            "minimax-mta" => Ok(CvFamily::MinimaxMta),
            "js-convex" => Ok(CvFamily::JsConvex),
            other => Err(MtaError::UnknownEstimator { name: other.into() }),
        }
    }
}

/// Outcome of a CV run: the winning parameter, the per-candidate average
/// scores `(parameter, score)`, and the estimate refit on the full data.
#[derive(Debug, Clone)]
pub struct CvSelection {
    pub selected: f64,
    pub scores: Vec<(f64, f64)>,
    pub estimate: EstimateVector,
}

/// Runs the randomized subsample protocol: for each round, an independent
/// random `split_fraction` subsample per task (at least one sample) is
/// summarized and fit with every candidate parameter; candidates are scored
/// by squared error against the full-sample means, averaged over tasks and
/// rounds. Ties select the smallest parameter. The winner is refit on the
/// full data.
pub fn cv_select(
    tasks: &[TaskSamples],
    family: CvFamily,
    mode: VarianceMode,
    cfg: &CvConfig,
) -> Result<CvSelection> {
    cfg.validate()?;
    if tasks.is_empty() {
        return Err(MtaError::EmptyTasks);
    }
    let full = summarize(tasks, mode)?;
    let t = tasks.len();

    let candidates: Vec<f64> = cfg
        .gamma_grid
        .iter()
        .map(|&g| family.param_from_gamma(g))
        .collect();
    let mut scores = vec![KahanSum::default(); candidates.len()];

    for round in 0..cfg.folds {
        let mut rng = substream(cfg.seed, &[round as u64]);
        let sub_tasks: Vec<TaskSamples> = tasks
            .iter()
            .map(|task| {
                let n = task.len();
                let keep = ((n as f64 * cfg.split_fraction).floor() as usize).max(1);
                let chosen = rand::seq::index::sample(&mut rng, n, keep);
                let values: Vec<f64> = chosen.iter().map(|i| task.values()[i]).collect();
                TaskSamples::new(task.id(), values)
            })
            .collect::<Result<_>>()?;
        let sub_summary = summarize(&sub_tasks, mode)?;

        for (j, &param) in candidates.iter().enumerate() {
            let estimate = family.fit(&sub_summary, param)?;
            let mut err = 0.0;
            for i in 0..t {
                let d = estimate.values()[i] - full.means()[i];
                err += d * d;
            }
            scores[j].add(err / t as f64);
        }
    }

    let averages: Vec<f64> = scores
        .iter()
        .map(|k| k.value() / cfg.folds as f64)
        .collect();
    let mut best = 0;
    for (j, &avg) in averages.iter().enumerate() {
        if avg < averages[best] {
            best = j;
        }
    }
    debug_assert!(averages.iter().all(|&a| a >= averages[best]));

    let selected = candidates[best];
    let estimate = family.fit(&full, selected)?.with_id(family.selected_id());
    Ok(CvSelection {
        selected,
        scores: candidates.into_iter().zip(averages).collect(),
        estimate,
    })
}
