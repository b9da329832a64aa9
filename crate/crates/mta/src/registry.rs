//! The closed estimator registry shared by the CLI, the simulation engine,
//! and the C bindings.

use nalgebra::DVector;

use crate::error::{MtaError, Result};
use crate::estimators::{
    constant_mta, james_stein, minimax_mta, mta_general, one_task_pooled, oracle_mta,
    single_task, EstimateVector, TaskSamples, TaskSummary, VarianceMode,
};
use crate::graph::SimilarityMatrix;
use crate::select::{cv_select, CvConfig, CvFamily};

/// Every estimator the toolkit exposes by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    SingleTask,
    OneTask,
    Js,
    JsCv,
    ConstantMta,
    ConstantMtaCv,
    MinimaxMta,
    MinimaxMtaCv,
    OracleMta,
    ExpertMta,
}

impl Estimator {
    pub const ALL: [Estimator; 10] = [
        Estimator::SingleTask,
        Estimator::OneTask,
        Estimator::Js,
        Estimator::JsCv,
        Estimator::ConstantMta,
        Estimator::ConstantMtaCv,
        Estimator::MinimaxMta,
        Estimator::MinimaxMtaCv,
        Estimator::OracleMta,
        Estimator::ExpertMta,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Estimator::SingleTask => "single-task",
            Estimator::OneTask => "one-task",
            Estimator::Js => "js",
            Estimator::JsCv => "js-cv",
            Estimator::ConstantMta => "constant-mta",
            Estimator::ConstantMtaCv => "constant-mta-cv",
            Estimator::MinimaxMta => "minimax-mta",
            Estimator::MinimaxMtaCv => "minimax-mta-cv",
            Estimator::OracleMta => "oracle-mta",
            Estimator::ExpertMta => "expert-mta",
        }
    }

    pub fn is_cv(self) -> bool {
        self.cv_family().is_some()
    }

    pub fn cv_family(self) -> Option<CvFamily> {
        match self {
            Estimator::JsCv => Some(CvFamily::JsConvex),
            Estimator::ConstantMtaCv => Some(CvFamily::ConstantMta),
            Estimator::MinimaxMtaCv => Some(CvFamily::MinimaxMta),
            _ => None,
        }
    }

    /// The CV variant of this estimator, where one exists.
    pub fn cv_variant(self) -> Option<Estimator> {
        match self {
            Estimator::Js => Some(Estimator::JsCv),
            Estimator::ConstantMta => Some(Estimator::ConstantMtaCv),
            Estimator::MinimaxMta => Some(Estimator::MinimaxMtaCv),
            _ => None,
        }
    }
}

impl std::str::FromStr for Estimator {
    type Err = MtaError;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .iter()
            .copied()
            .find(|e| e.label() == s)
            .ok_or_else(|| MtaError::UnknownEstimator { name: s.into() })
    }
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Shared inputs for running a registry estimator.
#[derive(Debug, Clone, Copy)]
pub struct EstimateContext<'a> {
    pub gamma: f64,
    pub variance_mode: VarianceMode,
    pub similarity: Option<&'a SimilarityMatrix>,
    pub true_means: Option<&'a DVector<f64>>,
    pub cv: Option<&'a CvConfig>,
}

impl<'a> EstimateContext<'a> {
    pub fn new(gamma: f64, variance_mode: VarianceMode) -> Self {
        Self {
            gamma,
            variance_mode,
            similarity: None,
            true_means: None,
            cv: None,
        }
    }
}

/// Dispatches a registry estimator. `summary` must be the summary of
/// `tasks` under `ctx.variance_mode`.
pub fn run_estimator(
    kind: Estimator,
    tasks: &[TaskSamples],
    summary: &TaskSummary,
    ctx: &EstimateContext<'_>,
) -> Result<EstimateVector> {
    if let Some(family) = kind.cv_family() {
        let cv = ctx.cv.ok_or_else(|| {
            MtaError::InvalidConfig(format!("{kind} requires a CV configuration"))
        })?;
        return Ok(cv_select(tasks, family, ctx.variance_mode, cv)?.estimate);
    }
    match kind {
        Estimator::SingleTask => Ok(single_task(summary)),
        Estimator::OneTask => one_task_pooled(tasks),
        Estimator::Js => Ok(james_stein(summary)),
        Estimator::ConstantMta => constant_mta(summary, ctx.gamma),
        Estimator::MinimaxMta => minimax_mta(summary, ctx.gamma),
        Estimator::OracleMta => {
            let mu = ctx.true_means.ok_or_else(|| {
                MtaError::InvalidConfig(
                    "oracle-mta requires true means (simulation only)".into(),
                )
            })?;
            oracle_mta(summary, mu, ctx.gamma)
        }
        Estimator::ExpertMta => {
            let similarity = ctx.similarity.ok_or_else(|| {
                MtaError::InvalidConfig("expert-mta requires a similarity matrix".into())
            })?;
            Ok(mta_general(summary, similarity, ctx.gamma)?
                .with_id("expert-mta")
                .with_param("gamma", ctx.gamma))
        }
        _ => unreachable!("cv estimators handled above"),
    }
}
