//! Joint estimation of many related task means by graph-Laplacian
//! shrinkage.
//!
//! Given per-task samples, the toolkit jointly estimates all task means as
//! `W ybar`, where `W = (I + (gamma/T) Sigma L(A))^{-1}` is right-stochastic:
//! each estimate is a convex combination of the per-task sample averages,
//! pulled toward related tasks. Alongside the core solvers it provides:
//!
//! - similarity estimation from data (constant and minimax scalings, both
//!   with an O(T) solve), oracle pairwise similarity, and James-Stein
//!   baselines ([`estimators`]);
//! - analytic risk decomposition and the two-task optimality results
//!   ([`risk`]);
//! - randomized cross-validated strength selection ([`select`]);
//! - hierarchical and fixed-design Monte-Carlo studies plus a 50% holdout
//!   protocol, all reproducible for any worker count ([`simulate`]);
//! - multi-task kernel density estimation with leave-one-out
//!   mean-reciprocal-rank scoring ([`kde`]).
//!
//! The `mta` binary exposes the same functionality as `estimate`,
//! `simulate`, and `kde` subcommands over CSV/JSON files.

pub mod error;
pub mod estimators;
pub mod graph;
pub mod io;
pub mod kde;
pub mod registry;
pub mod risk;
pub mod select;
pub mod simulate;

mod util;

pub use error::{MtaError, Result};
pub use estimators::{EstimateVector, TaskSamples, TaskSummary, VarianceMode};
pub use graph::{LaplacianMatrix, MeanCovariance, SimilarityMatrix, WeightMatrix};
pub use registry::Estimator;
pub use select::{CvConfig, CvFamily, CvSelection};
pub use simulate::{FixedDesignConfig, RiskReport, WorldConfig, WorldFamily};
