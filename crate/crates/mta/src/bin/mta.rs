//! Command-line surface: ingest task data and similarity matrices, run
//! estimators and cross-validation, reproduce the simulation studies, and
//! evaluate multi-task kernel density estimates.
//!
//! Exit codes: 0 on success, 2 on malformed input or invalid flag
//! combinations, 1 on an internal invariant violation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use mta::error::{MtaError, Result};
use mta::estimators::{summarize, VarianceMode};
use mta::io;
use mta::kde::{loo_mrr_breakdown, mtkde_at, KdeSimilarity, KernelSpec};
use mta::registry::{run_estimator, EstimateContext, Estimator};
use mta::select::{cv_select, CvConfig};
use mta::simulate::{run_fixed_study, run_study, FixedDesignConfig, WorldConfig, WorldFamily};
use mta::SimilarityMatrix;

#[derive(Parser)]
#[command(
    name = "mta",
    version,
    about = "Joint estimation of related task means by graph-regularized averaging"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate task means from a `task_id,value` CSV.
    Estimate {
        /// Input data file (header `task_id,value`).
        #[arg(long)]
        data: PathBuf,
        /// One of: single-task, one-task, js, js-cv, constant-mta,
        /// constant-mta-cv, minimax-mta, minimax-mta-cv, expert-mta.
        #[arg(long)]
        estimator: String,
        /// Regularization strength for the joint estimators.
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        /// Variance estimation: per-task or pooled.
        #[arg(long, default_value = "per-task")]
        variance_mode: String,
        /// Labeled similarity matrix (expert-mta only).
        #[arg(long)]
        similarity: Option<PathBuf>,
        /// Select the strength by randomized cross-validation.
        #[arg(long)]
        cv: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV (`task_id,n,sample_mean,estimate`); a `.meta.json`
        /// sidecar is written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a simulation study and emit plot-ready risk CSVs.
    Simulate {
        /// Hierarchical world family: gaussian or uniform.
        #[arg(long)]
        family: Option<String>,
        /// Number of tasks (hierarchical runs).
        #[arg(long = "T")]
        tasks: Option<usize>,
        /// Comma-separated mean-distribution variances (hierarchical runs).
        #[arg(long)]
        sigma_mu_grid: Option<String>,
        #[arg(long, default_value_t = 1000)]
        replicates: usize,
        /// Comma-separated estimator labels.
        #[arg(long)]
        estimators: Option<String>,
        /// Also run the cross-validated variants.
        #[arg(long)]
        cv: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for the risk CSVs and the manifest.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        n_min: u64,
        #[arg(long, default_value_t = 100)]
        n_max: u64,
        /// Fixed-design true means (comma-separated; replaces the hierarchy).
        #[arg(long)]
        fixed_mu: Option<String>,
        /// Fixed-design true variances (comma-separated).
        #[arg(long)]
        fixed_sigma: Option<String>,
        /// Fixed-design samples per task.
        #[arg(long)]
        fixed_n: Option<u64>,
        /// Fixed-design off-diagonal similarity.
        #[arg(long)]
        a: Option<f64>,
        /// Regularization strength for the fixed-design joint estimator.
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
    },
    /// Single- or multi-task kernel density estimation over a grid.
    Kde {
        /// Directory of per-task point CSVs (one row per point).
        #[arg(long)]
        tasks: PathBuf,
        /// Grid point CSV (one row per point).
        #[arg(long)]
        grid: PathBuf,
        /// single, constant, minimax, or expert.
        #[arg(long)]
        mode: String,
        /// Labeled similarity matrix (expert mode only).
        #[arg(long)]
        similarity: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        bandwidth: f64,
        /// Report leave-one-out mean reciprocal ranks instead of densities.
        #[arg(long)]
        loo_mrr: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_internal() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Estimate {
            data,
            estimator,
            gamma,
            variance_mode,
            similarity,
            cv,
            seed,
            out,
        } => cmd_estimate(
            &data,
            &estimator,
            gamma,
            &variance_mode,
            similarity.as_deref(),
            cv,
            seed,
            &out,
        ),
        Command::Simulate {
            family,
            tasks,
            sigma_mu_grid,
            replicates,
            estimators,
            cv,
            seed,
            out,
            n_min,
            n_max,
            fixed_mu,
            fixed_sigma,
            fixed_n,
            a,
            gamma,
        } => cmd_simulate(SimulateArgs {
            family,
            tasks,
            sigma_mu_grid,
            replicates,
            estimators,
            cv,
            seed,
            out,
            n_range: (n_min, n_max),
            fixed_mu,
            fixed_sigma,
            fixed_n,
            a,
            gamma,
        }),
        Command::Kde {
            tasks,
            grid,
            mode,
            similarity,
            gamma,
            bandwidth,
            loo_mrr,
            out,
        } => cmd_kde(
            &tasks,
            &grid,
            &mode,
            similarity.as_deref(),
            gamma,
            bandwidth,
            loo_mrr,
            &out,
        ),
    }
}

fn parse_f64_list(raw: &str, what: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(|s| {
            s.trim().parse::<f64>().map_err(|_| {
                MtaError::InvalidConfig(format!("{what}: {s:?} is not a number"))
            })
        })
        .collect()
}

/// Reorders a labeled similarity file into task order. Label sets must match
/// exactly; anything unknown on either side is a hard error.
fn align_similarity(
    labels: &[String],
    rows: &[Vec<f64>],
    task_ids: &[String],
) -> Result<SimilarityMatrix> {
    for label in labels {
        if !task_ids.contains(label) {
            return Err(MtaError::InvalidConfig(format!(
                "similarity label {label:?} does not appear in the task data"
            )));
        }
    }
    let positions: Vec<usize> = task_ids
        .iter()
        .map(|id| {
            labels.iter().position(|l| l == id).ok_or_else(|| {
                MtaError::InvalidConfig(format!(
                    "task {id:?} is missing from the similarity file"
                ))
            })
        })
        .collect::<Result<_>>()?;
    let aligned: Vec<Vec<f64>> = positions
        .iter()
        .map(|&r| positions.iter().map(|&c| rows[r][c]).collect())
        .collect();
    SimilarityMatrix::from_rows(&aligned)
}

#[allow(clippy::too_many_arguments)]
fn cmd_estimate(
    data: &Path,
    estimator: &str,
    gamma: f64,
    variance_mode: &str,
    similarity: Option<&Path>,
    cv: bool,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let tasks = io::read_task_data(data)?;
    let task_ids: Vec<String> = tasks.iter().map(|t| t.id().to_string()).collect();
    let mode: VarianceMode = variance_mode.parse()?;

    let mut kind: Estimator = estimator.parse()?;
    if cv && !kind.is_cv() {
        kind = kind.cv_variant().ok_or_else(|| {
            MtaError::InvalidConfig(format!("{kind} has no cross-validated variant"))
        })?;
    }
    if kind == Estimator::OracleMta {
        return Err(MtaError::InvalidConfig(
            "oracle-mta needs true means and is available in simulations only".into(),
        ));
    }

    let expert = if kind == Estimator::ExpertMta {
        let path = similarity.ok_or_else(|| {
            MtaError::InvalidConfig("expert-mta requires --similarity".into())
        })?;
        let (labels, rows) = io::read_similarity(path)?;
        Some(align_similarity(&labels, &rows, &task_ids)?)
    } else {
        if similarity.is_some() {
            return Err(MtaError::InvalidConfig(
                "--similarity is only used by expert-mta".into(),
            ));
        }
        None
    };

    let summary = summarize(&tasks, mode)?;
    let cv_cfg = CvConfig::new(seed);

    let (estimate, cv_meta) = if let Some(family) = kind.cv_family() {
        let selection = cv_select(&tasks, family, mode, &cv_cfg)?;
        let meta = json!({
            "family": family.label(),
            "selected": selection.selected,
            "scores": selection.scores
                .iter()
                .map(|(p, s)| json!({"param": p, "score": s}))
                .collect::<Vec<_>>(),
            "folds": cv_cfg.folds,
            "split_fraction": cv_cfg.split_fraction,
            "seed": seed,
        });
        (selection.estimate, Some(meta))
    } else {
        let ctx = EstimateContext {
            gamma,
            variance_mode: mode,
            similarity: expert.as_ref(),
            true_means: None,
            cv: None,
        };
        (run_estimator(kind, &tasks, &summary, &ctx)?, None)
    };

    io::write_estimates(out, &task_ids, &summary, &estimate)?;

    let fallback_ids: Vec<&String> = summary
        .variance_fallbacks()
        .iter()
        .map(|&i| &task_ids[i])
        .collect();
    let mut meta = json!({
        "estimator": estimate.estimator_id(),
        "params": estimate.params(),
        "variance_mode": mode.label(),
        "variance_fallback_tasks": fallback_ids,
        "tasks": task_ids.len(),
    });
    if let Some(cv_meta) = cv_meta {
        meta["cv"] = cv_meta;
    }
    let sidecar = out.with_file_name(format!(
        "{}.meta.json",
        out.file_name().and_then(|n| n.to_str()).unwrap_or("out")
    ));
    io::write_json(&sidecar, &meta)
}

struct SimulateArgs {
    family: Option<String>,
    tasks: Option<usize>,
    sigma_mu_grid: Option<String>,
    replicates: usize,
    estimators: Option<String>,
    cv: bool,
    seed: u64,
    out: PathBuf,
    n_range: (u64, u64),
    fixed_mu: Option<String>,
    fixed_sigma: Option<String>,
    fixed_n: Option<u64>,
    a: Option<f64>,
    gamma: f64,
}

fn parse_estimators(raw: Option<&str>, default: &[Estimator], cv: bool) -> Result<Vec<Estimator>> {
    let mut kinds: Vec<Estimator> = match raw {
        Some(list) => list
            .split(',')
            .map(|s| s.trim().parse::<Estimator>())
            .collect::<Result<_>>()?,
        None => default.to_vec(),
    };
    if cv {
        let variants: Vec<Estimator> = kinds.iter().filter_map(|k| k.cv_variant()).collect();
        for v in variants {
            if !kinds.contains(&v) {
                kinds.push(v);
            }
        }
    }
    Ok(kinds)
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let fixed_flags = [
        args.fixed_mu.is_some(),
        args.fixed_sigma.is_some(),
        args.fixed_n.is_some(),
        args.a.is_some(),
    ];
    let fixed_mode = fixed_flags.iter().any(|&f| f);
    if fixed_mode && !fixed_flags.iter().all(|&f| f) {
        return Err(MtaError::InvalidConfig(
            "fixed-design runs need all of --fixed-mu, --fixed-sigma, --fixed-n, --a".into(),
        ));
    }
    let hierarchical_flags =
        [args.family.is_some(), args.tasks.is_some(), args.sigma_mu_grid.is_some()];
    if fixed_mode && hierarchical_flags.iter().any(|&f| f) {
        return Err(MtaError::InvalidConfig(
            "fixed-design flags cannot be combined with --family/--T/--sigma-mu-grid".into(),
        ));
    }
    if !fixed_mode && !hierarchical_flags.iter().all(|&f| f) {
        return Err(MtaError::InvalidConfig(
            "hierarchical runs need all of --family, --T, --sigma-mu-grid".into(),
        ));
    }

    std::fs::create_dir_all(&args.out).map_err(|e| MtaError::Io {
        file: args.out.display().to_string(),
        source: e,
    })?;

    if fixed_mode {
        let mu = parse_f64_list(args.fixed_mu.as_deref().unwrap(), "--fixed-mu")?;
        let sigma_sq = parse_f64_list(args.fixed_sigma.as_deref().unwrap(), "--fixed-sigma")?;
        let cfg = FixedDesignConfig {
            mu,
            sigma_sq,
            samples_per_task: args.fixed_n.unwrap(),
            similarity: args.a.unwrap(),
            gamma: args.gamma,
            replicates: args.replicates,
            seed: args.seed,
        };
        let kinds = parse_estimators(
            args.estimators.as_deref(),
            &[Estimator::SingleTask, Estimator::ExpertMta],
            args.cv,
        )?;
        let report = run_fixed_study(&cfg, &kinds)?;
        let csv_path = args.out.join("risk_fixed.csv");
        io::write_risk_plain(&csv_path, &report)?;
        let manifest = json!({
            "command": "simulate",
            "mode": "fixed",
            "mu": cfg.mu,
            "sigma_sq": cfg.sigma_sq,
            "samples_per_task": cfg.samples_per_task,
            "a": cfg.similarity,
            "gamma": cfg.gamma,
            "replicates": cfg.replicates,
            "estimators": kinds.iter().map(|k| k.label()).collect::<Vec<_>>(),
            "cv": args.cv,
            "seed": cfg.seed,
            "outputs": ["risk_fixed.csv"],
        });
        return io::write_json(&args.out.join("manifest.json"), &manifest);
    }

    let family: WorldFamily = args.family.as_deref().unwrap().parse()?;
    let tasks = args.tasks.unwrap();
    let grid = parse_f64_list(args.sigma_mu_grid.as_deref().unwrap(), "--sigma-mu-grid")?;
    if grid.is_empty() {
        return Err(MtaError::InvalidConfig("--sigma-mu-grid is empty".into()));
    }
    let kinds = parse_estimators(
        args.estimators.as_deref(),
        &[
            Estimator::SingleTask,
            Estimator::Js,
            Estimator::ConstantMta,
            Estimator::MinimaxMta,
        ],
        args.cv,
    )?;

    let mut reports = Vec::with_capacity(grid.len());
    for (i, &sigma_mu_sq) in grid.iter().enumerate() {
        let cfg = WorldConfig {
            tasks,
            sigma_mu_sq,
            family,
            n_range: args.n_range,
            replicates: args.replicates,
            seed: args.seed.wrapping_add(i as u64),
        };
        reports.push((sigma_mu_sq, run_study(&cfg, &kinds, None)?));
    }

    let csv_name = format!("risk_{}_T{}.csv", family.label(), tasks);
    io::write_risk_grid(&args.out.join(&csv_name), &reports)?;
    let manifest = json!({
        "command": "simulate",
        "mode": "hierarchical",
        "family": family.label(),
        "tasks": tasks,
        "sigma_mu_grid": grid,
        "n_range": [args.n_range.0, args.n_range.1],
        "replicates": args.replicates,
        "estimators": kinds.iter().map(|k| k.label()).collect::<Vec<_>>(),
        "cv": args.cv,
        "seed": args.seed,
        "outputs": [csv_name],
    });
    io::write_json(&args.out.join("manifest.json"), &manifest)
}

#[allow(clippy::too_many_arguments)]
fn cmd_kde(
    tasks_dir: &Path,
    grid_path: &Path,
    mode: &str,
    similarity: Option<&Path>,
    gamma: f64,
    bandwidth: f64,
    loo: bool,
    out: &Path,
) -> Result<()> {
    let tasks = io::read_density_tasks(tasks_dir)?;
    let task_ids: Vec<String> = tasks.iter().map(|t| t.id().to_string()).collect();
    let grid = io::read_points(grid_path)?;
    let spec = KernelSpec::new(bandwidth)?;

    let (kde_mode, gamma) = match mode {
        // `single` is pure per-task KDE: the joint path with zero strength.
        "single" => (KdeSimilarity::Constant, 0.0),
        "constant" => (KdeSimilarity::Constant, gamma),
        "minimax" => (KdeSimilarity::Minimax, gamma),
        "expert" => {
            let path = similarity.ok_or_else(|| {
                MtaError::InvalidConfig("expert mode requires --similarity".into())
            })?;
            let (labels, rows) = io::read_similarity(path)?;
            (
                KdeSimilarity::Expert(align_similarity(&labels, &rows, &task_ids)?),
                gamma,
            )
        }
        other => {
            return Err(MtaError::UnknownMode { name: other.into() });
        }
    };

    if loo {
        let breakdown = loo_mrr_breakdown(&tasks, &grid, &spec, &kde_mode, gamma)?;
        return io::write_mrr(out, &breakdown);
    }

    let mut densities: Vec<Vec<f64>> = vec![Vec::with_capacity(grid.len()); tasks.len()];
    for point in &grid {
        let values = mtkde_at(&tasks, point, &spec, &kde_mode, gamma)?;
        for (t, v) in values.into_iter().enumerate() {
            densities[t].push(v);
        }
    }
    io::write_densities(out, &task_ids, &densities)
}
