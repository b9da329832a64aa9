//! Kernel density estimation: the single-task un-normalized Gaussian-kernel
//! estimate, the multi-task variant that replaces the per-task kernel
//! averages at each query with joint estimates across tasks, and the
//! leave-one-out mean-reciprocal-rank evaluation.

use crate::error::{MtaError, Result};
use crate::estimators::{constant_mta, minimax_mta, mta_general, summarize, TaskSamples, VarianceMode};
use crate::graph::SimilarityMatrix;

/// Point set for one density-estimation task. All points share dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityTask {
    id: String,
    points: Vec<Vec<f64>>,
    dim: usize,
}

impl DensityTask {
    pub fn new(id: impl Into<String>, points: Vec<Vec<f64>>) -> Result<Self> {
        let id = id.into();
        if points.is_empty() {
            return Err(MtaError::EmptyTask { id });
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(MtaError::InvalidConfig(format!(
                "task {id:?} has zero-dimensional points"
            )));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(MtaError::DimensionMismatch {
                    what: "density task point",
                    expected: dim,
                    got: p.len(),
                });
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(MtaError::NonFiniteSample { id, index: i });
            }
        }
        Ok(Self { id, points, dim })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // non-empty by construction
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn without_point(&self, index: usize) -> DensityTask {
        let mut points = self.points.clone();
        points.remove(index);
        DensityTask {
            id: self.id.clone(),
            points,
            dim: self.dim,
        }
    }
}

/// Gaussian kernel parameters (identity covariance scaled by bandwidth).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub bandwidth: f64,
}

impl KernelSpec {
    pub fn new(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(MtaError::InvalidArgument {
                what: "bandwidth (must be positive and finite)",
                value: bandwidth,
            });
        }
        Ok(Self { bandwidth })
    }
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self { bandwidth: 1.0 }
    }
}

/// Un-normalized Gaussian kernel `exp(-||x - z||^2 / (2 h^2))`; equals 1 at
/// `x = z`.
fn kernel(x: &[f64], z: &[f64], bandwidth: f64) -> f64 {
    let mut sq = 0.0;
    for (a, b) in x.iter().zip(z) {
        let d = a - b;
        sq += d * d;
    }
    (-sq / (2.0 * bandwidth * bandwidth)).exp()
}

fn check_query(dim: usize, query: &[f64]) -> Result<()> {
    if query.len() != dim {
        return Err(MtaError::DimensionMismatch {
            what: "density query point",
            expected: dim,
            got: query.len(),
        });
    }
    Ok(())
}

/// Un-normalized single-task KDE at `query`: the average kernel value over
/// the task's points.
pub fn kde_at(task: &DensityTask, query: &[f64], spec: &KernelSpec) -> Result<f64> {
    check_query(task.dim(), query)?;
    let sum: f64 = task
        .points()
        .iter()
        .map(|p| kernel(p, query, spec.bandwidth))
        .sum();
    Ok(sum / task.len() as f64)
}

/// How task relatedness is chosen for the multi-task density estimate.
#[derive(Debug, Clone, PartialEq)]
pub enum KdeSimilarity {
    Constant,
    Minimax,
    Expert(SimilarityMatrix),
}

impl KdeSimilarity {
    pub fn label(&self) -> &'static str {
        match self {
            KdeSimilarity::Constant => "constant",
            KdeSimilarity::Minimax => "minimax",
            KdeSimilarity::Expert(_) => "expert",
        }
    }
}

fn common_dim(tasks: &[DensityTask]) -> Result<usize> {
    if tasks.is_empty() {
        return Err(MtaError::EmptyTasks);
    }
    let dim = tasks[0].dim();
    for t in tasks {
        if t.dim() != dim {
            return Err(MtaError::DimensionMismatch {
                what: "density task dimensions",
                expected: dim,
                got: t.dim(),
            });
        }
    }
    Ok(dim)
}

/// Multi-task KDE at one query point: the per-task kernel evaluations at
/// `query` are treated as that task's samples, summarized (standard variance
/// floor and pooled fallback), and jointly estimated across tasks with the
/// chosen similarity. Regularization couples tasks only, never query points.
/// Outputs are clamped below at zero.
pub fn mtkde_at(
    tasks: &[DensityTask],
    query: &[f64],
    spec: &KernelSpec,
    mode: &KdeSimilarity,
    gamma: f64,
) -> Result<Vec<f64>> {
    let dim = common_dim(tasks)?;
    check_query(dim, query)?;
    if let KdeSimilarity::Expert(matrix) = mode {
        if matrix.size() != tasks.len() {
            return Err(MtaError::DimensionMismatch {
                what: "expert similarity matrix",
                expected: tasks.len(),
                got: matrix.size(),
            });
        }
    }

    let kernel_tasks: Vec<TaskSamples> = tasks
        .iter()
        .map(|task| {
            let evals: Vec<f64> = task
                .points()
                .iter()
                .map(|p| kernel(p, query, spec.bandwidth))
                .collect();
            TaskSamples::new(task.id(), evals)
        })
        .collect::<Result<_>>()?;
    let summary = summarize(&kernel_tasks, VarianceMode::PerTask)?;

    let estimate = match mode {
        KdeSimilarity::Constant => constant_mta(&summary, gamma)?,
        KdeSimilarity::Minimax => minimax_mta(&summary, gamma)?,
        KdeSimilarity::Expert(matrix) => mta_general(&summary, matrix, gamma)?,
    };
    Ok(estimate.values().iter().map(|v| v.max(0.0)).collect())
}

/// Per-task and overall mean reciprocal rank from the leave-one-out
/// protocol.
#[derive(Debug, Clone)]
pub struct MrrBreakdown {
    pub overall: f64,
    /// `(task id, held-out events, mean reciprocal rank)`.
    pub per_task: Vec<(String, usize, f64)>,
}

/// Leave-one-out mean reciprocal rank: each point of each task is held out
/// in turn, the held-out task's density is recomputed at every grid point
/// from the remaining data (other tasks keep all their points, and the
/// joint solve is redone per held-out configuration), grid points are ranked
/// by descending density (ties broken by grid index), and the reciprocal
/// rank of the held-out point's grid position is averaged over all events.
///
/// Every task needs at least two points, and every held-out point must
/// coincide with a grid point.
pub fn loo_mrr_breakdown(
    tasks: &[DensityTask],
    grid: &[Vec<f64>],
    spec: &KernelSpec,
    mode: &KdeSimilarity,
    gamma: f64,
) -> Result<MrrBreakdown> {
    let dim = common_dim(tasks)?;
    if grid.is_empty() {
        return Err(MtaError::InvalidConfig("evaluation grid is empty".into()));
    }
    for g in grid {
        if g.len() != dim {
            return Err(MtaError::DimensionMismatch {
                what: "grid point",
                expected: dim,
                got: g.len(),
            });
        }
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

    let mut per_task = Vec::with_capacity(tasks.len());
    let mut total_rr = 0.0;
    let mut total_events = 0usize;
    for (t, task) in tasks.iter().enumerate() {
        let mut task_rr = 0.0;
        for i in 0..task.len() {
            let held_out = &task.points()[i];
            let target = grid
                .iter()
                .position(|g| g == held_out)
                .ok_or_else(|| MtaError::GridMembership {
                    task: task.id().to_string(),
                    index: i,
                })?;

            let mut modified: Vec<DensityTask> = tasks.to_vec();
            modified[t] = task.without_point(i);

            let densities: Vec<f64> = if gamma == 0.0 {
                grid.iter()
                    .map(|g| kde_at(&modified[t], g, spec))
                    .collect::<Result<_>>()?
            } else {
                grid.iter()
                    .map(|g| Ok(mtkde_at(&modified, g, spec, mode, gamma)?[t]))
                    .collect::<Result<_>>()?
            };

            let mut order: Vec<usize> = (0..grid.len()).collect();
            order.sort_by(|&a, &b| {
                densities[b]
                    .partial_cmp(&densities[a])
                    .expect("densities are finite")
                    .then(a.cmp(&b))
            });
            let rank = order.iter().position(|&j| j == target).unwrap() + 1;
            task_rr += 1.0 / rank as f64;
        }
        total_rr += task_rr;
        total_events += task.len();
        per_task.push((task.id().to_string(), task.len(), task_rr / task.len() as f64));
    }

    Ok(MrrBreakdown {
        overall: total_rr / total_events as f64,
        per_task,
    })
}

/// The overall leave-one-out mean reciprocal rank; see
/// [`loo_mrr_breakdown`].
pub fn loo_mrr(
    tasks: &[DensityTask],
    grid: &[Vec<f64>],
    spec: &KernelSpec,
    mode: &KdeSimilarity,
    gamma: f64,
) -> Result<f64> {
    Ok(loo_mrr_breakdown(tasks, grid, spec, mode, gamma)?.overall)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::substream;
    use rand::Rng;

    fn cluster(rng: &mut impl Rng, center: &[f64], count: usize, radius: f64) -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| {
                center
                    .iter()
                    .map(|c| c + (rng.random::<f64>() - 0.5) * radius)
                    .collect()
            })
            .collect()
    }

    #[test]
    fn kernel_is_one_at_its_center() {
        let task = DensityTask::new("a", vec![vec![1.0, 2.0]]).unwrap();
        let spec = KernelSpec::default();
        assert_eq!(kde_at(&task, &[1.0, 2.0], &spec).unwrap(), 1.0);
    }

    #[test]
    fn density_decays_with_distance() {
        let task = DensityTask::new("a", vec![vec![0.0]]).unwrap();
        let spec = KernelSpec::default();
        let near = kde_at(&task, &[1.0], &spec).unwrap();
        let far = kde_at(&task, &[6.0], &spec).unwrap();
        let very_far = kde_at(&task, &[40.0], &spec).unwrap();
        assert!(near > far && far > very_far);
        assert!(very_far < 1e-300);
    }

    #[test]
    fn kde_matches_direct_sum() {
        let points = vec![vec![0.0, 0.0], vec![1.0, -1.0], vec![2.5, 0.5]];
        let task = DensityTask::new("a", points.clone()).unwrap();
        let spec = KernelSpec::new(0.8).unwrap();
        let query = [0.3, -0.2];
        let mut expected = 0.0;
        for p in &points {
            let sq: f64 = p.iter().zip(query.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            expected += (-sq / (2.0 * 0.8 * 0.8)).exp();
        }
        expected /= 3.0;
        let got = kde_at(&task, &query, &spec).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn kde_rejects_dimension_mismatch() {
        let task = DensityTask::new("a", vec![vec![0.0, 0.0]]).unwrap();
        assert!(kde_at(&task, &[1.0], &KernelSpec::default()).is_err());
    }

    #[test]
    fn mtkde_zero_gamma_equals_single_task_exactly() {
        let mut rng = substream(61, &[0]);
        let tasks = vec![
            DensityTask::new("a", cluster(&mut rng, &[0.0, 0.0], 5, 1.0)).unwrap(),
            DensityTask::new("b", cluster(&mut rng, &[2.0, 1.0], 7, 1.5)).unwrap(),
        ];
        let spec = KernelSpec::default();
        let query = [0.7, 0.4];
        let joint = mtkde_at(&tasks, &query, &spec, &KdeSimilarity::Constant, 0.0).unwrap();
        for (t, task) in tasks.iter().enumerate() {
            let single = kde_at(task, &query, &spec).unwrap();
            assert_eq!(joint[t], single, "bitwise equality at task {t}");
        }
    }

    #[test]
    fn identical_tasks_share_their_density() {
        let points = vec![vec![0.0], vec![1.0], vec![2.0]];
        let tasks = vec![
            DensityTask::new("a", points.clone()).unwrap(),
            DensityTask::new("b", points).unwrap(),
        ];
        let spec = KernelSpec::default();
        let query = [0.5];
        let joint = mtkde_at(&tasks, &query, &spec, &KdeSimilarity::Constant, 1.0).unwrap();
        let single = kde_at(&tasks[0], &query, &spec).unwrap();
        assert!((joint[0] - joint[1]).abs() < 1e-12);
        assert!((joint[0] - single).abs() < 1e-12);
    }

    #[test]
    fn expert_similarity_keeps_outputs_in_envelope() {
        // Seven tasks related through an expert-assessed 0..1 similarity
        // matrix; outputs stay within the single-task density envelope.
        let expert = SimilarityMatrix::from_rows(&[
            vec![0.0, 0.2, 0.2, 0.6, 0.8, 0.8, 0.6],
            vec![0.2, 0.0, 0.8, 0.2, 0.2, 0.2, 0.4],
            vec![0.2, 0.8, 0.0, 0.2, 0.2, 0.2, 0.4],
            vec![0.6, 0.2, 0.2, 0.0, 0.6, 0.6, 0.5],
            vec![0.8, 0.2, 0.2, 0.6, 0.0, 1.0, 0.6],
            vec![0.8, 0.2, 0.2, 0.6, 1.0, 0.0, 0.6],
            vec![0.6, 0.4, 0.4, 0.5, 0.6, 0.6, 0.0],
        ])
        .unwrap();
        let mut rng = substream(67, &[1]);
        let tasks: Vec<DensityTask> = (0..7)
            .map(|i| {
                let center = [i as f64 * 0.8, -(i as f64) * 0.3];
                DensityTask::new(format!("g{i}"), cluster(&mut rng, &center, 6, 2.0)).unwrap()
            })
            .collect();
        let spec = KernelSpec::default();
        for q in [[0.0, 0.0], [2.0, -1.0], [4.5, 0.5]] {
            let joint =
                mtkde_at(&tasks, &q, &spec, &KdeSimilarity::Expert(expert.clone()), 1.0).unwrap();
            let singles: Vec<f64> = tasks.iter().map(|t| kde_at(t, &q, &spec).unwrap()).collect();
            let lo = singles.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = singles.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for v in &joint {
                assert!(*v >= lo - 1e-10 && *v <= hi + 1e-10);
            }
        }
    }

    #[test]
    fn unknown_expert_size_is_rejected() {
        let tasks = vec![
            DensityTask::new("a", vec![vec![0.0], vec![1.0]]).unwrap(),
            DensityTask::new("b", vec![vec![2.0], vec![3.0]]).unwrap(),
        ];
        let bad = SimilarityMatrix::constant(3, 0.5).unwrap();
        assert!(mtkde_at(
            &tasks,
            &[0.0],
            &KernelSpec::default(),
            &KdeSimilarity::Expert(bad),
            1.0
        )
        .is_err());
    }

    #[test]
    fn single_grid_point_has_perfect_rank() {
        let tasks = vec![DensityTask::new("a", vec![vec![0.0], vec![0.0]]).unwrap()];
        let grid = vec![vec![0.0]];
        let mrr = loo_mrr(
            &tasks,
            &grid,
            &KernelSpec::default(),
            &KdeSimilarity::Constant,
            1.0,
        )
        .unwrap();
        assert_eq!(mrr, 1.0);
    }

    #[test]
    fn tight_cluster_ranks_first() {
        // All of the mass sits on one grid point, so every held-out event is
        // ranked first.
        let tasks = vec![
            DensityTask::new("a", vec![vec![0.0], vec![0.0], vec![0.0]]).unwrap(),
            DensityTask::new("b", vec![vec![0.0], vec![0.0]]).unwrap(),
        ];
        let mut grid = vec![vec![0.0]];
        for i in 1..40 {
            grid.push(vec![10.0 + i as f64]);
        }
        let mrr = loo_mrr(
            &tasks,
            &grid,
            &KernelSpec::default(),
            &KdeSimilarity::Constant,
            1.0,
        )
        .unwrap();
        assert_eq!(mrr, 1.0);
    }

    #[test]
    fn held_out_point_must_be_on_grid() {
        let tasks = vec![DensityTask::new("a", vec![vec![0.0], vec![0.25]]).unwrap()];
        let grid = vec![vec![0.0], vec![1.0]];
        let err = loo_mrr(
            &tasks,
            &grid,
            &KernelSpec::default(),
            &KdeSimilarity::Constant,
            0.0,
        )
        .unwrap_err();
        assert!(matches!(err, MtaError::GridMembership { .. }));
    }

    #[test]
    fn zero_gamma_matches_pure_kde_ranking_oracle() {
        let mut rng = substream(71, &[2]);
        // Two tasks over three tight clusters; grid covers the clusters and
        // background positions, 100 points total.
        let centers = [[0.0, 0.0], [5.0, 5.0], [-4.0, 3.0]];
        let mut grid: Vec<Vec<f64>> = Vec::new();
        let mut tasks_points: Vec<Vec<Vec<f64>>> = vec![Vec::new(), Vec::new()];
        for (ci, center) in centers.iter().enumerate() {
            for j in 0..3 {
                let p = vec![
                    center[0] + 0.05 * j as f64,
                    center[1] - 0.05 * j as f64,
                ];
                grid.push(p.clone());
                tasks_points[ci % 2].push(p);
            }
        }
        while grid.len() < 100 {
            grid.push(vec![
                rng.random::<f64>() * 20.0 - 10.0,
                rng.random::<f64>() * 20.0 - 10.0,
            ]);
        }
        let tasks = vec![
            DensityTask::new("a", tasks_points[0].clone()).unwrap(),
            DensityTask::new("b", tasks_points[1].clone()).unwrap(),
        ];
        let spec = KernelSpec::default();

        let joint_zero = loo_mrr(&tasks, &grid, &spec, &KdeSimilarity::Constant, 0.0).unwrap();
        let joint_reg = loo_mrr(&tasks, &grid, &spec, &KdeSimilarity::Constant, 1.0).unwrap();
        assert!(joint_zero > 0.0 && joint_zero <= 1.0);
        assert!(joint_reg > 0.0 && joint_reg <= 1.0);

        // Independent oracle: plain KDE ranking computed from scratch.
        let mut expected_total = 0.0;
        let mut events = 0usize;
        for (t, task) in tasks.iter().enumerate() {
            let _ = t;
            for i in 0..task.len() {
                let held = &task.points()[i];
                let target = grid.iter().position(|g| g == held).unwrap();
                let remaining: Vec<&Vec<f64>> = task
                    .points()
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, p)| p)
                    .collect();
                let mut densities: Vec<f64> = Vec::with_capacity(grid.len());
                for g in &grid {
                    let mut acc = 0.0;
                    for p in &remaining {
                        let sq: f64 = p
                            .iter()
                            .zip(g.iter())
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum();
                        acc += (-sq / 2.0).exp();
                    }
                    densities.push(acc / remaining.len() as f64);
                }
                let rank = 1 + grid
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| {
                        densities[j] > densities[target]
                            || (densities[j] == densities[target] && j < target)
                    })
                    .count();
                expected_total += 1.0 / rank as f64;
                events += 1;
            }
        }
        let expected = expected_total / events as f64;
        assert!((joint_zero - expected).abs() < 1e-12);
    }

    #[test]
    fn grid_permutation_preserves_mrr_without_ties() {
        let tasks = vec![
            DensityTask::new("a", vec![vec![0.0], vec![0.4], vec![1.1]]).unwrap(),
            DensityTask::new("b", vec![vec![2.0], vec![2.5]]).unwrap(),
        ];
        let grid = vec![vec![0.0], vec![0.4], vec![1.1], vec![2.0], vec![2.5], vec![7.0]];
        let mut permuted = grid.clone();
        permuted.reverse();
        let spec = KernelSpec::default();
        let a = loo_mrr(&tasks, &grid, &spec, &KdeSimilarity::Minimax, 0.5).unwrap();
        let b = loo_mrr(&tasks, &permuted, &spec, &KdeSimilarity::Minimax, 0.5).unwrap();
        assert_eq!(a, b);
    }
}
