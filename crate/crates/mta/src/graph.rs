//! Graph-Laplacian machinery behind the joint mean estimators: task
//! similarity matrices, Laplacians, graph energy, and the weight-matrix
//! solvers (a dense general path and an O(T) rank-one fast path for
//! constant-similarity graphs).

use nalgebra::{DMatrix, DVector};

use crate::error::{MtaError, Result};

/// Entries of a solved weight matrix may carry negative floating-point dust
/// down to this magnitude; reads clamp it to zero. Anything more negative is
/// an invariant violation.
pub const WEIGHT_DUST: f64 = 1e-12;

/// Each row of a solved weight matrix must sum to 1 within this tolerance.
pub const ROW_SUM_TOL: f64 = 1e-10;

/// Pairwise task-relatedness weights: a `T x T` matrix of finite,
/// non-negative reals. The diagonal carries no information (it cancels in
/// the Laplacian and contributes nothing to the graph energy).
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    entries: DMatrix<f64>,
}

impl SimilarityMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(MtaError::DimensionMismatch {
                what: "similarity matrix (must be square)",
                expected: entries.nrows(),
                got: entries.ncols(),
            });
        }
        if entries.nrows() == 0 {
            return Err(MtaError::InvalidConfig(
                "similarity matrix must have at least one task".into(),
            ));
        }
        for r in 0..entries.nrows() {
            for c in 0..entries.ncols() {
                let v = entries[(r, c)];
                if !v.is_finite() || v < 0.0 {
                    return Err(MtaError::InvalidSimilarity {
                        row: r,
                        col: c,
                        value: v,
                    });
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let t = rows.len();
        let m = DMatrix::from_fn(t, t, |r, c| rows[r].get(c).copied().unwrap_or(f64::NAN));
        Self::new(m)
    }

    /// The constant graph `a * 1 1^T` (every pair equally related).
    pub fn constant(size: usize, a: f64) -> Result<Self> {
        Self::new(DMatrix::from_element(size, size, a))
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// `(A + A^T) / 2`. Idempotent.
    pub fn symmetrized(&self) -> SimilarityMatrix {
        let sym = (&self.entries + self.entries.transpose()) * 0.5;
        SimilarityMatrix { entries: sym }
    }
}

/// The graph Laplacian `L = D - A` of a symmetrized similarity matrix, with
/// `D_tt = sum_s A_ts`. Rows sum to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix {
    entries: DMatrix<f64>,
}

impl LaplacianMatrix {
    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&v| v == 0.0)
    }
}

/// Builds the graph Laplacian of `sym(A) = (A + A^T)/2`. Asymmetric inputs
/// are symmetrized here; using an asymmetric similarity directly is
/// equivalent to using its symmetrization.
pub fn build_laplacian(similarity: &SimilarityMatrix) -> LaplacianMatrix {
    let sym = similarity.symmetrized();
    let t = sym.size();
    let a = sym.entries();
    let mut lap = -a.clone();
    for r in 0..t {
        let degree: f64 = (0..t).map(|c| a[(r, c)]).sum();
        lap[(r, r)] = degree - a[(r, r)];
    }
    LaplacianMatrix { entries: lap }
}

/// Total energy `(1/2) sum_{i,j} A_ij (f_i - f_j)^2` of a function over the
/// graph. Zero exactly when `f` is constant on every connected component.
pub fn graph_energy(f: &DVector<f64>, similarity: &SimilarityMatrix) -> Result<f64> {
    let t = similarity.size();
    if f.len() != t {
        return Err(MtaError::DimensionMismatch {
            what: "graph energy function values",
            expected: t,
            got: f.len(),
        });
    }
    let a = similarity.entries();
    let mut total = 0.0;
    for i in 0..t {
        for j in 0..t {
            let d = f[i] - f[j];
            total += a[(i, j)] * d * d;
        }
    }
    Ok(0.5 * total)
}

/// Diagonal covariance of the task sample means: entry `t` is the variance
/// of the `t`th mean, `variance_t / count_t`. Strictly positive and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanCovariance {
    diagonal: DVector<f64>,
}

impl MeanCovariance {
    pub fn new(diagonal: DVector<f64>) -> Result<Self> {
        for (i, &v) in diagonal.iter().enumerate() {
            if !v.is_finite() || v <= 0.0 {
                return Err(MtaError::InvalidCovariance { index: i, value: v });
            }
        }
        if diagonal.is_empty() {
            return Err(MtaError::EmptyTasks);
        }
        Ok(Self { diagonal })
    }

    pub fn from_slice(diag: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(diag))
    }

    pub fn size(&self) -> usize {
        self.diagonal.len()
    }

    pub fn diagonal(&self) -> &DVector<f64> {
        &self.diagonal
    }
}

/// The solved weight matrix `W = (I + (gamma/T) Sigma L)^{-1}`. Rows sum
/// to 1 and entries are non-negative up to floating-point dust; reads clamp
/// dust-level negatives to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    entries: DMatrix<f64>,
    gamma: f64,
    dust: f64,
}

impl WeightMatrix {
    /// Wraps solver output, enforcing right-stochasticity. A violation means
    /// the solve itself went wrong, so it surfaces as an internal error.
    pub fn new(entries: DMatrix<f64>, gamma: f64) -> Result<Self> {
        Self::with_solver_slack(entries, gamma, 0.0)
    }

    /// Like [`WeightMatrix::new`], but widens the tolerances to `slack` when
    /// the solved system was large enough in norm that plain f64 rounding
    /// exceeds the nominal dust bounds (`slack ~ eps * ||system||`, e.g. for
    /// capped oracle similarities around 1e12).
    pub(crate) fn with_solver_slack(
        entries: DMatrix<f64>,
        gamma: f64,
        slack: f64,
    ) -> Result<Self> {
        let row_tol = ROW_SUM_TOL.max(slack);
        let dust = WEIGHT_DUST.max(slack);
        let t = entries.nrows();
        for r in 0..t {
            let mut sum = 0.0;
            for c in 0..t {
                let v = entries[(r, c)];
                if !v.is_finite() {
                    return Err(MtaError::Internal(format!(
                        "weight matrix entry ({r}, {c}) is not finite"
                    )));
                }
                if v < -dust {
                    return Err(MtaError::Internal(format!(
                        "weight matrix entry ({r}, {c}) = {v} is negative beyond dust tolerance"
                    )));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > row_tol {
                return Err(MtaError::Internal(format!(
                    "weight matrix row {r} sums to {sum}, not 1"
                )));
            }
        }
        Ok(Self {
            entries,
            gamma,
            dust,
        })
    }

    /// Wraps an arbitrary matrix without the stochasticity checks, for
    /// analyzing linear estimators that are not themselves solutions
    /// (e.g. the zero matrix in risk studies).
    pub fn from_raw(entries: DMatrix<f64>, gamma: f64) -> Self {
        Self {
            entries,
            gamma,
            dust: WEIGHT_DUST,
        }
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Entry with dust-level negatives clamped to zero.
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        let v = self.entries[(row, col)];
        if v < 0.0 && v >= -self.dust {
            0.0
        } else {
            v
        }
    }

    /// Raw solver output, dust included.
    pub fn entries_raw(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// `W y` using clamped entries.
    pub fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let t = self.size();
        if v.len() != t {
            return Err(MtaError::DimensionMismatch {
                what: "weight matrix application",
                expected: t,
                got: v.len(),
            });
        }
        let mut out = DVector::zeros(t);
        for r in 0..t {
            let mut acc = 0.0;
            for c in 0..t {
                acc += self.entry(r, c) * v[c];
            }
            out[r] = acc;
        }
        Ok(out)
    }
}

/// Solves `(I + (gamma/T) Sigma L) W = I` for the weight matrix with a dense
/// LU factorization. Existence is guaranteed for any finite non-negative
/// similarity, positive covariance, and `gamma >= 0`, so a solver failure on
/// valid input surfaces as an internal error.
pub fn mta_weights_dense(
    sigma: &MeanCovariance,
    laplacian: &LaplacianMatrix,
    gamma: f64,
) -> Result<WeightMatrix> {
    let t = sigma.size();
    if laplacian.size() != t {
        return Err(MtaError::DimensionMismatch {
            what: "Laplacian vs covariance",
            expected: t,
            got: laplacian.size(),
        });
    }
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(MtaError::InvalidArgument {
            what: "gamma (must be finite and non-negative)",
            value: gamma,
        });
    }
    if gamma == 0.0 || laplacian.is_zero() {
        return Ok(WeightMatrix {
            entries: DMatrix::identity(t, t),
            gamma,
        });
    }

    let scale = gamma / t as f64;
    let lap = laplacian.entries();
    let diag = sigma.diagonal();
    let mut system = DMatrix::from_fn(t, t, |r, c| scale * diag[r] * lap[(r, c)]);
    for i in 0..t {
        system[(i, i)] += 1.0;
    }
    let solved = system
        .lu()
        .solve(&DMatrix::identity(t, t))
        .ok_or_else(|| MtaError::Internal("dense weight solve failed on valid input".into()))?;
    WeightMatrix::new(solved, gamma)
}

/// Applies `(I + c Sigma L(1 1^T))^{-1}` to `ybar` in O(T) time and memory
/// via the Sherman-Morrison identity, without forming any `T x T` matrix.
///
/// `L(1 1^T) = T I - 1 1^T`, so the system matrix is `Z - x 1^T` with the
/// diagonal `Z = I + c T Sigma` and `x = c Sigma 1`, and
/// `(Z - x 1^T)^{-1} y = Z^{-1} y + Z^{-1} x (1^T Z^{-1} y) / (1 - 1^T Z^{-1} x)`.
pub fn mta_apply_fast(
    sigma: &MeanCovariance,
    scale: f64,
    ybar: &DVector<f64>,
) -> Result<DVector<f64>> {
    let t = sigma.size();
    if ybar.len() != t {
        return Err(MtaError::DimensionMismatch {
            what: "fast-path sample means",
            expected: t,
            got: ybar.len(),
        });
    }
    if !scale.is_finite() || scale < 0.0 {
        return Err(MtaError::InvalidArgument {
            what: "scale (must be finite and non-negative)",
            value: scale,
        });
    }
    if scale == 0.0 {
        return Ok(ybar.clone());
    }

    let diag = sigma.diagonal();
    let tf = t as f64;
    let mut weighted_means = 0.0; // 1^T Z^{-1} y
    let mut weighted_corr = 0.0; // 1^T Z^{-1} x
    let mut base = DVector::zeros(t);
    let mut correction = DVector::zeros(t);
    for i in 0..t {
        let z = 1.0 + scale * tf * diag[i];
        let u = ybar[i] / z;
        let v = scale * diag[i] / z;
        base[i] = u;
        correction[i] = v;
        weighted_means += u;
        weighted_corr += v;
    }
    // Each term of 1^T Z^{-1} x is strictly below 1/T, so the denominator is
    // strictly positive for valid inputs.
    let denom = 1.0 - weighted_corr;
    let gain = weighted_means / denom;
    let mut out = base;
    for i in 0..t {
        out[i] += correction[i] * gain;
        if !out[i].is_finite() {
            return Err(MtaError::Internal(format!(
                "fast-path output {i} is not finite"
            )));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::substream;
    use proptest::prelude::*;
    use rand::Rng;

    fn matrix(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), rows[0].len(), |r, c| rows[r][c])
    }

    #[test]
    fn laplacian_of_empty_graph_is_zero() {
        let a = SimilarityMatrix::new(DMatrix::zeros(2, 2)).unwrap();
        let lap = build_laplacian(&a);
        assert!(lap.is_zero());
    }

    #[test]
    fn laplacian_of_single_edge() {
        let a = SimilarityMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let lap = build_laplacian(&a);
        assert_eq!(lap.entries(), &matrix(&[&[1.0, -1.0], &[-1.0, 1.0]]));
    }

    #[test]
    fn laplacian_symmetrizes_asymmetric_input() {
        let a = SimilarityMatrix::from_rows(&[vec![0.0, 2.0], vec![0.0, 0.0]]).unwrap();
        let lap = build_laplacian(&a);
        assert_eq!(lap.entries(), &matrix(&[&[1.0, -1.0], &[-1.0, 1.0]]));
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        let mut rng = substream(11, &[0]);
        let t = 6;
        let a = SimilarityMatrix::new(DMatrix::from_fn(t, t, |r, c| {
            if r == c {
                0.0
            } else {
                rng.random::<f64>() * 3.0
            }
        }))
        .unwrap();
        let lap = build_laplacian(&a);
        for r in 0..t {
            let sum: f64 = (0..t).map(|c| lap.entries()[(r, c)]).sum();
            assert!(sum.abs() <= 1e-12 * lap.entries().amax().max(1.0));
            for c in 0..t {
                if r == c {
                    assert!(lap.entries()[(r, c)] >= 0.0);
                } else {
                    assert!(lap.entries()[(r, c)] <= 0.0);
                }
            }
        }
    }

    #[test]
    fn similarity_rejects_negative_entry() {
        let err = SimilarityMatrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap_err();
        match err {
            MtaError::InvalidSimilarity { row, col, .. } => {
                assert_eq!((row, col), (0, 1));
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn symmetrization_is_idempotent() {
        let a = SimilarityMatrix::from_rows(&[vec![0.0, 3.0], vec![1.0, 0.0]]).unwrap();
        let once = a.symmetrized();
        let twice = once.symmetrized();
        assert_eq!(once.entries(), twice.entries());
    }

    #[test]
    fn energy_of_constant_function_is_zero() {
        let a = SimilarityMatrix::from_rows(&[vec![0.0, 5.0], vec![5.0, 0.0]]).unwrap();
        let f = DVector::from_element(2, 3.7);
        assert_eq!(graph_energy(&f, &a).unwrap(), 0.0);
    }

    #[test]
    fn energy_of_single_edge() {
        let a = SimilarityMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let f = DVector::from_column_slice(&[0.0, 1.0]);
        assert_eq!(graph_energy(&f, &a).unwrap(), 1.0);
    }

    #[test]
    fn energy_matches_quadratic_form() {
        let mut rng = substream(23, &[0]);
        let t = 6;
        let a = SimilarityMatrix::new(DMatrix::from_fn(t, t, |_, _| rng.random::<f64>() * 2.0))
            .unwrap();
        let f = DVector::from_fn(t, |_, _| rng.random::<f64>() * 4.0 - 2.0);
        let energy = graph_energy(&f, &a).unwrap();
        let lap = build_laplacian(&a);
        let quad = (f.transpose() * lap.entries() * &f)[(0, 0)];
        assert!((energy - quad).abs() <= 1e-10 * quad.abs().max(1.0));
        assert!(energy >= 0.0);
    }

    #[test]
    fn energy_dimension_mismatch_errors() {
        let a = SimilarityMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let f = DVector::from_column_slice(&[0.0, 1.0, 2.0]);
        assert!(graph_energy(&f, &a).is_err());
    }

    #[test]
    fn zero_gamma_gives_identity_weights() {
        let sigma = MeanCovariance::from_slice(&[0.5, 2.0, 1.0]).unwrap();
        let a = SimilarityMatrix::constant(3, 1.0).unwrap();
        let w = mta_weights_dense(&sigma, &build_laplacian(&a), 0.0).unwrap();
        assert_eq!(w.entries_raw(), &DMatrix::identity(3, 3));
    }

    #[test]
    fn two_task_weights_match_hand_solution() {
        let sigma = MeanCovariance::from_slice(&[1.0, 1.0]).unwrap();
        let a = SimilarityMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let w = mta_weights_dense(&sigma, &build_laplacian(&a), 1.0).unwrap();
        let expected = [[0.75, 0.25], [0.25, 0.75]];
        for r in 0..2 {
            for c in 0..2 {
                assert!((w.entry(r, c) - expected[r][c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fast_path_identity_at_zero_scale() {
        let sigma = MeanCovariance::from_slice(&[0.3, 0.9]).unwrap();
        let y = DVector::from_column_slice(&[1.5, -2.5]);
        let out = mta_apply_fast(&sigma, 0.0, &y).unwrap();
        assert_eq!(out, y);
    }

    #[test]
    fn fast_path_two_task_hand_inversion() {
        let sigma = MeanCovariance::from_slice(&[1.0, 1.0]).unwrap();
        let y = DVector::from_column_slice(&[0.0, 1.0]);
        let out = mta_apply_fast(&sigma, 1.0, &y).unwrap();
        assert!((out[0] - 1.0 / 3.0).abs() < 1e-14);
        assert!((out[1] - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn fast_path_matches_dense_at_t100() {
        let mut rng = substream(31, &[4]);
        let t = 100;
        let diag: Vec<f64> = (0..t).map(|_| 0.05 + rng.random::<f64>() * 3.0).collect();
        let sigma = MeanCovariance::from_slice(&diag).unwrap();
        let y = DVector::from_fn(t, |_, _| rng.random::<f64>() * 10.0 - 5.0);
        let scale = 0.7;
        let fast = mta_apply_fast(&sigma, scale, &y).unwrap();

        let ones = SimilarityMatrix::constant(t, 1.0).unwrap();
        let gamma = scale * t as f64;
        let w = mta_weights_dense(&sigma, &build_laplacian(&ones), gamma).unwrap();
        let dense = w.apply(&y).unwrap();
        for i in 0..t {
            assert!((fast[i] - dense[i]).abs() <= 1e-10 * dense[i].abs().max(1.0));
        }
    }

    #[test]
    fn weights_approach_identity_with_many_samples() {
        let a = SimilarityMatrix::constant(5, 1.0).unwrap();
        let lap = build_laplacian(&a);
        let mut last = f64::INFINITY;
        for k in 1..=4 {
            let n = 10f64.powi(k);
            let sigma = MeanCovariance::from_slice(&[1.0 / n; 5]).unwrap();
            let w = mta_weights_dense(&sigma, &lap, 1.0).unwrap();
            let mut norm: f64 = 0.0;
            for r in 0..5 {
                let row_abs: f64 = (0..5)
                    .map(|c| {
                        let id = if r == c { 1.0 } else { 0.0 };
                        (w.entry(r, c) - id).abs()
                    })
                    .sum();
                norm = norm.max(row_abs);
            }
            assert!(norm <= last);
            last = norm;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn weight_rows_are_stochastic(
            t in 1usize..8,
            seed in 0u64..1000,
            gamma in 0.0f64..16.0,
        ) {
            let mut rng = substream(seed, &[9]);
            let a = SimilarityMatrix::new(
                DMatrix::from_fn(t, t, |_, _| rng.random::<f64>() * 2.0),
            ).unwrap();
            let diag: Vec<f64> = (0..t).map(|_| 0.01 + rng.random::<f64>() * 4.0).collect();
            let sigma = MeanCovariance::from_slice(&diag).unwrap();
            let w = mta_weights_dense(&sigma, &build_laplacian(&a), gamma).unwrap();
            for r in 0..t {
                let sum: f64 = (0..t).map(|c| w.entries_raw()[(r, c)]).sum();
                prop_assert!((sum - 1.0).abs() <= ROW_SUM_TOL);
                for c in 0..t {
                    prop_assert!(w.entries_raw()[(r, c)] >= -WEIGHT_DUST);
                    prop_assert!(w.entry(r, c) >= 0.0);
                }
            }
        }

        #[test]
        fn fast_path_matches_dense_small(
            t in 2usize..11,
            seed in 0u64..1000,
            scale in 0.0f64..4.0,
        ) {
            let mut rng = substream(seed, &[10]);
            let diag: Vec<f64> = (0..t).map(|_| 0.05 + rng.random::<f64>() * 2.0).collect();
            let sigma = MeanCovariance::from_slice(&diag).unwrap();
            let y = DVector::from_fn(t, |_, _| rng.random::<f64>() * 6.0 - 3.0);
            let fast = mta_apply_fast(&sigma, scale, &y).unwrap();
            let ones = SimilarityMatrix::constant(t, 1.0).unwrap();
            let w = mta_weights_dense(&sigma, &build_laplacian(&ones), scale * t as f64).unwrap();
            let dense = w.apply(&y).unwrap();
            for i in 0..t {
                prop_assert!((fast[i] - dense[i]).abs() <= 1e-10 * dense[i].abs().max(1.0));
            }
        }
    }
}
