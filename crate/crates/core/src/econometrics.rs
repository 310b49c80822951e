//! Shared numerical primitives: ordinary least squares, rank correlation
//! and covariance estimation.
//!
//! Every estimating module in the crate funnels its regressions through
//! [`ols`] so that coefficient, standard-error and residual conventions
//! are identical everywhere (residual variance uses the `n - k`
//! denominator, R-squared is centered when the design has an intercept).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value cutoff below which a design is treated as rank
/// deficient.
const RANK_TOL: f64 = 1e-10;

/// Condition numbers above this trigger a warning (no automatic correction
/// is attempted).
const CONDITION_WARN: f64 = 1e8;

/// Output of an ordinary least squares fit.
#[derive(Debug, Clone)]
pub struct RegressionFit {
    /// Estimated coefficients, in design-column order (intercept first when
    /// the design has one).
    pub coefficients: DVector<f64>,
    /// Per-observation residuals `y - X beta`.
    pub residuals: DVector<f64>,
    /// Standard errors of the coefficients.
    pub standard_errors: DVector<f64>,
    /// Coefficient t-statistics (`beta / se`).
    pub t_statistics: DVector<f64>,
    /// Centered R-squared when the design contains an intercept column,
    /// uncentered otherwise.
    pub r_squared: f64,
    /// Residual variance with the `n - k` denominator.
    pub residual_variance: f64,
}

/// Sample covariance matrix together with the mean vector it was centered on.
#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    /// Symmetric covariance matrix.
    pub matrix: DMatrix<f64>,
    /// Per-column sample means.
    pub mean: DVector<f64>,
}

impl CovarianceEstimate {
    /// Ridge magnitude used by [`Self::conditioned`]: `1e-10 * trace / n`.
    pub fn ridge_epsilon(&self) -> f64 {
        let n = self.matrix.nrows();
        if n == 0 {
            return 0.0;
        }
        1e-10 * self.matrix.trace() / n as f64
    }

    /// Covariance with a small ridge added to the diagonal so that the
    /// result admits a Cholesky factorization even for tiny universes or
    /// near-collinear columns. All downstream inversions go through this.
    pub fn conditioned(&self) -> DMatrix<f64> {
        let eps = self.ridge_epsilon();
        let n = self.matrix.nrows();
        &self.matrix + DMatrix::identity(n, n) * eps
    }
}

/// Ordinary least squares of `response` on the columns of `design`.
///
/// Requires `n > k` and a full-column-rank design. Solved through the SVD;
/// designs with condition number above `1e8` log a warning.
pub fn ols(design: &DMatrix<f64>, response: &DVector<f64>) -> Result<RegressionFit> {
    let n = design.nrows();
    let k = design.ncols();
    if response.len() != n {
        return Err(Error::DimensionMismatch {
            context: "ols response",
            expected: n,
            actual: response.len(),
        });
    }
    if k == 0 {
        return Err(Error::InvalidInput("ols: empty design matrix".into()));
    }
    if n <= k {
        return Err(Error::InvalidInput(format!(
            "ols: need more observations than regressors (n={n}, k={k})"
        )));
    }

    let svd = design.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let min_sv = svd.singular_values.min();
    if !(max_sv > 0.0) || min_sv < RANK_TOL * max_sv {
        return Err(Error::Singular("ols design".into()));
    }
    if max_sv / min_sv > CONDITION_WARN {
        log::warn!(
            "ols: design condition number {:.3e} exceeds {:.0e}; estimates may be unstable",
            max_sv / min_sv,
            CONDITION_WARN
        );
    }

    let coefficients = svd
        .solve(response, 0.0)
        .map_err(|e| Error::Singular(format!("ols solve: {e}")))?;
    let fitted = design * &coefficients;
    let residuals = response - fitted;

    let dof = (n - k) as f64;
    let ss_res = residuals.norm_squared();
    let residual_variance = ss_res / dof;

    // (X'X)^-1 = V S^-2 V' from the SVD factors.
    let v_t = svd.v_t.as_ref().expect("svd computed with v_t");
    let mut xtx_inv = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let mut acc = 0.0;
            for r in 0..k {
                let s = svd.singular_values[r];
                acc += v_t[(r, i)] * v_t[(r, j)] / (s * s);
            }
            xtx_inv[(i, j)] = acc;
        }
    }

    let standard_errors =
        DVector::from_fn(k, |i, _| (residual_variance * xtx_inv[(i, i)]).sqrt());
    let t_statistics = DVector::from_fn(k, |i, _| {
        let se = standard_errors[i];
        if se > 0.0 {
            coefficients[i] / se
        } else {
            f64::INFINITY * coefficients[i].signum()
        }
    });

    // Center the total sum of squares only when an intercept is present.
    let has_intercept = (0..k).any(|j| {
        let col = design.column(j);
        let first = col[0];
        first != 0.0 && col.iter().all(|&v| v == first)
    });
    let ss_tot = if has_intercept {
        let mean = response.mean();
        response.iter().map(|y| (y - mean).powi(2)).sum::<f64>()
    } else {
        response.norm_squared()
    };
    let r_squared = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };

    Ok(RegressionFit {
        coefficients,
        residuals,
        standard_errors,
        t_statistics,
        r_squared,
        residual_variance,
    })
}

/// OLS with an intercept column prepended to `regressors`.
pub fn ols_with_intercept(
    regressors: &DMatrix<f64>,
    response: &DVector<f64>,
) -> Result<RegressionFit> {
    let n = regressors.nrows();
    let k = regressors.ncols();
    let mut design = DMatrix::zeros(n, k + 1);
    design.column_mut(0).fill(1.0);
    design.view_mut((0, 1), (n, k)).copy_from(regressors);
    ols(&design, response)
}

/// Average ranks (1-based) of `values`; ties receive the mean of the ranks
/// they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));

    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 averaged over the tied block
        let avg = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation of two equal-length samples.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "pearson",
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::InvalidInput("pearson: need at least 2 observations".into()));
    }
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (x, y) in a.iter().zip(b) {
        let da = x - mean_a;
        let db = y - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Err(Error::InvalidInput("pearson: zero variance input".into()));
    }
    Ok(cov / (var_a.sqrt() * var_b.sqrt()))
}

/// Spearman rank correlation: Pearson correlation of average-rank vectors.
/// Identical and exactly reversed orderings return exactly 1 and -1
/// (ranks are dyadic, so the comparisons are exact).
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "spearman",
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::InvalidInput("spearman: need at least 2 observations".into()));
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    if ra.iter().all(|&r| r == ra[0]) || rb.iter().all(|&r| r == rb[0]) {
        return Err(Error::InvalidInput(
            "spearman: zero rank variance (all-constant input)".into(),
        ));
    }
    if ra == rb {
        return Ok(1.0);
    }
    let top = (a.len() + 1) as f64;
    if ra.iter().zip(&rb).all(|(x, y)| x + y == top) {
        return Ok(-1.0);
    }
    pearson(&ra, &rb)
}

/// Sample covariance (`n - 1` denominator) of the columns of `observations`,
/// one row per period. The output is exactly symmetric.
pub fn covariance_of(observations: &DMatrix<f64>) -> Result<CovarianceEstimate> {
    let n = observations.nrows();
    let p = observations.ncols();
    if n < 2 {
        return Err(Error::InvalidInput(
            "covariance: need at least 2 observations".into(),
        ));
    }
    let mean = DVector::from_fn(p, |j, _| observations.column(j).sum() / n as f64);
    let mut matrix = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let mut acc = 0.0;
            for t in 0..n {
                acc += (observations[(t, i)] - mean[i]) * (observations[(t, j)] - mean[j]);
            }
            let c = acc / (n - 1) as f64;
            matrix[(i, j)] = c;
            matrix[(j, i)] = c;
        }
    }
    Ok(CovarianceEstimate { matrix, mean })
}

/// Sample standard deviation with the `n - 1` denominator.
pub fn sample_std(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::InvalidInput(
            "sample_std: need at least 2 observations".into(),
        ));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    Ok((ss / (n - 1.0)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn design_012() -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0])
    }

    #[test]
    fn ols_exact_linear_data() {
        let y = DVector::from_row_slice(&[1.0, 2.0, 3.0]);
        let fit = ols(&design_012(), &y).unwrap();
        assert_relative_eq!(fit.coefficients[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(fit.coefficients[1], 1.0, epsilon = 1e-12);
        assert!(fit.residuals.amax() < 1e-12);
        assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ols_intercept_only_constant_response() {
        let design = DMatrix::from_element(4, 1, 1.0);
        let y = DVector::from_element(4, 3.25);
        let fit = ols(&design, &y).unwrap();
        assert_relative_eq!(fit.coefficients[0], 3.25, epsilon = 1e-14);
    }

    #[test]
    fn ols_hand_solved_normal_equations() {
        // X'X = [[3,3],[3,5]], X'y = [7,10]; beta = (5/6, 3/2).
        // Residuals (1/6, -1/3, 1/6); sigma^2 = 1/6;
        // var(beta) = sigma^2 * diag([5/6, 1/2]).
        let y = DVector::from_row_slice(&[1.0, 2.0, 4.0]);
        let fit = ols(&design_012(), &y).unwrap();
        assert_relative_eq!(fit.coefficients[0], 5.0 / 6.0, epsilon = 1e-12);
        assert_relative_eq!(fit.coefficients[1], 1.5, epsilon = 1e-12);
        assert_relative_eq!(fit.residual_variance, 1.0 / 6.0, epsilon = 1e-12);
        assert_relative_eq!(fit.standard_errors[0], (5.0 / 36.0f64).sqrt(), epsilon = 1e-12);
        assert_relative_eq!(fit.standard_errors[1], (1.0 / 12.0f64).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn ols_rejects_rank_deficiency_and_short_samples() {
        let design = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        let y = DVector::from_row_slice(&[1.0, 2.0, 3.0]);
        assert!(matches!(ols(&design, &y), Err(Error::Singular(_))));

        let y2 = DVector::from_row_slice(&[1.0, 2.0]);
        let d2 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        assert!(matches!(ols(&d2, &y2), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn ols_residuals_orthogonal_to_design() {
        let design = DMatrix::from_fn(40, 3, |i, j| ((i * 7 + j * 13) % 11) as f64 + (j == 0) as u8 as f64);
        let y = DVector::from_fn(40, |i, _| ((i * 3) % 5) as f64 - 1.0);
        let fit = ols(&design, &y).unwrap();
        for j in 0..3 {
            let dot: f64 = design.column(j).dot(&fit.residuals);
            assert!(dot.abs() < 1e-8, "column {j} dot {dot}");
        }
    }

    #[test]
    fn ols_recovers_generating_coefficients_exactly() {
        let design = DMatrix::from_fn(25, 3, |i, j| match j {
            0 => 1.0,
            1 => (i as f64 * 0.37).sin(),
            _ => i as f64 / 10.0,
        });
        let beta = DVector::from_row_slice(&[0.5, -1.25, 2.0]);
        let y = &design * &beta;
        let fit = ols(&design, &y).unwrap();
        assert!((fit.coefficients - beta).amax() < 1e-10);
    }

    #[test]
    fn spearman_identical_and_reversed() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [4.0, 3.0, 2.0, 1.0];
        assert_relative_eq!(spearman(&a, &a).unwrap(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(spearman(&a, &b).unwrap(), -1.0, epsilon = 1e-14);
    }

    #[test]
    fn spearman_ties_get_average_ranks() {
        // ranks a = [1, 2.5, 2.5, 4], ranks b = [1, 3, 2, 4];
        // Pearson of those is 1.5/sqrt(1.5 * 5/3).
        let a = [1.0, 2.0, 2.0, 4.0];
        let b = [1.0, 3.0, 2.0, 4.0];
        let expected = 1.5 / (1.5f64 * 5.0 / 3.0).sqrt();
        assert_relative_eq!(spearman(&a, &b).unwrap(), expected, epsilon = 1e-12);
        assert_relative_eq!(spearman(&a, &b).unwrap(), 0.9486832980505138, epsilon = 1e-12);
    }

    #[test]
    fn spearman_errors() {
        assert!(spearman(&[1.0, 2.0], &[1.0]).is_err());
        assert!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn spearman_monotone_invariance() {
        let a = [0.3, -1.2, 2.4, 0.7, 0.0];
        let b = [1.0, 0.5, 3.0, -2.0, 0.1];
        let base = spearman(&a, &b).unwrap();
        let a_t: Vec<f64> = a.iter().map(|x| (3.0 * x).exp()).collect();
        let b_t: Vec<f64> = b.iter().map(|x| x.powi(3) + 10.0 * x).collect();
        assert_relative_eq!(spearman(&a_t, &b_t).unwrap(), base, epsilon = 1e-12);
    }

    #[test]
    fn covariance_brute_force_oracle() {
        let obs = DMatrix::from_row_slice(
            5,
            3,
            &[
                0.01, -0.02, 0.005, //
                0.03, 0.01, -0.01, //
                -0.02, 0.00, 0.02, //
                0.015, -0.01, 0.00, //
                0.00, 0.02, -0.005,
            ],
        );
        let est = covariance_of(&obs).unwrap();
        // Definitional oracle: sum((x - xbar)(y - ybar)) / (n - 1) per cell.
        for i in 0..3 {
            for j in 0..3 {
                let xi: Vec<f64> = (0..5).map(|t| obs[(t, i)]).collect();
                let xj: Vec<f64> = (0..5).map(|t| obs[(t, j)]).collect();
                let mi = xi.iter().sum::<f64>() / 5.0;
                let mj = xj.iter().sum::<f64>() / 5.0;
                let expect: f64 = xi
                    .iter()
                    .zip(&xj)
                    .map(|(a, b)| (a - mi) * (b - mj))
                    .sum::<f64>()
                    / 4.0;
                assert_relative_eq!(est.matrix[(i, j)], expect, epsilon = 1e-15);
            }
        }
        assert_eq!(est.matrix, est.matrix.transpose());
    }

    #[test]
    fn covariance_identical_columns_and_constants() {
        let obs = DMatrix::from_fn(6, 2, |i, _| (i as f64 * 0.711).sin());
        let est = covariance_of(&obs).unwrap();
        assert_relative_eq!(est.matrix[(0, 1)], est.matrix[(0, 0)], epsilon = 1e-15);

        let obs_const = DMatrix::from_fn(6, 2, |i, j| if j == 0 { 2.0 } else { i as f64 });
        let est = covariance_of(&obs_const).unwrap();
        assert_eq!(est.matrix[(0, 0)], 0.0);
        assert_eq!(est.matrix[(0, 1)], 0.0);
    }

    #[test]
    fn covariance_single_observation_rejected() {
        let obs = DMatrix::from_row_slice(1, 2, &[0.1, 0.2]);
        assert!(covariance_of(&obs).is_err());
    }

    #[test]
    fn conditioned_covariance_admits_cholesky() {
        // Two perfectly collinear columns make the raw matrix singular.
        let obs = DMatrix::from_fn(8, 2, |i, j| (i as f64).sin() * if j == 0 { 1.0 } else { 2.0 });
        let est = covariance_of(&obs).unwrap();
        assert!(nalgebra::Cholesky::new(est.conditioned()).is_some());
    }
}
