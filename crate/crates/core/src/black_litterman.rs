//! Black-Litterman construction: implied equilibrium returns, view
//! assembly with IC-derived confidences, and the posterior combined return
//! vector and weights.
//!
//! The prior is `pi = lambda * Sigma * w_mkt`. Views enter as a pick matrix
//! `P`, view returns `Q` and a diagonal uncertainty `Omega`; the posterior
//! is
//!
//! ```text
//! E[R] = [(tau Sigma)^-1 + P' Omega^-1 P]^-1 [(tau Sigma)^-1 pi + P' Omega^-1 Q]
//! w    = (lambda Sigma)^-1 E[R]
//! ```
//!
//! `Omega_kk = (1/c - 1) * p_k tau Sigma p_k'` ties view uncertainty to the
//! stated confidence `c`: it vanishes as `c -> 1` and explodes as `c -> 0`,
//! making both limits exact, and because it scales with `tau` the posterior
//! is invariant to `tau` itself. Zero-confidence views are dropped; full
//! confidence uses a floor of `1e-12 * p tau Sigma p'` so `Omega` stays
//! invertible.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::econometrics::CovarianceEstimate;
use crate::error::{Error, Result};
use crate::selection::ViewSignal;

/// Relative floor applied to `Omega` entries of full-confidence views.
const OMEGA_FLOOR: f64 = 1e-12;

/// Prior side of the model: risk aversion, covariance and market weights.
#[derive(Debug, Clone)]
pub struct EquilibriumInput {
    pub risk_aversion: f64,
    pub sigma: CovarianceEstimate,
    pub market_weights: DVector<f64>,
}

impl EquilibriumInput {
    pub fn new(
        risk_aversion: f64,
        sigma: CovarianceEstimate,
        market_weights: DVector<f64>,
    ) -> Result<Self> {
        if !(risk_aversion > 0.0) {
            return Err(Error::InvalidInput(format!(
                "equilibrium input: risk aversion {risk_aversion} must be > 0"
            )));
        }
        let n = market_weights.len();
        if sigma.matrix.nrows() != n || sigma.matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "equilibrium sigma",
                expected: n,
                actual: sigma.matrix.nrows(),
            });
        }
        if (&sigma.matrix - sigma.matrix.transpose()).amax() > 1e-12 {
            return Err(Error::InvalidInput("equilibrium input: sigma not symmetric".into()));
        }
        if (market_weights.sum() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "equilibrium input: market weights sum to {}, expected 1",
                market_weights.sum()
            )));
        }
        Ok(Self { risk_aversion, sigma, market_weights })
    }
}

/// One investor view before assembly into a [`ViewSet`].
#[derive(Debug, Clone)]
pub struct View {
    pub kind: ViewKind,
    /// Expected (out)performance of the view portfolio per period.
    pub expected_return: f64,
    /// Confidence in [0, 1].
    pub confidence: f64,
}

#[derive(Debug, Clone)]
pub enum ViewKind {
    /// The equally weighted group returns `expected_return` (pick row sums
    /// to 1).
    Absolute { assets: Vec<String> },
    /// The equally weighted `long` group outperforms the equally weighted
    /// `short` group by `expected_return` (pick row sums to 0).
    Relative { long: Vec<String>, short: Vec<String> },
}

impl View {
    /// Converts a selection-stage signal into a view: relative when the
    /// signal has a short group, absolute otherwise.
    pub fn from_signal(signal: &ViewSignal) -> Self {
        let kind = match &signal.group_short {
            Some(short) => ViewKind::Relative {
                long: signal.group_long.clone(),
                short: short.clone(),
            },
            None => ViewKind::Absolute { assets: signal.group_long.clone() },
        };
        View {
            kind,
            expected_return: signal.expected_outperformance,
            confidence: signal.confidence,
        }
    }
}

/// Assembled views: pick matrix, view returns, diagonal uncertainty and
/// the confidences that produced them.
#[derive(Debug, Clone)]
pub struct ViewSet {
    /// `K x N` pick matrix.
    pub pick_matrix: DMatrix<f64>,
    /// `K` view returns.
    pub view_returns: DVector<f64>,
    /// Diagonal of `Omega` (strictly positive).
    pub omega_diag: DVector<f64>,
    /// Confidence per retained view.
    pub confidences: Vec<f64>,
    pub tau: f64,
}

impl ViewSet {
    /// A view set with no views (posterior collapses to the prior).
    pub fn empty(n_assets: usize, tau: f64) -> Self {
        ViewSet {
            pick_matrix: DMatrix::zeros(0, n_assets),
            view_returns: DVector::zeros(0),
            omega_diag: DVector::zeros(0),
            confidences: Vec::new(),
            tau,
        }
    }

    pub fn n_views(&self) -> usize {
        self.pick_matrix.nrows()
    }
}

/// Posterior output bundle.
#[derive(Debug, Clone)]
pub struct PosteriorResult {
    pub combined_returns: DVector<f64>,
    pub weights: DVector<f64>,
    pub prior_returns: DVector<f64>,
}

/// Implied excess equilibrium returns `pi = lambda * Sigma * w_mkt`.
pub fn implied_equilibrium_returns(input: &EquilibriumInput) -> Result<DVector<f64>> {
    Ok(&input.sigma.matrix * &input.market_weights * input.risk_aversion)
}

/// Assembles retained views into a [`ViewSet`].
///
/// Pick rows are `+1/|long|` on long members and `-1/|short|` on short
/// members; `Omega_kk = (1/c - 1) * p tau Sigma p'` with the documented
/// floor at `c = 1`. Views with zero confidence are dropped.
pub fn build_views(
    views: &[View],
    universe: &[String],
    tau: f64,
    sigma: &DMatrix<f64>,
) -> Result<ViewSet> {
    if !(tau > 0.0) {
        return Err(Error::InvalidInput(format!("build_views: tau {tau} must be > 0")));
    }
    let n = universe.len();
    if sigma.nrows() != n || sigma.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "build_views sigma",
            expected: n,
            actual: sigma.nrows(),
        });
    }
    let index_of = |asset: &String| -> Result<usize> {
        universe
            .iter()
            .position(|a| a == asset)
            .ok_or_else(|| Error::UnknownAsset(asset.clone()))
    };

    let mut rows: Vec<DVector<f64>> = Vec::new();
    let mut q = Vec::new();
    let mut omega = Vec::new();
    let mut confidences = Vec::new();
    for view in views {
        if !(0.0..=1.0).contains(&view.confidence) {
            return Err(Error::InvalidInput(format!(
                "build_views: confidence {} outside [0, 1]",
                view.confidence
            )));
        }
        if view.confidence == 0.0 {
            continue;
        }
        let mut row = DVector::zeros(n);
        match &view.kind {
            ViewKind::Absolute { assets } => {
                if assets.is_empty() {
                    return Err(Error::InvalidInput("build_views: empty view group".into()));
                }
                for asset in assets {
                    row[index_of(asset)?] += 1.0 / assets.len() as f64;
                }
            }
            ViewKind::Relative { long, short } => {
                if long.is_empty() || short.is_empty() {
                    return Err(Error::InvalidInput("build_views: empty view group".into()));
                }
                if long.iter().any(|a| short.contains(a)) {
                    return Err(Error::InvalidInput(
                        "build_views: long and short memberships overlap".into(),
                    ));
                }
                for asset in long {
                    row[index_of(asset)?] += 1.0 / long.len() as f64;
                }
                for asset in short {
                    row[index_of(asset)?] -= 1.0 / short.len() as f64;
                }
            }
        }
        let view_variance = tau * (row.transpose() * sigma * &row)[(0, 0)];
        if !(view_variance > 0.0) {
            return Err(Error::InvalidInput(
                "build_views: view portfolio has zero variance".into(),
            ));
        }
        let omega_kk = if view.confidence >= 1.0 {
            OMEGA_FLOOR * view_variance
        } else {
            (1.0 / view.confidence - 1.0) * view_variance
        };
        rows.push(row);
        q.push(view.expected_return);
        omega.push(omega_kk);
        confidences.push(view.confidence);
    }

    let k = rows.len();
    if k > n {
        return Err(Error::InvalidInput(format!(
            "build_views: {k} retained views exceed {n} assets"
        )));
    }
    let mut pick_matrix = DMatrix::zeros(k, n);
    for (i, row) in rows.iter().enumerate() {
        pick_matrix.row_mut(i).copy_from(&row.transpose());
    }
    Ok(ViewSet {
        pick_matrix,
        view_returns: DVector::from_vec(q),
        omega_diag: DVector::from_vec(omega),
        confidences,
        tau,
    })
}

fn spd_solve(matrix: DMatrix<f64>, rhs: &DVector<f64>, context: &str) -> Result<DVector<f64>> {
    Cholesky::new(matrix)
        .map(|chol| chol.solve(rhs))
        .ok_or_else(|| Error::Singular(context.to_string()))
}

/// Posterior combined return vector. With no views this is exactly the
/// prior `pi`.
pub fn posterior_returns(views: &ViewSet, eq: &EquilibriumInput) -> Result<DVector<f64>> {
    let pi = implied_equilibrium_returns(eq)?;
    if views.n_views() == 0 {
        return Ok(pi);
    }
    let n = eq.market_weights.len();
    if views.pick_matrix.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "posterior_returns pick matrix",
            expected: n,
            actual: views.pick_matrix.ncols(),
        });
    }
    if views.omega_diag.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::InvalidInput("posterior_returns: omega must be positive".into()));
    }

    let tau_sigma = eq.sigma.conditioned() * views.tau;
    let tau_sigma_inv = Cholesky::new(tau_sigma)
        .ok_or_else(|| Error::Singular("posterior_returns: tau Sigma".into()))?
        .inverse();

    // P' Omega^-1 P and P' Omega^-1 Q with diagonal Omega.
    let k = views.n_views();
    let mut pt_o_p = DMatrix::zeros(n, n);
    let mut pt_o_q = DVector::zeros(n);
    for v in 0..k {
        let row = views.pick_matrix.row(v);
        let inv_omega = 1.0 / views.omega_diag[v];
        for i in 0..n {
            pt_o_q[i] += row[i] * inv_omega * views.view_returns[v];
            for j in 0..n {
                pt_o_p[(i, j)] += row[i] * inv_omega * row[j];
            }
        }
    }

    let lhs = &tau_sigma_inv + pt_o_p;
    let rhs = &tau_sigma_inv * &pi + pt_o_q;
    spd_solve(lhs, &rhs, "posterior_returns: posterior precision")
}

/// Posterior weights `w = (lambda Sigma)^-1 E[R]`.
pub fn posterior_weights(
    combined_returns: &DVector<f64>,
    eq: &EquilibriumInput,
) -> Result<DVector<f64>> {
    if combined_returns.len() != eq.market_weights.len() {
        return Err(Error::DimensionMismatch {
            context: "posterior_weights returns",
            expected: eq.market_weights.len(),
            actual: combined_returns.len(),
        });
    }
    let lambda_sigma = eq.sigma.conditioned() * eq.risk_aversion;
    spd_solve(lambda_sigma, combined_returns, "posterior_weights: lambda Sigma")
}

/// Runs the full posterior pipeline for one view set.
pub fn posterior(views: &ViewSet, eq: &EquilibriumInput) -> Result<PosteriorResult> {
    let prior_returns = implied_equilibrium_returns(eq)?;
    let combined_returns = posterior_returns(views, eq)?;
    let weights = posterior_weights(&combined_returns, eq)?;
    Ok(PosteriorResult { combined_returns, weights, prior_returns })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cov(matrix: DMatrix<f64>) -> CovarianceEstimate {
        let n = matrix.nrows();
        CovarianceEstimate { matrix, mean: DVector::zeros(n) }
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("A{i}")).collect()
    }

    fn two_asset_eq() -> EquilibriumInput {
        EquilibriumInput::new(
            2.5,
            cov(DMatrix::from_row_slice(2, 2, &[0.04, 0.01, 0.01, 0.09])),
            DVector::from_row_slice(&[0.6, 0.4]),
        )
        .unwrap()
    }

    #[test]
    fn implied_returns_identity_sigma() {
        let eq = EquilibriumInput::new(
            1.0,
            cov(DMatrix::identity(2, 2)),
            DVector::from_row_slice(&[0.5, 0.5]),
        )
        .unwrap();
        let pi = implied_equilibrium_returns(&eq).unwrap();
        assert_relative_eq!(pi[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(pi[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn zero_risk_aversion_rejected() {
        let result = EquilibriumInput::new(
            0.0,
            cov(DMatrix::identity(2, 2)),
            DVector::from_row_slice(&[0.5, 0.5]),
        );
        assert!(result.is_err());
    }

    #[test]
    fn implied_returns_hand_oracle() {
        // lambda = 2.5, w = [0.5, 0.3, 0.2]; pi = lambda*Sigma*w row by row.
        let sigma = DMatrix::from_row_slice(
            3,
            3,
            &[0.04, 0.006, 0.012, 0.006, 0.09, 0.018, 0.012, 0.018, 0.16],
        );
        let eq =
            EquilibriumInput::new(2.5, cov(sigma), DVector::from_row_slice(&[0.5, 0.3, 0.2]))
                .unwrap();
        let pi = implied_equilibrium_returns(&eq).unwrap();
        // Row 1: 0.04*0.5 + 0.006*0.3 + 0.012*0.2 = 0.0242; * 2.5 = 0.0605
        assert_relative_eq!(pi[0], 0.0605, epsilon = 1e-12);
        // Row 2: 0.006*0.5 + 0.09*0.3 + 0.018*0.2 = 0.0336; * 2.5 = 0.084
        assert_relative_eq!(pi[1], 0.084, epsilon = 1e-12);
        // Row 3: 0.012*0.5 + 0.018*0.3 + 0.16*0.2 = 0.0434; * 2.5 = 0.1085
        assert_relative_eq!(pi[2], 0.1085, epsilon = 1e-12);
    }

    #[test]
    fn build_views_drops_zero_confidence() {
        let views = vec![View {
            kind: ViewKind::Absolute { assets: vec!["A0".into()] },
            expected_return: 0.05,
            confidence: 0.0,
        }];
        let set = build_views(&views, &names(2), 0.05, &DMatrix::identity(2, 2)).unwrap();
        assert_eq!(set.n_views(), 0);
    }

    #[test]
    fn build_views_relative_row_construction() {
        let sigma = DMatrix::identity(3, 3) * 0.04;
        let views = vec![View {
            kind: ViewKind::Relative { long: vec!["A0".into()], short: vec!["A1".into()] },
            expected_return: 0.02,
            confidence: 0.5,
        }];
        let set = build_views(&views, &names(3), 0.05, &sigma).unwrap();
        assert_eq!(set.n_views(), 1);
        assert_relative_eq!(set.pick_matrix[(0, 0)], 1.0, epsilon = 1e-15);
        assert_relative_eq!(set.pick_matrix[(0, 1)], -1.0, epsilon = 1e-15);
        assert_eq!(set.pick_matrix[(0, 2)], 0.0);
        // Relative pick rows sum to zero.
        assert_relative_eq!(set.pick_matrix.row(0).sum(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn build_views_omega_hand_oracle() {
        // p = [1, 0], tau = 0.05, Sigma[0,0] = 0.4 gives p tau Sigma p' =
        // 0.02; c = 0.5 makes (1/c - 1) = 1, so Omega_kk = 0.02.
        let sigma = DMatrix::from_row_slice(2, 2, &[0.4, 0.0, 0.0, 0.1]);
        let views = vec![View {
            kind: ViewKind::Absolute { assets: vec!["A0".into()] },
            expected_return: 0.03,
            confidence: 0.5,
        }];
        let set = build_views(&views, &names(2), 0.05, &sigma).unwrap();
        assert_relative_eq!(set.omega_diag[0], 0.02, epsilon = 1e-15);
        // Absolute pick rows sum to one.
        assert_relative_eq!(set.pick_matrix.row(0).sum(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn build_views_rejects_overlap_and_unknown() {
        let sigma = DMatrix::identity(2, 2);
        let overlap = vec![View {
            kind: ViewKind::Relative { long: vec!["A0".into()], short: vec!["A0".into()] },
            expected_return: 0.01,
            confidence: 0.5,
        }];
        assert!(build_views(&overlap, &names(2), 0.05, &sigma).is_err());
        let unknown = vec![View {
            kind: ViewKind::Absolute { assets: vec!["ZZ".into()] },
            expected_return: 0.01,
            confidence: 0.5,
        }];
        assert!(matches!(
            build_views(&unknown, &names(2), 0.05, &sigma),
            Err(Error::UnknownAsset(_))
        ));
    }

    #[test]
    fn posterior_no_views_returns_prior_exactly() {
        let eq = two_asset_eq();
        let pi = implied_equilibrium_returns(&eq).unwrap();
        let er = posterior_returns(&ViewSet::empty(2, 0.05), &eq).unwrap();
        assert_eq!(er, pi);
    }

    #[test]
    fn posterior_vanishing_confidence_limit() {
        // Omega scaled by 1e12 ~ no information: posterior stays at the
        // prior.
        let eq = two_asset_eq();
        let sigma_c = eq.sigma.conditioned();
        let views = vec![View {
            kind: ViewKind::Absolute { assets: vec!["A0".into()] },
            expected_return: 0.30,
            confidence: 0.5,
        }];
        let mut set = build_views(&views, &names(2), 0.05, &sigma_c).unwrap();
        set.omega_diag *= 1e12;
        let pi = implied_equilibrium_returns(&eq).unwrap();
        let er = posterior_returns(&set, &eq).unwrap();
        assert!((er - &pi).amax() < 1e-6 * pi.amax());
    }

    /// Scalar-arithmetic oracle for N = 2, one absolute view on asset 0:
    /// every 2x2 inversion done by adjugate, no matrix library involved.
    fn hand_posterior_2x2(
        sigma: [[f64; 2]; 2],
        w_mkt: [f64; 2],
        lambda: f64,
        tau: f64,
        q: f64,
        omega: f64,
    ) -> [f64; 2] {
        let pi = [
            lambda * (sigma[0][0] * w_mkt[0] + sigma[0][1] * w_mkt[1]),
            lambda * (sigma[1][0] * w_mkt[0] + sigma[1][1] * w_mkt[1]),
        ];
        let (a, b, c) = (tau * sigma[0][0], tau * sigma[0][1], tau * sigma[1][1]);
        let det = a * c - b * b;
        // S^-1 for S = tau Sigma.
        let s_inv = [[c / det, -b / det], [-b / det, a / det]];
        // A = S^-1 + p' p / omega with p = [1, 0].
        let a_mat = [[s_inv[0][0] + 1.0 / omega, s_inv[0][1]], [s_inv[1][0], s_inv[1][1]]];
        let rhs = [
            s_inv[0][0] * pi[0] + s_inv[0][1] * pi[1] + q / omega,
            s_inv[1][0] * pi[0] + s_inv[1][1] * pi[1],
        ];
        let det_a = a_mat[0][0] * a_mat[1][1] - a_mat[0][1] * a_mat[1][0];
        [
            (a_mat[1][1] * rhs[0] - a_mat[0][1] * rhs[1]) / det_a,
            (-a_mat[1][0] * rhs[0] + a_mat[0][0] * rhs[1]) / det_a,
        ]
    }

    #[test]
    fn posterior_matches_hand_inversion_oracle() {
        let (lambda, tau, q, confidence) = (2.5, 0.05, 0.08, 0.6);
        let eq = two_asset_eq();
        let sigma_c = eq.sigma.conditioned();
        let views = vec![View {
            kind: ViewKind::Absolute { assets: vec!["A0".into()] },
            expected_return: q,
            confidence,
        }];
        let set = build_views(&views, &names(2), tau, &sigma_c).unwrap();
        let er = posterior_returns(&set, &eq).unwrap();

        let omega = (1.0 / confidence - 1.0) * tau * sigma_c[(0, 0)];
        let sigma_hand = [
            [sigma_c[(0, 0)], sigma_c[(0, 1)]],
            [sigma_c[(1, 0)], sigma_c[(1, 1)]],
        ];
        let oracle = hand_posterior_2x2(sigma_hand, [0.6, 0.4], lambda, tau, q, omega);
        assert_relative_eq!(er[0], oracle[0], epsilon = 1e-10);
        assert_relative_eq!(er[1], oracle[1], epsilon = 1e-10);
    }

    #[test]
    fn posterior_weights_round_trip_and_zero() {
        let eq = two_asset_eq();
        let pi = implied_equilibrium_returns(&eq).unwrap();
        let w = posterior_weights(&pi, &eq).unwrap();
        assert!((&w - &eq.market_weights).amax() < 1e-9);

        let zero = posterior_weights(&DVector::zeros(2), &eq).unwrap();
        assert!(zero.amax() < 1e-15);
    }

    #[test]
    fn posterior_weights_bullish_view_tilts_and_matches_solver_oracle() {
        // 3 assets, one bullish absolute view on A0.
        let sigma = DMatrix::from_row_slice(
            3,
            3,
            &[0.04, 0.006, 0.012, 0.006, 0.09, 0.018, 0.012, 0.018, 0.16],
        );
        let eq =
            EquilibriumInput::new(2.5, cov(sigma), DVector::from_row_slice(&[0.5, 0.3, 0.2]))
                .unwrap();
        let sigma_c = eq.sigma.conditioned();
        let pi = implied_equilibrium_returns(&eq).unwrap();
        let views = vec![View {
            kind: ViewKind::Absolute { assets: vec!["A0".into()] },
            expected_return: pi[0] + 0.05,
            confidence: 0.7,
        }];
        let set = build_views(&views, &names(3), 0.05, &sigma_c).unwrap();
        let er = posterior_returns(&set, &eq).unwrap();
        let w = posterior_weights(&er, &eq).unwrap();
        assert!(w[0] > eq.market_weights[0], "bullish view must tilt toward A0");

        // Independent oracle: Gaussian elimination on (lambda Sigma) w = E[R].
        let mut aug = [[0.0f64; 4]; 3];
        for i in 0..3 {
            for j in 0..3 {
                aug[i][j] = 2.5 * sigma_c[(i, j)];
            }
            aug[i][3] = er[i];
        }
        for col in 0..3 {
            let pivot = (col..3)
                .max_by(|&a, &b| aug[a][col].abs().partial_cmp(&aug[b][col].abs()).unwrap())
                .unwrap();
            aug.swap(col, pivot);
            for row in (col + 1)..3 {
                let f = aug[row][col] / aug[col][col];
                for j in col..4 {
                    aug[row][j] -= f * aug[col][j];
                }
            }
        }
        let mut oracle = [0.0f64; 3];
        for i in (0..3).rev() {
            let mut acc = aug[i][3];
            for j in (i + 1)..3 {
                acc -= aug[i][j] * oracle[j];
            }
            oracle[i] = acc / aug[i][i];
        }
        for i in 0..3 {
            assert_relative_eq!(w[i], oracle[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn confidence_monotonicity_in_viewed_asset_weight() {
        let eq = two_asset_eq();
        let sigma_c = eq.sigma.conditioned();
        let pi = implied_equilibrium_returns(&eq).unwrap();
        let mut last = f64::NEG_INFINITY;
        for step in 1..=9 {
            let confidence = step as f64 / 10.0;
            let views = vec![View {
                kind: ViewKind::Absolute { assets: vec!["A0".into()] },
                expected_return: pi[0] + 0.04,
                confidence,
            }];
            let set = build_views(&views, &names(2), 0.05, &sigma_c).unwrap();
            let result = posterior(&set, &eq).unwrap();
            assert!(result.weights[0] >= last, "weight not monotone at c = {confidence}");
            last = result.weights[0];
        }
    }

    #[test]
    fn tau_invariance_of_posterior_returns() {
        let eq = two_asset_eq();
        let sigma_c = eq.sigma.conditioned();
        let mut results = Vec::new();
        for tau in [0.01, 0.05, 0.5] {
            let views = vec![View {
                kind: ViewKind::Relative { long: vec!["A0".into()], short: vec!["A1".into()] },
                expected_return: 0.02,
                confidence: 0.4,
            }];
            let set = build_views(&views, &names(2), tau, &sigma_c).unwrap();
            results.push(posterior_returns(&set, &eq).unwrap());
        }
        for pair in results.windows(2) {
            let rel = (&pair[1] - &pair[0]).amax() / pair[0].amax();
            assert!(rel < 1e-8, "tau sensitivity {rel}");
        }
    }

    #[test]
    fn blend_boundedness_single_absolute_view() {
        let eq = two_asset_eq();
        let sigma_c = eq.sigma.conditioned();
        let pi = implied_equilibrium_returns(&eq).unwrap();
        for q_offset in [-0.05, 0.03, 0.10] {
            let q = pi[0] + q_offset;
            let views = vec![View {
                kind: ViewKind::Absolute { assets: vec!["A0".into()] },
                expected_return: q,
                confidence: 0.5,
            }];
            let set = build_views(&views, &names(2), 0.05, &sigma_c).unwrap();
            let er = posterior_returns(&set, &eq).unwrap();
            let (lo, hi) = (pi[0].min(q), pi[0].max(q));
            assert!(
                er[0] >= lo - 1e-12 && er[0] <= hi + 1e-12,
                "posterior {} outside [{lo}, {hi}]",
                er[0]
            );
        }
    }

    #[test]
    fn full_confidence_uses_floor_not_singular_omega() {
        let eq = two_asset_eq();
        let sigma_c = eq.sigma.conditioned();
        let views = vec![View {
            kind: ViewKind::Absolute { assets: vec!["A0".into()] },
            expected_return: 0.10,
            confidence: 1.0,
        }];
        let set = build_views(&views, &names(2), 0.05, &sigma_c).unwrap();
        assert!(set.omega_diag[0] > 0.0);
        let er = posterior_returns(&set, &eq).unwrap();
        // Full confidence pins the viewed asset's posterior to the view.
        assert_relative_eq!(er[0], 0.10, max_relative = 1e-6);
    }
}
