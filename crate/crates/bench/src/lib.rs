//! Benchmark input builders shared by the criterion targets.

use nalgebra::{DMatrix, DVector};

use quantfolio_core::black_litterman::{EquilibriumInput, View, ViewKind};
use quantfolio_core::econometrics::CovarianceEstimate;
use quantfolio_core::marketdata::{compute_returns, synthetic_market, ReturnPanel, SyntheticSpec};
use quantfolio_core::rebalancing::{ActionSpace, DpConfig, QuadraticUtility, ReturnModel};

/// Deterministic return panel of the given size.
pub fn return_panel(assets: usize, periods: usize, seed: u64) -> ReturnPanel {
    let market = synthetic_market(seed, &SyntheticSpec::uniform(assets, periods + 1, 0.0002, 0.01))
        .expect("synthetic market");
    compute_returns(&market.prices).expect("returns")
}

/// Equilibrium input over a synthetic universe plus a small view list.
pub fn equilibrium(assets: usize) -> (EquilibriumInput, Vec<String>, Vec<View>) {
    let panel = return_panel(assets, 260, 11);
    let sigma = quantfolio_core::econometrics::covariance_of(panel.returns()).expect("covariance");
    let weights = DVector::from_element(assets, 1.0 / assets as f64);
    let eq = EquilibriumInput::new(2.5, sigma, weights).expect("equilibrium");
    let universe = panel.assets().to_vec();
    let views = vec![
        View {
            kind: ViewKind::Relative {
                long: universe[..2].to_vec(),
                short: universe[assets - 2..].to_vec(),
            },
            expected_return: 0.0005,
            confidence: 0.5,
        },
        View {
            kind: ViewKind::Absolute { assets: vec![universe[assets / 2].clone()] },
            expected_return: 0.0002,
            confidence: 0.3,
        },
    ];
    (eq, universe, views)
}

/// Conditioned covariance for the same universe, for view assembly.
pub fn conditioned_sigma(eq: &EquilibriumInput) -> DMatrix<f64> {
    eq.sigma.conditioned()
}

/// A small two-asset DP instance with a discrete shock model.
pub fn dp_instance() -> (DpConfig, ReturnModel) {
    let config = DpConfig {
        target_weights: DVector::from_row_slice(&[0.5, 0.5]),
        grid_points: 11,
        action_space: ActionSpace::GridTargets,
        cost_rate: 0.002,
        utility: QuadraticUtility {
            expected_returns: DVector::from_row_slice(&[0.01, 0.01]),
            covariance: DMatrix::from_row_slice(2, 2, &[0.02, 0.0, 0.0, 0.02]),
            risk_aversion: 4.0,
        },
        paths: 1,
        convergence_tol: 1e-9,
        max_iterations: 10_000,
        discount: 0.95,
        horizon: None,
        seed: 7,
    };
    let model = ReturnModel::Discrete {
        outcomes: vec![
            (DVector::from_row_slice(&[0.12, -0.04]), 0.45),
            (DVector::from_row_slice(&[-0.06, 0.05]), 0.55),
        ],
    };
    (config, model)
}
