//! Rebalancing: the analytic trigger point, tracking error, band and
//! periodic policies, and a simulation-based dynamic-programming
//! rebalancer with a policy-comparison backtester.
//!
//! The DP treats portfolio weights as the state. One step is
//! `w' = renorm((1 + n) .* (w + u))` where `n` is the per-asset return
//! shock and `u` the trade; renormalizing keeps the state on the simplex
//! (the raw multiplicative transition would leave it). Per-period cost is
//! `G(w, u) = cost_rate * |u|_1 + eps(w + u)` where `eps` is the
//! risk-adjusted-return shortfall `U(w*) - U(w)` under a quadratic utility
//! `U(w) = mu'w - (a/2) w' Sigma w`; it is exactly zero at the target.
//! Value iteration runs either to the discounted fixed point (infinite
//! horizon) or as backward induction over a finite horizon; expectations
//! over the shock are exact for discrete distributions and Monte-Carlo
//! with a fixed seed (common random numbers across sweeps) for lognormal
//! ones. Off-grid next states are valued by multilinear interpolation.
//! Argmin ties break toward the smallest-magnitude trade.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::econometrics::sample_std;
use crate::error::{Error, Result};

/// Inputs of the analytic rebalancing trigger for one asset.
#[derive(Debug, Clone, Copy)]
pub struct TriggerInput {
    /// Risk tolerance `K` (> 0).
    pub risk_tolerance: f64,
    /// Transaction cost for the asset, as a return fraction (>= 0).
    pub cost: f64,
    /// Asset volatility.
    pub sigma_asset: f64,
    /// Portfolio volatility.
    pub sigma_portfolio: f64,
    /// Correlation between the asset and the portfolio, in [-1, 1].
    pub correlation: f64,
}

/// Trigger value `K C / (sigma_i^2 + sigma_p^2 - 2 sigma_i sigma_p rho)`;
/// rebalancing is warranted when the value is below one.
pub fn trigger_point(input: &TriggerInput) -> Result<f64> {
    if !(input.risk_tolerance > 0.0) {
        return Err(Error::InvalidInput("trigger_point: risk tolerance must be > 0".into()));
    }
    if input.cost < 0.0 {
        return Err(Error::InvalidInput("trigger_point: cost must be >= 0".into()));
    }
    if input.sigma_asset < 0.0 || input.sigma_portfolio < 0.0 {
        return Err(Error::InvalidInput("trigger_point: volatilities must be >= 0".into()));
    }
    if input.correlation.abs() > 1.0 {
        return Err(Error::InvalidInput("trigger_point: correlation outside [-1, 1]".into()));
    }
    let denom = input.sigma_asset * input.sigma_asset
        + input.sigma_portfolio * input.sigma_portfolio
        - 2.0 * input.sigma_asset * input.sigma_portfolio * input.correlation;
    if !(denom > 0.0) {
        return Err(Error::InvalidInput(format!(
            "trigger_point: degenerate denominator {denom} (sigma_i = sigma_p with rho = 1)"
        )));
    }
    Ok(input.risk_tolerance * input.cost / denom)
}

/// Sample standard deviation of active returns (portfolio minus benchmark).
pub fn tracking_error(portfolio_returns: &[f64], benchmark_returns: &[f64]) -> Result<f64> {
    if portfolio_returns.len() != benchmark_returns.len() {
        return Err(Error::DimensionMismatch {
            context: "tracking_error",
            expected: portfolio_returns.len(),
            actual: benchmark_returns.len(),
        });
    }
    let active: Vec<f64> = portfolio_returns
        .iter()
        .zip(benchmark_returns)
        .map(|(p, b)| p - b)
        .collect();
    sample_std(&active)
}

/// Outcome of a policy evaluation at one point in time.
#[derive(Debug, Clone)]
pub struct PolicyDecision {
    pub rebalance: bool,
    /// Weight adjustments; all zero when `rebalance` is false.
    pub trades: DVector<f64>,
    targets: Option<DVector<f64>>,
}

impl PolicyDecision {
    fn hold(n: usize) -> Self {
        PolicyDecision { rebalance: false, trades: DVector::zeros(n), targets: None }
    }

    fn to_targets(weights: &DVector<f64>, targets: &DVector<f64>) -> Self {
        PolicyDecision {
            rebalance: true,
            trades: targets - weights,
            targets: Some(targets.clone()),
        }
    }

    /// Post-trade weights. When the decision rebalances toward a target
    /// vector the result is that vector itself, so applying a decision
    /// lands exactly on target with no float drift.
    pub fn apply(&self, weights: &DVector<f64>) -> DVector<f64> {
        match &self.targets {
            Some(t) => t.clone(),
            None => weights + &self.trades,
        }
    }
}

/// Rebalance to targets iff any weight has drifted strictly beyond `band`.
pub fn band_policy(
    weights: &DVector<f64>,
    targets: &DVector<f64>,
    band: f64,
) -> Result<PolicyDecision> {
    if weights.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            context: "band_policy",
            expected: targets.len(),
            actual: weights.len(),
        });
    }
    if !(band > 0.0) {
        return Err(Error::InvalidInput("band_policy: band must be > 0".into()));
    }
    let breached = weights
        .iter()
        .zip(targets.iter())
        .any(|(w, t)| (w - t).abs() > band);
    Ok(if breached {
        PolicyDecision::to_targets(weights, targets)
    } else {
        PolicyDecision::hold(weights.len())
    })
}

/// Rebalance to targets iff `t mod period == 0`.
pub fn periodic_policy(
    t: usize,
    period: usize,
    weights: &DVector<f64>,
    targets: &DVector<f64>,
) -> Result<PolicyDecision> {
    if period < 1 {
        return Err(Error::InvalidInput("periodic_policy: period must be >= 1".into()));
    }
    if weights.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            context: "periodic_policy",
            expected: targets.len(),
            actual: weights.len(),
        });
    }
    Ok(if t % period == 0 {
        PolicyDecision::to_targets(weights, targets)
    } else {
        PolicyDecision::hold(weights.len())
    })
}

/// Per-asset trigger evaluation: the portfolio rebalances to targets if
/// any asset's trigger point falls below one.
pub fn trigger_policy(
    weights: &DVector<f64>,
    targets: &DVector<f64>,
    inputs: &[TriggerInput],
) -> Result<PolicyDecision> {
    if inputs.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            context: "trigger_policy",
            expected: weights.len(),
            actual: inputs.len(),
        });
    }
    let mut fire = false;
    for input in inputs {
        if trigger_point(input)? < 1.0 {
            fire = true;
        }
    }
    Ok(if fire {
        PolicyDecision::to_targets(weights, targets)
    } else {
        PolicyDecision::hold(weights.len())
    })
}

/// Distribution of the per-period, per-asset return shock `n_t`.
#[derive(Debug, Clone)]
pub enum ReturnModel {
    /// Finite outcome set with probabilities; expectations are exact.
    Discrete { outcomes: Vec<(DVector<f64>, f64)> },
    /// Independent lognormal gross returns per asset:
    /// `1 + n = exp(drift + volatility * z)`.
    Lognormal { drift: DVector<f64>, volatility: DVector<f64> },
}

impl ReturnModel {
    /// Outcome/probability pairs used for DP expectations. Lognormal models
    /// are discretized into `paths` Monte-Carlo draws from `seed`, fixed
    /// for the whole solve (common random numbers).
    fn outcomes(
        &self,
        n_assets: usize,
        paths: usize,
        seed: u64,
    ) -> Result<Vec<(DVector<f64>, f64)>> {
        match self {
            ReturnModel::Discrete { outcomes } => {
                if outcomes.is_empty() {
                    return Err(Error::InvalidInput("return model: no outcomes".into()));
                }
                let total: f64 = outcomes.iter().map(|(_, p)| p).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidInput(format!(
                        "return model: probabilities sum to {total}"
                    )));
                }
                for (shock, p) in outcomes {
                    if shock.len() != n_assets {
                        return Err(Error::DimensionMismatch {
                            context: "return model outcome",
                            expected: n_assets,
                            actual: shock.len(),
                        });
                    }
                    if !(*p > 0.0) || shock.iter().any(|&n| !(n > -1.0)) {
                        return Err(Error::InvalidInput(
                            "return model: outcomes need p > 0 and n > -1".into(),
                        ));
                    }
                }
                Ok(outcomes.clone())
            }
            ReturnModel::Lognormal { drift, volatility } => {
                if drift.len() != n_assets || volatility.len() != n_assets {
                    return Err(Error::DimensionMismatch {
                        context: "return model lognormal",
                        expected: n_assets,
                        actual: drift.len(),
                    });
                }
                if volatility.iter().any(|&v| v < 0.0) {
                    return Err(Error::InvalidInput("return model: negative volatility".into()));
                }
                if paths < 1 {
                    return Err(Error::InvalidInput("return model: paths must be >= 1".into()));
                }
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                let prob = 1.0 / paths as f64;
                let mut out = Vec::with_capacity(paths);
                for _ in 0..paths {
                    let shock = DVector::from_fn(n_assets, |i, _| {
                        (drift[i] + volatility[i] * standard_normal(&mut rng)).exp() - 1.0
                    });
                    out.push((shock, prob));
                }
                Ok(out)
            }
        }
    }

    /// Draws one period's shock during simulation.
    fn sample<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        match self {
            ReturnModel::Discrete { outcomes } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (shock, p) in outcomes {
                    acc += p;
                    if u < acc {
                        return shock.clone();
                    }
                }
                outcomes.last().expect("non-empty").0.clone()
            }
            ReturnModel::Lognormal { drift, volatility } => {
                DVector::from_fn(drift.len(), |i, _| {
                    (drift[i] + volatility[i] * standard_normal(rng)).exp() - 1.0
                })
            }
        }
    }
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u1: f64 = rng.random();
        if u1 > 0.0 {
            let u2: f64 = rng.random();
            return (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        }
    }
}

/// Quadratic utility `U(w) = mu'w - (a/2) w' Sigma w`; the tracking penalty
/// is the shortfall `eps(w) = U(target) - U(w)`, zero exactly at the
/// target. For the penalty to stay non-negative the target should be the
/// utility maximizer on the simplex.
#[derive(Debug, Clone)]
pub struct QuadraticUtility {
    pub expected_returns: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub risk_aversion: f64,
}

impl QuadraticUtility {
    pub fn value(&self, weights: &DVector<f64>) -> f64 {
        let mean = self.expected_returns.dot(weights);
        let risk = (weights.transpose() * &self.covariance * weights)[(0, 0)];
        mean - 0.5 * self.risk_aversion * risk
    }
}

/// Candidate trades available to the DP.
#[derive(Debug, Clone)]
pub enum ActionSpace {
    /// Move to any on-simplex grid state; always contains holding (when the
    /// current state is on the simplex) and full rebalancing (the target is
    /// a grid point by construction).
    GridTargets,
    /// An explicit list of trade vectors; at each state, candidates that
    /// leave the weight box are filtered out.
    Explicit(Vec<DVector<f64>>),
}

/// Dynamic-programming rebalancer configuration.
#[derive(Debug, Clone)]
pub struct DpConfig {
    pub target_weights: DVector<f64>,
    /// Grid resolution per asset; grids span [0, 1] and always include the
    /// target weight.
    pub grid_points: usize,
    pub action_space: ActionSpace,
    /// Linear transaction cost per unit of |u|_1.
    pub cost_rate: f64,
    pub utility: QuadraticUtility,
    /// Monte-Carlo sample count for lognormal expectations.
    pub paths: usize,
    pub convergence_tol: f64,
    pub max_iterations: usize,
    /// Per-period discount; must be < 1 for infinite-horizon solves.
    pub discount: f64,
    /// `Some(T)` runs backward induction over `T` periods (the returned
    /// policy is the first-period one); `None` iterates to the fixed point.
    pub horizon: Option<usize>,
    pub seed: u64,
}

impl DpConfig {
    fn validate(&self) -> Result<()> {
        let n = self.target_weights.len();
        if n == 0 {
            return Err(Error::InvalidInput("dp config: empty target weights".into()));
        }
        if self.target_weights.iter().any(|&w| !(0.0..=1.0).contains(&w)) {
            return Err(Error::InvalidInput("dp config: targets outside [0, 1]".into()));
        }
        if (self.target_weights.sum() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput("dp config: targets must sum to 1".into()));
        }
        if self.grid_points < 2 {
            return Err(Error::InvalidInput("dp config: need at least 2 grid points".into()));
        }
        if self.cost_rate < 0.0 {
            return Err(Error::InvalidInput("dp config: negative cost rate".into()));
        }
        if self.utility.expected_returns.len() != n
            || self.utility.covariance.nrows() != n
            || self.utility.covariance.ncols() != n
        {
            return Err(Error::DimensionMismatch {
                context: "dp utility",
                expected: n,
                actual: self.utility.expected_returns.len(),
            });
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::InvalidInput("dp config: convergence_tol must be > 0".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidInput("dp config: max_iterations must be >= 1".into()));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(Error::InvalidInput("dp config: discount must be in (0, 1]".into()));
        }
        if self.horizon.is_none() && self.discount >= 1.0 {
            return Err(Error::InvalidInput(
                "dp config: infinite-horizon solves need discount < 1".into(),
            ));
        }
        if self.paths < 1 {
            return Err(Error::InvalidInput("dp config: paths must be >= 1".into()));
        }
        Ok(())
    }
}

/// Product grid over per-asset weight axes with multilinear interpolation.
#[derive(Debug, Clone)]
pub struct WeightGrid {
    axes: Vec<Vec<f64>>,
    states: Vec<DVector<f64>>,
    /// Indices of states whose weights sum to one.
    simplex: Vec<usize>,
}

impl WeightGrid {
    fn build(n_assets: usize, points: usize, targets: &DVector<f64>) -> Self {
        let mut axes = Vec::with_capacity(n_assets);
        for i in 0..n_assets {
            let mut axis: Vec<f64> =
                (0..points).map(|p| p as f64 / (points - 1) as f64).collect();
            if !axis.iter().any(|&g| (g - targets[i]).abs() < 1e-12) {
                axis.push(targets[i]);
                axis.sort_by(|a, b| a.partial_cmp(b).unwrap());
            }
            axes.push(axis);
        }
        let mut states = Vec::new();
        let mut index = vec![0usize; n_assets];
        loop {
            states.push(DVector::from_fn(n_assets, |i, _| axes[i][index[i]]));
            let mut dim = n_assets;
            loop {
                if dim == 0 {
                    break;
                }
                dim -= 1;
                index[dim] += 1;
                if index[dim] < axes[dim].len() {
                    break;
                }
                index[dim] = 0;
            }
            if index.iter().all(|&i| i == 0) {
                break;
            }
        }
        let simplex = states
            .iter()
            .enumerate()
            .filter(|(_, s)| (s.sum() - 1.0).abs() < 1e-9)
            .map(|(i, _)| i)
            .collect();
        WeightGrid { axes, states, simplex }
    }

    pub fn states(&self) -> &[DVector<f64>] {
        &self.states
    }

    pub fn simplex_states(&self) -> &[usize] {
        &self.simplex
    }

    fn flat_index(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        for (dim, &i) in multi.iter().enumerate() {
            idx = idx * self.axes[dim].len() + i;
        }
        idx
    }

    /// Multilinear interpolation of `values` at `point`; coordinates are
    /// clamped into the grid box.
    pub fn interpolate(&self, values: &[f64], point: &DVector<f64>) -> f64 {
        let d = self.axes.len();
        let mut lo = vec![0usize; d];
        let mut frac = vec![0.0f64; d];
        for dim in 0..d {
            let axis = &self.axes[dim];
            let x = point[dim].clamp(axis[0], *axis.last().unwrap());
            let hi_pos = axis.partition_point(|&g| g < x).clamp(1, axis.len() - 1);
            let (g0, g1) = (axis[hi_pos - 1], axis[hi_pos]);
            lo[dim] = hi_pos - 1;
            frac[dim] = if g1 > g0 { (x - g0) / (g1 - g0) } else { 0.0 };
        }
        let mut acc = 0.0;
        let mut multi = vec![0usize; d];
        for corner in 0..(1usize << d) {
            let mut weight = 1.0;
            for dim in 0..d {
                if corner >> dim & 1 == 1 {
                    weight *= frac[dim];
                    multi[dim] = lo[dim] + 1;
                } else {
                    weight *= 1.0 - frac[dim];
                    multi[dim] = lo[dim];
                }
            }
            if weight != 0.0 {
                acc += weight * values[self.flat_index(&multi)];
            }
        }
        acc
    }

    /// Nearest on-simplex grid state to `point` (Euclidean distance, ties
    /// to the lowest index).
    pub fn nearest_simplex_state(&self, point: &DVector<f64>) -> usize {
        let mut best = self.simplex[0];
        let mut best_dist = f64::INFINITY;
        for &idx in &self.simplex {
            let state = &self.states[idx];
            let mut dist = 0.0;
            for i in 0..state.len() {
                let d = state[i] - point[i];
                dist += d * d;
            }
            if dist < best_dist {
                best_dist = dist;
                best = idx;
            }
        }
        best
    }
}

/// One candidate action at a state: the post-trade weights (kept exact so
/// a grid target stays a grid point) and the trade that produces them.
#[derive(Debug, Clone)]
struct Action {
    post: DVector<f64>,
    trade: DVector<f64>,
    /// Grid index of `post` when it is a simplex grid state.
    target_state: Option<usize>,
}

/// Solved DP: value table, per-state optimal action and diagnostics.
#[derive(Debug, Clone)]
pub struct DpSolution {
    pub grid: WeightGrid,
    pub values: Vec<f64>,
    /// Optimal trade per grid state.
    pub policy: Vec<DVector<f64>>,
    /// For grid-target actions, the index of the chosen post-trade state.
    pub policy_target: Vec<Option<usize>>,
    pub iterations: usize,
    pub residual: f64,
}

impl DpSolution {
    /// Policy decision for an arbitrary (not necessarily on-grid) weight
    /// vector: the action of the nearest on-simplex grid state,
    /// re-anchored at the actual weights when the policy names a target
    /// state.
    pub fn decide(&self, weights: &DVector<f64>) -> PolicyDecision {
        let idx = self.grid.nearest_simplex_state(weights);
        match self.policy_target[idx] {
            Some(target) => {
                let target_w = &self.grid.states()[target];
                if (target_w - weights).amax() < 1e-12 {
                    PolicyDecision::hold(weights.len())
                } else {
                    PolicyDecision::to_targets(weights, target_w)
                }
            }
            None => {
                let trade = self.policy[idx].clone();
                if trade.amax() == 0.0 {
                    PolicyDecision::hold(weights.len())
                } else {
                    PolicyDecision { rebalance: true, trades: trade, targets: None }
                }
            }
        }
    }
}

fn enumerate_actions(
    grid: &WeightGrid,
    state: &DVector<f64>,
    space: &ActionSpace,
) -> Result<Vec<Action>> {
    let mut actions = Vec::new();
    match space {
        ActionSpace::GridTargets => {
            for &idx in grid.simplex_states() {
                let post = grid.states()[idx].clone();
                actions.push(Action { trade: &post - state, post, target_state: Some(idx) });
            }
        }
        ActionSpace::Explicit(candidates) => {
            for u in candidates {
                if u.len() != state.len() {
                    return Err(Error::DimensionMismatch {
                        context: "explicit action",
                        expected: state.len(),
                        actual: u.len(),
                    });
                }
                let post = state + u;
                if post.iter().any(|&w| !(-1e-12..=1.0 + 1e-12).contains(&w))
                    || post.sum() <= 1e-9
                {
                    continue;
                }
                actions.push(Action { post, trade: u.clone(), target_state: None });
            }
        }
    }
    if actions.is_empty() {
        if state.sum() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "dp: no feasible action at state {:?} (all candidates leave the weight box)",
                state.iter().copied().collect::<Vec<_>>()
            )));
        }
        // The all-zero bookkeeping corner of the product grid carries no
        // portfolio mass; let it hold so interpolation stays defined.
        actions.push(Action {
            post: state.clone(),
            trade: DVector::zeros(state.len()),
            target_state: None,
        });
    }
    Ok(actions)
}

/// Next state: multiplicative growth then renormalization onto the simplex.
/// A massless post-trade vector is absorbing.
fn transition(post: &DVector<f64>, shock: &DVector<f64>) -> DVector<f64> {
    let grown = DVector::from_fn(post.len(), |i, _| (1.0 + shock[i]) * post[i]);
    let total = grown.sum();
    if total <= 1e-12 {
        return post.clone();
    }
    grown / total
}

/// Solves the rebalancing DP over the weight grid.
///
/// Infinite-horizon mode sweeps the Bellman operator until the largest
/// value change falls below `convergence_tol` (error on exhaustion);
/// finite-horizon mode performs exactly `T` backward-induction sweeps and
/// reports the first-period policy.
pub fn dp_rebalance(config: &DpConfig, model: &ReturnModel) -> Result<DpSolution> {
    config.validate()?;
    let n = config.target_weights.len();
    let grid = WeightGrid::build(n, config.grid_points, &config.target_weights);
    if grid.simplex_states().is_empty() {
        return Err(Error::InvalidInput("dp: grid contains no simplex states".into()));
    }
    let outcomes = model.outcomes(n, config.paths, config.seed)?;

    let utility_target = config.utility.value(&config.target_weights);
    let shortfall = |w: &DVector<f64>| utility_target - config.utility.value(w);

    let actions_per_state: Vec<Vec<Action>> = grid
        .states()
        .iter()
        .map(|s| enumerate_actions(&grid, s, &config.action_space))
        .collect::<Result<_>>()?;

    // Trading cost and shortfall are sweep-invariant; fold them once.
    let base_costs: Vec<Vec<f64>> = actions_per_state
        .iter()
        .map(|actions| {
            actions
                .iter()
                .map(|a| config.cost_rate * a.trade.abs().sum() + shortfall(&a.post))
                .collect()
        })
        .collect();
    let turns: Vec<Vec<f64>> = actions_per_state
        .iter()
        .map(|actions| actions.iter().map(|a| a.trade.abs().sum()).collect())
        .collect();

    // Post-trade states of grid-target actions depend only on the target,
    // so their transition end-points are cached per (target, outcome).
    let mut target_transitions: Vec<Vec<DVector<f64>>> = Vec::new();
    if matches!(config.action_space, ActionSpace::GridTargets) {
        for &idx in grid.simplex_states() {
            let post = &grid.states()[idx];
            target_transitions
                .push(outcomes.iter().map(|(shock, _)| transition(post, shock)).collect());
        }
    }
    let simplex_pos: std::collections::HashMap<usize, usize> = grid
        .simplex_states()
        .iter()
        .enumerate()
        .map(|(pos, &idx)| (idx, pos))
        .collect();

    let sweeps = match config.horizon {
        Some(t) => t.max(1),
        None => config.max_iterations,
    };
    let n_states = grid.states().len();
    let mut values = vec![0.0f64; n_states];
    let mut policy: Vec<DVector<f64>> = vec![DVector::zeros(n); n_states];
    let mut policy_target: Vec<Option<usize>> = vec![None; n_states];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;

    for _ in 0..sweeps {
        iterations += 1;
        // Expected continuation per simplex target under the cached
        // transitions (grid-target mode only).
        let continuation: Vec<f64> = target_transitions
            .iter()
            .map(|per_outcome| {
                per_outcome
                    .iter()
                    .zip(&outcomes)
                    .map(|(next, (_, p))| p * grid.interpolate(&values, next))
                    .sum()
            })
            .collect();

        let mut new_values = vec![0.0f64; n_states];
        for s in 0..n_states {
            let mut best_cost = f64::INFINITY;
            let mut best_turn = f64::INFINITY;
            let mut best_action: Option<usize> = None;
            for (a, action) in actions_per_state[s].iter().enumerate() {
                let expected_next = match action.target_state {
                    Some(idx) if !target_transitions.is_empty() => continuation[simplex_pos[&idx]],
                    _ => outcomes
                        .iter()
                        .map(|(shock, p)| {
                            p * grid.interpolate(&values, &transition(&action.post, shock))
                        })
                        .sum(),
                };
                let cost = base_costs[s][a] + config.discount * expected_next;
                let turn = turns[s][a];
                if cost < best_cost || (cost == best_cost && turn < best_turn) {
                    best_cost = cost;
                    best_turn = turn;
                    best_action = Some(a);
                }
            }
            let action = &actions_per_state[s][best_action.expect("non-empty action set")];
            new_values[s] = best_cost;
            policy[s] = action.trade.clone();
            policy_target[s] = action.target_state;
        }

        residual = values
            .iter()
            .zip(&new_values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        values = new_values;

        if config.horizon.is_none() && residual < config.convergence_tol {
            return Ok(DpSolution { grid, values, policy, policy_target, iterations, residual });
        }
    }

    if config.horizon.is_some() {
        Ok(DpSolution { grid, values, policy, policy_target, iterations, residual })
    } else {
        Err(Error::NonConvergence {
            iterations,
            residual,
            detail: "dp_rebalance value iteration".into(),
        })
    }
}

/// Rebalancing policy under simulation.
#[derive(Debug, Clone)]
pub enum RebalancePolicy<'a> {
    /// Never trades.
    Hold,
    Periodic { period: usize },
    Band { band: f64 },
    Dp(&'a DpSolution),
}

impl RebalancePolicy<'_> {
    pub fn name(&self) -> String {
        match self {
            RebalancePolicy::Hold => "hold".into(),
            RebalancePolicy::Periodic { period } => format!("periodic_{period}"),
            RebalancePolicy::Band { band } => format!("band_{band}"),
            RebalancePolicy::Dp(_) => "dp".into(),
        }
    }
}

/// Simulation settings for the policy backtester.
#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub paths: usize,
    pub horizon: usize,
    pub seed: u64,
}

/// Per-policy realized cost statistics (means across paths).
#[derive(Debug, Clone)]
pub struct SimulationStats {
    /// Mean of total realized `G` (trading cost plus tracking penalty).
    pub mean_total_cost: f64,
    pub mean_trading_cost: f64,
    pub mean_tracking_penalty: f64,
    /// Mean sample std of (held minus target) period returns.
    pub mean_tracking_error: f64,
    pub trades_per_path: f64,
}

/// Simulates a policy against the return model, starting at the target
/// weights. Identical seeds reproduce identical shock sequences for every
/// policy, so policies are compared on common random numbers.
pub fn simulate_rebalancing(
    policy: &RebalancePolicy,
    config: &DpConfig,
    model: &ReturnModel,
    sim: &SimulationConfig,
) -> Result<SimulationStats> {
    config.validate()?;
    if sim.horizon < 1 {
        return Err(Error::InvalidInput("simulate: horizon must be >= 1".into()));
    }
    if sim.paths < 1 {
        return Err(Error::InvalidInput("simulate: paths must be >= 1".into()));
    }
    // Validate model shape and probabilities up front.
    model.outcomes(config.target_weights.len(), 1, sim.seed)?;

    let targets = &config.target_weights;
    let utility_target = config.utility.value(targets);
    let mut rng = ChaCha12Rng::seed_from_u64(sim.seed);

    let mut total_cost = 0.0;
    let mut trading_cost = 0.0;
    let mut tracking_penalty = 0.0;
    let mut tracking_error_acc = 0.0;
    let mut trades = 0usize;
    for _ in 0..sim.paths {
        let mut weights = targets.clone();
        let mut active = Vec::with_capacity(sim.horizon);
        for t in 0..sim.horizon {
            let decision = match policy {
                RebalancePolicy::Hold => PolicyDecision::hold(weights.len()),
                RebalancePolicy::Periodic { period } => {
                    periodic_policy(t, *period, &weights, targets)?
                }
                RebalancePolicy::Band { band } => band_policy(&weights, targets, *band)?,
                RebalancePolicy::Dp(solution) => solution.decide(&weights),
            };
            let post = decision.apply(&weights);
            let turn = decision.trades.abs().sum();
            if turn > 1e-12 {
                trades += 1;
            }
            let trade_cost = config.cost_rate * turn;
            let penalty = utility_target - config.utility.value(&post);
            trading_cost += trade_cost;
            tracking_penalty += penalty;
            total_cost += trade_cost + penalty;

            let shock = model.sample(&mut rng);
            active.push(post.dot(&shock) - targets.dot(&shock));
            weights = transition(&post, &shock);
        }
        if active.len() >= 2 {
            tracking_error_acc += sample_std(&active)?;
        }
    }

    let paths = sim.paths as f64;
    Ok(SimulationStats {
        mean_total_cost: total_cost / paths,
        mean_trading_cost: trading_cost / paths,
        mean_tracking_penalty: tracking_penalty / paths,
        mean_tracking_error: tracking_error_acc / paths,
        trades_per_path: trades as f64 / paths,
    })
}
