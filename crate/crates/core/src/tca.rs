//! Transaction cost analysis: market-impact measurement, the power-law
//! impact model with calibration, pre-trade risk/cost metrics, post-trade
//! benchmark slippage and FX slippage.
//!
//! Measured quantities come straight from order price points: permanent
//! impact `I = (S_post - S_0)/S_0`, realized impact `J = (S_avg - S_0)/S_0`
//! and the temporary component `J - I/2`. The predictive model is
//!
//! ```text
//! I       = sigma gamma T sgn(X) |X/(VT)|^alpha (theta/V)^delta
//! J - I/2 = sigma eta      sgn(X) |X/(VT)|^beta
//! ```
//!
//! Calibration fits the two equations jointly by nonlinear least squares:
//! the permanent equation identifies (gamma, alpha, delta), the temporary
//! one (eta, beta). Each fit runs Levenberg-Marquardt from a documented
//! grid of exponent starts in [0.25, 2] (scales profiled out linearly),
//! plus a log-linear start where signs allow; the multi-start jitter comes
//! from a fixed seed so results are reproducible. Participation is
//! `|X|/(V T)` per the model equations even though trade rate is defined
//! as `X/T`; the formula form wins.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::econometrics;
use crate::error::{Error, Result};
use crate::factor_model::IndexFit;

/// A (possibly completed) order. `shares` is signed: positive buys,
/// negative sells. `duration` is the trading time in days.
#[derive(Debug, Clone)]
pub struct Order {
    pub id: String,
    pub asset: String,
    pub shares: f64,
    pub duration: f64,
    pub arrival_price: f64,
    /// Market price well after completion; present on completed orders.
    pub post_price: Option<f64>,
    /// Average realized fill price; present on completed orders.
    pub avg_exec_price: Option<f64>,
}

impl Order {
    pub fn new(
        id: impl Into<String>,
        asset: impl Into<String>,
        shares: f64,
        duration: f64,
        arrival_price: f64,
    ) -> Result<Self> {
        if !(arrival_price > 0.0) {
            return Err(Error::InvalidInput("order: arrival price must be > 0".into()));
        }
        if !(duration > 0.0) {
            return Err(Error::InvalidInput("order: duration must be > 0".into()));
        }
        if !shares.is_finite() {
            return Err(Error::InvalidInput("order: shares must be finite".into()));
        }
        Ok(Order {
            id: id.into(),
            asset: asset.into(),
            shares,
            duration,
            arrival_price,
            post_price: None,
            avg_exec_price: None,
        })
    }

    pub fn completed(mut self, avg_exec_price: f64, post_price: f64) -> Result<Self> {
        if !(avg_exec_price > 0.0) || !(post_price > 0.0) {
            return Err(Error::InvalidInput("order: execution prices must be > 0".into()));
        }
        self.avg_exec_price = Some(avg_exec_price);
        self.post_price = Some(post_price);
        Ok(self)
    }
}

/// Per-asset market statistics backing the impact model.
#[derive(Debug, Clone, Copy)]
pub struct MarketStats {
    /// Average daily volume `V` (shares/day, > 0).
    pub adv: f64,
    /// Daily return volatility `sigma` (>= 0).
    pub volatility: f64,
    /// Shares outstanding `theta` (> 0).
    pub shares_outstanding: f64,
    /// Average bid-ask spread as a fraction of price.
    pub spread: f64,
}

impl MarketStats {
    fn validate(&self) -> Result<()> {
        if !(self.adv > 0.0) {
            return Err(Error::InvalidInput("market stats: adv must be > 0".into()));
        }
        if !(self.volatility >= 0.0) {
            return Err(Error::InvalidInput("market stats: volatility must be >= 0".into()));
        }
        if !(self.shares_outstanding > 0.0) {
            return Err(Error::InvalidInput(
                "market stats: shares outstanding must be > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Calibrated power-law impact parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ImpactParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub eta: f64,
    pub delta: f64,
}

impl ImpactParams {
    fn validate(&self) -> Result<()> {
        let all = [self.alpha, self.beta, self.gamma, self.eta, self.delta];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("impact params: non-finite parameter".into()));
        }
        if !(self.alpha > 0.0) || !(self.beta > 0.0) {
            return Err(Error::InvalidInput("impact params: exponents must be > 0".into()));
        }
        Ok(())
    }
}

/// Permanent impact `I = (S_post - S_0)/S_0` of a completed order.
pub fn permanent_impact(order: &Order) -> Result<f64> {
    let post = order
        .post_price
        .ok_or_else(|| Error::InvalidInput(format!("order {}: missing post price", order.id)))?;
    Ok((post - order.arrival_price) / order.arrival_price)
}

/// Realized impact `J = (S_avg - S_0)/S_0` of a completed order.
pub fn realized_impact(order: &Order) -> Result<f64> {
    let avg = order.avg_exec_price.ok_or_else(|| {
        Error::InvalidInput(format!("order {}: missing average execution price", order.id))
    })?;
    Ok((avg - order.arrival_price) / order.arrival_price)
}

/// Temporary component `J - I/2`.
pub fn temporary_impact(order: &Order) -> Result<f64> {
    Ok(realized_impact(order)? - permanent_impact(order)? / 2.0)
}

/// Participation `|X| / (V T)`.
pub fn participation(order: &Order, stats: &MarketStats) -> f64 {
    order.shares.abs() / (stats.adv * order.duration)
}

/// Model-predicted `(I, J)` for an order. `X = 0` is the exact zero-impact
/// limit (`sgn(0) = 0`).
pub fn predict_impact(
    order: &Order,
    stats: &MarketStats,
    params: &ImpactParams,
) -> Result<(f64, f64)> {
    stats.validate()?;
    params.validate()?;
    if !(order.duration > 0.0) {
        return Err(Error::InvalidInput("predict_impact: duration must be > 0".into()));
    }
    if order.shares == 0.0 {
        return Ok((0.0, 0.0));
    }
    let sign = order.shares.signum();
    let rate = participation(order, stats);
    let size_ratio = stats.shares_outstanding / stats.adv;
    let permanent = stats.volatility
        * params.gamma
        * order.duration
        * sign
        * rate.powf(params.alpha)
        * size_ratio.powf(params.delta);
    let temporary = stats.volatility * params.eta * sign * rate.powf(params.beta);
    Ok((permanent, permanent / 2.0 + temporary))
}

/// One calibration observation, reduced to the quantities the two model
/// equations consume.
#[derive(Debug, Clone, Copy)]
struct ImpactObs {
    sign: f64,
    sigma: f64,
    duration: f64,
    rate: f64,
    size_ratio: f64,
    permanent: f64,
    temporary: f64,
}

/// Calibration controls; `seed` drives the multi-start jitter.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationOptions {
    pub seed: u64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions { seed: 0, max_iterations: 80, tolerance: 1e-14 }
    }
}

/// Calibration output with per-equation fit diagnostics.
#[derive(Debug, Clone)]
pub struct CalibrationReport {
    pub params: ImpactParams,
    /// Residual RMS of the permanent-impact equation.
    pub rms_permanent: f64,
    /// Residual RMS of the temporary-impact equation.
    pub rms_temporary: f64,
    pub starts_evaluated: usize,
}

/// Exponent start grid for the multi-start search.
const EXPONENT_STARTS: [f64; 4] = [0.25, 0.75, 1.25, 1.75];

/// Calibrates the impact model on completed orders.
///
/// Requires at least 50 completed orders spanning at least 3 distinct
/// participation rates. Deterministic for a fixed `options.seed`.
pub fn calibrate_impact(
    orders: &[(Order, MarketStats)],
    options: &CalibrationOptions,
) -> Result<CalibrationReport> {
    let mut obs = Vec::with_capacity(orders.len());
    for (order, stats) in orders {
        stats.validate()?;
        if order.shares == 0.0 {
            return Err(Error::InvalidInput(format!(
                "calibrate_impact: order {} has zero shares",
                order.id
            )));
        }
        obs.push(ImpactObs {
            sign: order.shares.signum(),
            sigma: stats.volatility,
            duration: order.duration,
            rate: participation(order, stats),
            size_ratio: stats.shares_outstanding / stats.adv,
            permanent: permanent_impact(order)?,
            temporary: temporary_impact(order)?,
        });
    }
    if obs.len() < 50 {
        return Err(Error::InvalidInput(format!(
            "calibrate_impact: need at least 50 completed orders, got {}",
            obs.len()
        )));
    }
    let mut rates: Vec<f64> = obs.iter().map(|o| o.rate).collect();
    rates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut distinct = 1;
    for pair in rates.windows(2) {
        if (pair[1] - pair[0]).abs() > 1e-9 * pair[1].abs().max(1e-300) {
            distinct += 1;
        }
    }
    if distinct < 3 {
        return Err(Error::InvalidInput(format!(
            "calibrate_impact: only {distinct} distinct participation rates; \
             exponents are unidentifiable (need >= 3)"
        )));
    }

    let mut rng = ChaCha12Rng::seed_from_u64(options.seed);
    let n = obs.len() as f64;

    // Permanent equation: I = scale_base * gamma * rate^alpha * ratio^delta
    // with scale_base = sigma * T * sign.
    let perm_design: Vec<[f64; 3]> = obs
        .iter()
        .map(|o| [o.sigma * o.duration * o.sign, o.rate, o.size_ratio])
        .collect();
    let perm_target: Vec<f64> = obs.iter().map(|o| o.permanent).collect();
    let perm = fit_power_law(&perm_design, &perm_target, true, options, &mut rng)?;

    // Temporary equation: J - I/2 = sigma * sign * eta * rate^beta.
    let temp_design: Vec<[f64; 3]> = obs.iter().map(|o| [o.sigma * o.sign, o.rate, 1.0]).collect();
    let temp_target: Vec<f64> = obs.iter().map(|o| o.temporary).collect();
    let temp = fit_power_law(&temp_design, &temp_target, false, options, &mut rng)?;

    let params = ImpactParams {
        alpha: perm.exponent_a,
        beta: temp.exponent_a,
        gamma: perm.scale,
        eta: temp.scale,
        delta: perm.exponent_b,
    };
    params.validate().map_err(|_| Error::NonConvergence {
        iterations: options.max_iterations,
        residual: perm.sse.max(temp.sse),
        detail: format!("calibrate_impact produced invalid parameters {params:?}"),
    })?;
    Ok(CalibrationReport {
        params,
        rms_permanent: (perm.sse / n).sqrt(),
        rms_temporary: (temp.sse / n).sqrt(),
        starts_evaluated: perm.starts + temp.starts,
    })
}

struct PowerLawFit {
    scale: f64,
    exponent_a: f64,
    exponent_b: f64,
    sse: f64,
    starts: usize,
}

/// Fits `y = base * scale * rate^a * ratio^b` (`b` fixed at 0 when
/// `with_second` is false) by multi-start Levenberg-Marquardt. `design`
/// rows are `[base, rate, ratio]`.
fn fit_power_law(
    design: &[[f64; 3]],
    target: &[f64],
    with_second: bool,
    options: &CalibrationOptions,
    rng: &mut ChaCha12Rng,
) -> Result<PowerLawFit> {
    // Start list: exponent grid (jittered) plus a log-linear fit where the
    // sign structure allows taking logs.
    let mut starts: Vec<(f64, f64)> = Vec::new();
    for &a in &EXPONENT_STARTS {
        if with_second {
            for &b in &EXPONENT_STARTS {
                let ja: f64 = rng.random::<f64>() * 0.1 - 0.05;
                let jb: f64 = rng.random::<f64>() * 0.1 - 0.05;
                starts.push((a + ja, b + jb));
            }
        } else {
            let ja: f64 = rng.random::<f64>() * 0.1 - 0.05;
            starts.push((a + ja, 0.0));
        }
    }
    if let Some(loglog) = log_linear_start(design, target, with_second) {
        starts.push(loglog);
    }

    let mut best: Option<(f64, [f64; 3])> = None;
    let mut evaluated = 0;
    for (a0, b0) in starts {
        // Profile the scale out linearly given the exponents.
        let mut numer = 0.0;
        let mut denom = 0.0;
        for (row, y) in design.iter().zip(target) {
            let basis = row[0] * row[1].powf(a0) * if with_second { row[2].powf(b0) } else { 1.0 };
            numer += basis * y;
            denom += basis * basis;
        }
        if !(denom > 0.0) {
            continue;
        }
        let theta0 = [numer / denom, a0, b0];
        evaluated += 1;
        if let Some((sse, theta)) =
            levenberg_marquardt(design, target, theta0, with_second, options)
        {
            if best.as_ref().is_none_or(|(b_sse, _)| sse < *b_sse) {
                best = Some((sse, theta));
            }
            if sse < options.tolerance {
                break;
            }
        }
    }
    let (sse, theta) = best.ok_or_else(|| Error::NonConvergence {
        iterations: options.max_iterations,
        residual: f64::INFINITY,
        detail: "impact calibration: no start converged".into(),
    })?;
    Ok(PowerLawFit { scale: theta[0], exponent_a: theta[1], exponent_b: theta[2], sse, starts: evaluated })
}

fn log_linear_start(design: &[[f64; 3]], target: &[f64], with_second: bool) -> Option<(f64, f64)> {
    let mut rows = Vec::new();
    let mut ys = Vec::new();
    for (row, y) in design.iter().zip(target) {
        let scaled = y / row[0];
        if scaled > 0.0 && row[1] > 0.0 && row[2] > 0.0 {
            rows.push([row[1].ln(), row[2].ln()]);
            ys.push(scaled.ln());
        }
    }
    if rows.len() < 10 {
        return None;
    }
    let k = if with_second { 2 } else { 1 };
    let design_m = DMatrix::from_fn(rows.len(), k, |r, c| rows[r][c]);
    let fit = econometrics::ols_with_intercept(&design_m, &DVector::from_vec(ys)).ok()?;
    let a = fit.coefficients[1];
    let b = if with_second { fit.coefficients[2] } else { 0.0 };
    (a.is_finite() && b.is_finite()).then_some((a, b))
}

fn model_residuals(
    design: &[[f64; 3]],
    target: &[f64],
    theta: &[f64; 3],
    with_second: bool,
) -> (f64, Vec<f64>) {
    let mut sse = 0.0;
    let mut residuals = Vec::with_capacity(target.len());
    for (row, y) in design.iter().zip(target) {
        let f = row[0]
            * theta[0]
            * row[1].powf(theta[1])
            * if with_second { row[2].powf(theta[2]) } else { 1.0 };
        let r = y - f;
        sse += r * r;
        residuals.push(r);
    }
    (sse, residuals)
}

/// Plain Levenberg-Marquardt on the 2- or 3-parameter power law. Returns
/// the final SSE and parameters, or `None` if the start never produced a
/// usable step.
fn levenberg_marquardt(
    design: &[[f64; 3]],
    target: &[f64],
    mut theta: [f64; 3],
    with_second: bool,
    options: &CalibrationOptions,
) -> Option<(f64, [f64; 3])> {
    let p = if with_second { 3 } else { 2 };
    let (mut sse, mut residuals) = model_residuals(design, target, &theta, with_second);
    let mut lambda = 1e-3;
    for _ in 0..options.max_iterations {
        // J^T J and J^T r with the analytic Jacobian: df/dscale = f/scale,
        // df/da = f ln(rate), df/db = f ln(ratio).
        let mut jtj: DMatrix<f64> = DMatrix::zeros(p, p);
        let mut jtr: DVector<f64> = DVector::zeros(p);
        for (i, row) in design.iter().enumerate() {
            let f = row[0]
                * theta[0]
                * row[1].powf(theta[1])
                * if with_second { row[2].powf(theta[2]) } else { 1.0 };
            let grad = [
                if theta[0] != 0.0 { f / theta[0] } else { row[0] * row[1].powf(theta[1]) },
                f * row[1].ln(),
                f * row[2].ln(),
            ];
            for a in 0..p {
                jtr[a] += grad[a] * residuals[i];
                for b in 0..p {
                    jtj[(a, b)] += grad[a] * grad[b];
                }
            }
        }

        let mut stepped = false;
        for _ in 0..12 {
            let mut damped = jtj.clone();
            for d in 0..p {
                damped[(d, d)] += lambda * f64::max(jtj[(d, d)], 1e-300);
            }
            let Some(step) = nalgebra::Cholesky::new(damped).map(|c| c.solve(&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let mut candidate = theta;
            for d in 0..p {
                candidate[d] += step[d];
            }
            let (cand_sse, cand_res) = model_residuals(design, target, &candidate, with_second);
            if cand_sse.is_finite() && cand_sse < sse {
                let improvement = sse - cand_sse;
                theta = candidate;
                residuals = cand_res;
                let converged = improvement <= options.tolerance * sse.max(1e-300);
                sse = cand_sse;
                lambda = (lambda / 3.0).max(1e-12);
                stepped = true;
                if converged || sse < 1e-300 {
                    return Some((sse, theta));
                }
                break;
            }
            lambda *= 10.0;
        }
        if !stepped {
            return Some((sse, theta));
        }
    }
    Some((sse, theta))
}

/// Pre-trade inputs for a basket of orders.
#[derive(Debug, Clone)]
pub struct PreTradeInputs<'a> {
    pub orders: &'a [Order],
    pub stats: &'a BTreeMap<String, MarketStats>,
    pub impact_params: &'a ImpactParams,
    pub index_fit: &'a IndexFit,
    /// Blume-adjusted betas per asset.
    pub adjusted_betas: &'a BTreeMap<String, f64>,
    /// Trailing basket return history for tracking error.
    pub portfolio_returns: &'a [f64],
    pub benchmark_returns: &'a [f64],
}

/// Per-order pre-trade metrics.
#[derive(Debug, Clone, serde::Serialize)]
pub struct OrderPreTrade {
    pub id: String,
    pub asset: String,
    pub shares: f64,
    pub notional_weight: f64,
    pub participation: f64,
    pub predicted_permanent: f64,
    pub predicted_realized: f64,
    /// `sigma * sqrt(T)` over the expected completion time.
    pub market_risk: f64,
    pub spread: f64,
    pub adjusted_beta: f64,
}

/// Basket-level pre-trade metrics (notional-weighted).
#[derive(Debug, Clone, serde::Serialize)]
pub struct PortfolioPreTrade {
    pub market_risk: f64,
    pub tracking_error: f64,
    pub weighted_spread: f64,
    pub weighted_beta: f64,
    pub weighted_permanent: f64,
    pub weighted_realized: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct PreTradeReport {
    pub orders: Vec<OrderPreTrade>,
    pub portfolio: PortfolioPreTrade,
}

/// Builds the pre-trade report: per-order predicted impact, participation
/// and risk, plus notional-weighted portfolio aggregates. Assets missing
/// stats, betas or fits are reported together in one error.
pub fn pre_trade_report(inputs: &PreTradeInputs) -> Result<PreTradeReport> {
    if inputs.orders.is_empty() {
        return Err(Error::InvalidInput("pre_trade_report: no orders".into()));
    }
    let mut missing = Vec::new();
    for order in inputs.orders {
        if !inputs.stats.contains_key(&order.asset) {
            missing.push(format!("{} (market stats)", order.asset));
        }
        if !inputs.adjusted_betas.contains_key(&order.asset) {
            missing.push(format!("{} (adjusted beta)", order.asset));
        }
        if !inputs.index_fit.assets.contains(&order.asset) {
            missing.push(format!("{} (index fit)", order.asset));
        }
    }
    if !missing.is_empty() {
        missing.sort();
        missing.dedup();
        return Err(Error::InvalidInput(format!(
            "pre_trade_report: missing per-asset inputs: {}",
            missing.join(", ")
        )));
    }

    let notionals: Vec<f64> = inputs
        .orders
        .iter()
        .map(|o| o.shares.abs() * o.arrival_price)
        .collect();
    let total_notional: f64 = notionals.iter().sum();

    let mut orders = Vec::with_capacity(inputs.orders.len());
    for (order, notional) in inputs.orders.iter().zip(&notionals) {
        let stats = &inputs.stats[&order.asset];
        let (permanent, realized) = predict_impact(order, stats, inputs.impact_params)?;
        orders.push(OrderPreTrade {
            id: order.id.clone(),
            asset: order.asset.clone(),
            shares: order.shares,
            notional_weight: if total_notional > 0.0 { notional / total_notional } else { 0.0 },
            participation: if order.shares == 0.0 { 0.0 } else { participation(order, stats) },
            predicted_permanent: permanent,
            predicted_realized: realized,
            market_risk: stats.volatility * order.duration.sqrt(),
            spread: stats.spread,
            adjusted_beta: inputs.adjusted_betas[&order.asset],
        });
    }

    // Basket weights over the index-fit universe for the risk aggregate.
    let mut universe_weights = vec![0.0; inputs.index_fit.assets.len()];
    for report in &orders {
        let pos = inputs
            .index_fit
            .assets
            .iter()
            .position(|a| a == &report.asset)
            .expect("asset presence checked above");
        universe_weights[pos] += report.notional_weight;
    }
    let portfolio_volatility = inputs.index_fit.portfolio_variance(&universe_weights)?.sqrt();
    // Notional-weighted completion time for the basket risk horizon.
    let weighted_duration: f64 = inputs
        .orders
        .iter()
        .zip(&orders)
        .map(|(o, r)| r.notional_weight * o.duration)
        .sum();

    let weighted = |f: &dyn Fn(&OrderPreTrade) -> f64| -> f64 {
        orders.iter().map(|o| o.notional_weight * f(o)).sum()
    };
    let tracking_error = if inputs.portfolio_returns.len() >= 2 {
        crate::rebalancing::tracking_error(inputs.portfolio_returns, inputs.benchmark_returns)?
    } else {
        0.0
    };
    let portfolio = PortfolioPreTrade {
        market_risk: portfolio_volatility * weighted_duration.sqrt(),
        tracking_error,
        weighted_spread: weighted(&|o| o.spread),
        weighted_beta: weighted(&|o| o.adjusted_beta),
        weighted_permanent: weighted(&|o| o.predicted_permanent),
        weighted_realized: weighted(&|o| o.predicted_realized),
    };
    Ok(PreTradeReport { orders, portfolio })
}

/// Post-trade price benchmarks for one order.
#[derive(Debug, Clone, Copy, Default)]
pub struct BenchmarkPrices {
    pub vwap: Option<f64>,
    pub open: Option<f64>,
    pub close: Option<f64>,
    pub prev_close: Option<f64>,
    pub interval_vwap: Option<f64>,
}

/// The post-trade comparison benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SlippageBenchmark {
    Vwap,
    Open,
    Close,
    PrevClose,
    Arrival,
    IntervalVwap,
}

impl SlippageBenchmark {
    pub const ALL: [SlippageBenchmark; 6] = [
        SlippageBenchmark::Vwap,
        SlippageBenchmark::Open,
        SlippageBenchmark::Close,
        SlippageBenchmark::PrevClose,
        SlippageBenchmark::Arrival,
        SlippageBenchmark::IntervalVwap,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SlippageBenchmark::Vwap => "vwap",
            SlippageBenchmark::Open => "open",
            SlippageBenchmark::Close => "close",
            SlippageBenchmark::PrevClose => "prev_close",
            SlippageBenchmark::Arrival => "arrival",
            SlippageBenchmark::IntervalVwap => "interval_vwap",
        }
    }
}

/// Slippage of one order against one benchmark; positive means cost.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SlippageEntry {
    pub order_id: String,
    pub asset: String,
    pub benchmark: SlippageBenchmark,
    pub slippage: f64,
}

/// Post-trade slippage `sgn(X) (S_avg - P_b)/P_b` per requested benchmark.
pub fn post_trade_report(
    orders: &[(Order, BenchmarkPrices)],
    requested: &[SlippageBenchmark],
) -> Result<Vec<SlippageEntry>> {
    let mut out = Vec::with_capacity(orders.len() * requested.len());
    for (order, prices) in orders {
        let avg = order.avg_exec_price.ok_or_else(|| {
            Error::InvalidInput(format!("order {}: missing average execution price", order.id))
        })?;
        let sign = order.shares.signum();
        for benchmark in requested {
            let reference = match benchmark {
                SlippageBenchmark::Vwap => prices.vwap,
                SlippageBenchmark::Open => prices.open,
                SlippageBenchmark::Close => prices.close,
                SlippageBenchmark::PrevClose => prices.prev_close,
                SlippageBenchmark::Arrival => Some(order.arrival_price),
                SlippageBenchmark::IntervalVwap => prices.interval_vwap,
            }
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "order {}: missing {} benchmark price",
                    order.id,
                    benchmark.name()
                ))
            })?;
            if !(reference > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "order {}: non-positive {} benchmark price",
                    order.id,
                    benchmark.name()
                )));
            }
            out.push(SlippageEntry {
                order_id: order.id.clone(),
                asset: order.asset.clone(),
                benchmark: *benchmark,
                slippage: sign * (avg - reference) / reference,
            });
        }
    }
    Ok(out)
}

/// FX slippage of one execution: versus the market price at execution and
/// versus the day's high/low midpoint. `signed_amount` fixes the side
/// (positive buy); positive output means cost.
pub fn fx_slippage(
    signed_amount: f64,
    exec_price: f64,
    market_price: f64,
    day_high: f64,
    day_low: f64,
) -> Result<(f64, f64)> {
    if !(exec_price > 0.0) || !(market_price > 0.0) || !(day_low > 0.0) {
        return Err(Error::InvalidInput("fx_slippage: prices must be > 0".into()));
    }
    if day_high < day_low {
        return Err(Error::InvalidInput(format!(
            "fx_slippage: day high {day_high} below day low {day_low}"
        )));
    }
    let sign = signed_amount.signum();
    let mid = (day_high + day_low) / 2.0;
    Ok((
        sign * (exec_price - market_price) / market_price,
        sign * (exec_price - mid) / mid,
    ))
}

/// Synthetic completed orders drawn from the impact model itself, for
/// calibration studies: prices realize the model's arithmetic-Brownian
/// drift form with the power laws as drift/offset, plus optional
/// multiplicative noise per equation. Deterministic for a fixed seed.
pub fn synthetic_orders(
    params: &ImpactParams,
    count: usize,
    relative_noise: f64,
    seed: u64,
) -> Result<Vec<(Order, MarketStats)>> {
    params.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let adv = 10f64.powf(5.0 + 2.0 * rng.random::<f64>());
        let stats = MarketStats {
            adv,
            volatility: 0.005 + 0.03 * rng.random::<f64>(),
            shares_outstanding: adv * (20.0 + 80.0 * rng.random::<f64>()),
            spread: 0.0002 + 0.001 * rng.random::<f64>(),
        };
        let duration = 0.1 + 0.9 * rng.random::<f64>();
        // Participation spread over ~3 decades keeps the exponents
        // identifiable.
        let rate = 10f64.powf(-3.0 + 2.5 * rng.random::<f64>());
        let side = if rng.random::<f64>() < 0.5 { 1.0 } else { -1.0 };
        let shares = side * rate * adv * duration;
        let arrival = 20.0 + 180.0 * rng.random::<f64>();
        let order = Order::new(format!("syn-{i}"), format!("S{:03}", i % 97), shares, duration, arrival)?;
        let (permanent, realized) = predict_impact(&order, &stats, params)?;
        let temporary = realized - permanent / 2.0;
        let noisy_permanent = permanent * (1.0 + relative_noise * standard_normal(&mut rng));
        let noisy_temporary = temporary * (1.0 + relative_noise * standard_normal(&mut rng));
        let noisy_realized = noisy_temporary + noisy_permanent / 2.0;
        let order = order.completed(
            arrival * (1.0 + noisy_realized),
            arrival * (1.0 + noisy_permanent),
        )?;
        out.push((order, stats));
    }
    Ok(out)
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
