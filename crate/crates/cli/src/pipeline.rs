//! The batch pipeline: ingest -> fit -> rank -> views -> construct ->
//! rebalance -> impact-calibrate -> tca -> attribute, plus the `backtest`
//! driver that runs the stages in order.
//!
//! History is split three ways: the fit window estimates the factor model
//! and composite weights, the evaluate window measures the model's
//! out-of-sample IC statistics (signal confidence), and the trade window
//! runs the investment cycle. Each stage is a pure function of the config
//! and input files and writes its artifact under the output directory, so
//! running stages one by one reproduces the backtest's artifacts
//! byte-for-byte. Randomized stages draw from per-stage sub-streams of the
//! master seed.
//!
//! Black-Litterman weights are renormalized to sum to one before being
//! emitted (a CLI-level convention; the posterior math is untouched).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::Serialize;

use quantfolio_core::attribution::{
    self, BrinsonReport, CurrencyLeg, PerformanceInput, SegmentData,
};
use quantfolio_core::black_litterman::{
    build_views, posterior, EquilibriumInput, View, ViewKind, ViewSet,
};
use quantfolio_core::econometrics::{covariance_of, sample_std};
use quantfolio_core::factor_model::{
    blume_adjusted_betas, fit_factor_model, fit_index_model, load_factors, FactorModelFit,
    FactorPanel, IndexFit,
};
use quantfolio_core::marketdata::{
    self, cap_weights, compute_returns, load_benchmark, load_prices, BenchmarkSpec, PricePanel,
    ReturnPanel,
};
use quantfolio_core::rebalancing::{
    band_policy, dp_rebalance, periodic_policy, simulate_rebalancing, trigger_policy, ActionSpace,
    DpConfig, DpSolution, PolicyDecision, QuadraticUtility, RebalancePolicy, ReturnModel,
    SimulationConfig, TriggerInput,
};
use quantfolio_core::selection::{
    build_view_signals, composite_score, optimize_factor_weights, Ranking,
};
use quantfolio_core::tca::{
    calibrate_impact, fx_slippage, post_trade_report, pre_trade_report, BenchmarkPrices,
    CalibrationOptions, ImpactParams, MarketStats, Order, PreTradeInputs, SlippageBenchmark,
};
use quantfolio_core::{Error, Result};

use crate::config::{
    stage_seed, BacktestConfig, LoadedConfig, RebalanceConfig, Stage, ViewConfig,
};
use crate::report::{write_csv, write_json};

/// Loaded data plus the resolved window split, shared by every stage.
pub struct Pipeline {
    pub loaded: LoadedConfig,
    pub out_dir: PathBuf,
    pub seed: u64,
    panel: PricePanel,
    returns: ReturnPanel,
    benchmark: BenchmarkSpec,
    benchmark_returns: Vec<f64>,
    factors: Option<FactorPanel>,
    /// Return-row index ending the fit window.
    fit_end: usize,
    /// Return-row index ending the evaluate window; trading starts here.
    eval_end: usize,
}

/// Book size used to convert weight changes into share orders for TCA.
const TRADE_NOTIONAL: f64 = 1.0e7;

impl Pipeline {
    /// Loads inputs, applies the universe restriction and resolves the
    /// window split. `seed_override` (the `--seed` flag) replaces the
    /// config seed when given.
    pub fn load(
        loaded: LoadedConfig,
        out_dir: impl AsRef<Path>,
        seed_override: Option<u64>,
    ) -> Result<Self> {
        let out_dir = out_dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&out_dir).map_err(|e| Error::Io {
            path: out_dir.display().to_string(),
            source: e,
        })?;
        let config = &loaded.config;
        let mut panel = load_prices(&config.prices)?;
        if let Some(universe) = &config.universe {
            panel = panel.select_assets(universe)?;
        }
        let returns = compute_returns(&panel)?;
        let benchmark = match &config.benchmark {
            Some(path) => load_benchmark(path)?,
            None => BenchmarkSpec::cap_weighted(&panel)?,
        };
        let benchmark_returns = benchmark.returns(&returns)?;
        let factors = match &config.factors {
            Some(path) => {
                let panel = load_factors(path)?;
                if panel.dates() != returns.dates() {
                    return Err(Error::InvalidInput(
                        "factors: dates must match the return panel exactly".into(),
                    ));
                }
                Some(panel)
            }
            None => None,
        };
        let n = returns.n_periods();
        let fit_end = ((n as f64) * config.split.fit).floor() as usize;
        let eval_end = fit_end + ((n as f64) * config.split.evaluate).floor() as usize;
        if fit_end < 3 || eval_end >= n {
            return Err(Error::InvalidInput(format!(
                "split leaves unusable windows (fit {fit_end}, evaluate end {eval_end}, total {n})"
            )));
        }
        Ok(Pipeline {
            seed: seed_override.unwrap_or(config.seed),
            loaded,
            out_dir,
            panel,
            returns,
            benchmark,
            benchmark_returns,
            factors,
            fit_end,
            eval_end,
        })
    }

    fn config(&self) -> &BacktestConfig {
        &self.loaded.config
    }

    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Window boundaries as date labels, for reports.
    fn window_summary(&self) -> WindowSummary {
        let dates = self.returns.dates();
        WindowSummary {
            fit: (dates[0].clone(), dates[self.fit_end - 1].clone()),
            evaluate: (dates[self.fit_end].clone(), dates[self.eval_end - 1].clone()),
            trade: (dates[self.eval_end].clone(), dates[dates.len() - 1].clone()),
        }
    }

    // ---- ingest ---------------------------------------------------------

    pub fn ingest(&self) -> Result<IngestSummary> {
        let mut rows = vec!["date,asset_id,return".to_string()];
        for (t, date) in self.returns.dates().iter().enumerate() {
            for (i, asset) in self.returns.assets().iter().enumerate() {
                rows.push(format!("{date},{asset},{}", self.returns.returns()[(t, i)]));
            }
        }
        write_csv(self.out("returns.csv"), &rows)?;

        let summary = IngestSummary {
            assets: self.panel.assets().to_vec(),
            dates: self.panel.dates().len(),
            periods: self.returns.n_periods(),
            windows: self.window_summary(),
            benchmark: self
                .config()
                .benchmark
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_else(|| "cap_weighted".into()),
        };
        write_json(self.out("panel_summary.json"), &summary)?;
        Ok(summary)
    }

    // ---- fit-factors ----------------------------------------------------

    /// Fits the factor model on the fit window.
    pub fn fit_factors(&self) -> Result<FactorModelFit> {
        let factors = self.factors.as_ref().ok_or_else(|| {
            Error::InvalidInput("fit-factors: config has no factors file".into())
        })?;
        let fit = fit_factor_model(
            &self.returns.slice_periods(0, self.fit_end)?,
            &factors.slice_periods(0, self.fit_end)?,
        )?;
        write_json(self.out("factor_model.json"), &FactorModelSummary::from(&fit))?;
        Ok(fit)
    }

    /// Composite factor weights: config-provided or grid search maximizing
    /// mean IC over fit-window rankings.
    fn factor_weights(&self, fit: &FactorModelFit) -> Result<Vec<f64>> {
        let k = fit.factors.len();
        if let Some(weights) = &self.config().factor_weights {
            if weights.len() != k {
                return Err(Error::InvalidInput(format!(
                    "config: factor_weights has {} entries, model has {k} factors",
                    weights.len()
                )));
            }
            return Ok(weights.clone());
        }
        let h = self.config().holding_period;
        let dates: Vec<String> = self
            .ranking_rows()
            .into_iter()
            .filter(|&t| t + h < self.fit_end)
            .map(|t| self.returns.dates()[t].clone())
            .collect();
        if dates.len() < 2 {
            // Not enough fit-window history to search; fall back to equal
            // weights.
            return Ok(vec![1.0 / k as f64; k]);
        }
        optimize_factor_weights(
            &fit.loadings,
            &self.returns,
            &dates,
            h,
            self.config().factor_weight_grid,
        )
    }

    /// Return-row indices where rankings are formed: every holding period.
    fn ranking_rows(&self) -> Vec<usize> {
        (0..self.returns.n_periods())
            .step_by(self.config().holding_period)
            .collect()
    }

    /// Trading rebalance rows: every holding period from the trade start.
    fn trading_rows(&self) -> Vec<usize> {
        (self.eval_end..self.returns.n_periods())
            .step_by(self.config().holding_period)
            .collect()
    }

    // ---- rank -----------------------------------------------------------

    /// Rankings at every scheduled row, scored with the fit-window model.
    pub fn rank(&self) -> Result<RankArtifact> {
        let fit = self.fit_factors()?;
        let weights = self.factor_weights(&fit)?;
        let scores = composite_score(&fit.loadings, &weights)?;
        let mut rankings = Vec::new();
        let mut rows = vec!["date,window,rank,asset_id,score".to_string()];
        for t in self.ranking_rows() {
            let date = self.returns.dates()[t].clone();
            let ranking = Ranking::from_scores(date.clone(), self.returns.assets(), &scores)?;
            let window = if t < self.fit_end {
                "fit"
            } else if t < self.eval_end {
                "evaluate"
            } else {
                "trade"
            };
            for (rank, (asset, score)) in
                ranking.assets.iter().zip(&ranking.scores).enumerate()
            {
                rows.push(format!("{date},{window},{},{asset},{score}", rank + 1));
            }
            rankings.push((t, ranking));
        }
        write_csv(self.out("rankings.csv"), &rows)?;
        Ok(RankArtifact { rankings, factor_weights: weights })
    }

    // ---- views ----------------------------------------------------------

    /// Views for construction: manual from config when provided, otherwise
    /// auto-generated from the evaluate-window signal statistics (IC stats
    /// are strictly out-of-sample with respect to the fit window).
    pub fn views(&self) -> Result<ViewsArtifact> {
        let h = self.config().holding_period;
        let artifact = if let Some(manual) = &self.config().views {
            let views = manual.iter().map(view_from_config).collect();
            ViewsArtifact { views, signal: None, stat_dates: Vec::new() }
        } else if self.factors.is_some() {
            let rank = self.rank()?;
            let eval_rankings: Vec<Ranking> = rank
                .rankings
                .iter()
                .filter(|(t, _)| *t >= self.fit_end && t + h < self.eval_end)
                .map(|(_, r)| r.clone())
                .collect();
            if eval_rankings.len() < 2 {
                return Err(Error::InvalidInput(format!(
                    "views: evaluate window supports only {} complete holding periods (need 2)",
                    eval_rankings.len()
                )));
            }
            let stat_dates: Vec<String> =
                eval_rankings.iter().map(|r| r.date.clone()).collect();
            let signals = build_view_signals(
                &eval_rankings,
                &self.returns,
                h,
                self.config().quantile,
                self.config().confidence.mode(),
            )?;
            // Signals state spreads per holding period; the construction
            // stage works at per-period scale (daily Sigma and pi), so the
            // view return is de-compounded before it meets the posterior.
            let views = signals
                .iter()
                .map(|s| {
                    let mut view = View::from_signal(s);
                    view.expected_return = per_period_return(s.expected_outperformance, h);
                    view
                })
                .collect();
            ViewsArtifact { views, signal: signals.into_iter().next(), stat_dates }
        } else {
            ViewsArtifact { views: Vec::new(), signal: None, stat_dates: Vec::new() }
        };

        write_json(self.out("views.json"), &ViewsSummary::from(&artifact))?;
        Ok(artifact)
    }

    // ---- construct ------------------------------------------------------

    /// Black-Litterman construction at every trading rebalance date.
    pub fn construct(&self) -> Result<ConstructArtifact> {
        let views = self.views()?;
        let assets = self.returns.assets().to_vec();
        let mut cycles = Vec::new();
        let mut weight_rows = vec!["date,asset_id,weight".to_string()];
        let mut summaries = Vec::new();
        for t in self.trading_rows() {
            // The decision uses information up to and including return row
            // t - 1; prices at the panel date indexed t are current.
            let history = self.returns.slice_periods(0, t.max(2))?;
            let sigma = covariance_of(history.returns())?;
            let sigma_c = sigma.conditioned();
            let decision_date = self.panel.dates()[t].clone();
            let market_weights = match &self.config().benchmark {
                Some(_) => self.benchmark.weights_at(&decision_date)?,
                None => cap_weights(&self.panel, &decision_date)?,
            };
            let eq = EquilibriumInput::new(self.config().risk_aversion, sigma, market_weights)?;
            let view_set = if views.views.is_empty() {
                ViewSet::empty(assets.len(), self.config().tau)
            } else {
                build_views(&views.views, &assets, self.config().tau, &sigma_c)?
            };
            let result = posterior(&view_set, &eq)?;
            let total = result.weights.sum();
            if total.abs() < 0.1 {
                return Err(Error::InvalidInput(format!(
                    "construct: degenerate posterior weights at {decision_date} (sum {total})"
                )));
            }
            let weights = &result.weights / total;
            for (i, asset) in assets.iter().enumerate() {
                weight_rows.push(format!("{decision_date},{asset},{}", weights[i]));
            }
            summaries.push(ConstructCycle {
                date: decision_date.clone(),
                n_views: view_set.n_views(),
                prior_returns: vector_map(&assets, &result.prior_returns),
                combined_returns: vector_map(&assets, &result.combined_returns),
                weights: vector_map(&assets, &weights),
            });
            cycles.push(ConstructedCycle {
                row: t,
                date: decision_date,
                weights,
                prior: result.prior_returns,
                combined: result.combined_returns,
                n_views: view_set.n_views(),
            });
        }
        write_csv(self.out("weights.csv"), &weight_rows)?;
        write_json(self.out("construction.json"), &summaries)?;
        Ok(ConstructArtifact { cycles })
    }

    // ---- rebalance ------------------------------------------------------

    /// Policy comparison on a lognormal model fitted to the fit window.
    pub fn rebalance(&self) -> Result<Vec<PolicyRow>> {
        let construct = self.construct()?;
        let first = construct.cycles.first().ok_or_else(|| {
            Error::InvalidInput("rebalance: no trading cycles to anchor the comparison".into())
        })?;

        // Lognormal shock model from fit-window log returns.
        let fit_returns = self.returns.slice_periods(0, self.fit_end)?;
        let n_assets = self.returns.assets().len();
        let mut drift = DVector::zeros(n_assets);
        let mut volatility = DVector::zeros(n_assets);
        for i in 0..n_assets {
            let logs: Vec<f64> = fit_returns
                .returns()
                .column(i)
                .iter()
                .map(|r| (1.0 + r).ln())
                .collect();
            drift[i] = logs.iter().sum::<f64>() / logs.len() as f64;
            volatility[i] = sample_std(&logs)?;
        }
        let model = ReturnModel::Lognormal { drift, volatility };

        let sigma = covariance_of(fit_returns.returns())?;
        let anchor = long_only(&first.weights)?;
        // Implied returns of the anchor make it the utility maximizer, so
        // the tracking shortfall is zero at the target and positive away
        // from it.
        let sigma_c = sigma.conditioned();
        let utility = QuadraticUtility {
            expected_returns: &sigma_c * &anchor * self.config().risk_aversion,
            covariance: sigma_c,
            risk_aversion: self.config().risk_aversion,
        };
        let (cost_rate, dp_settings) = match &self.config().rebalance {
            RebalanceConfig::Dp {
                cost_rate,
                grid_points,
                paths,
                discount,
                convergence_tol,
                max_iterations,
            } => (
                *cost_rate,
                Some((*grid_points, *paths, *discount, *convergence_tol, *max_iterations)),
            ),
            _ => (5e-4, None),
        };
        let dp_config = DpConfig {
            target_weights: anchor,
            grid_points: dp_settings.map(|(g, ..)| g).unwrap_or(5),
            action_space: ActionSpace::GridTargets,
            cost_rate,
            utility,
            paths: dp_settings.map(|(_, p, ..)| p).unwrap_or(128),
            convergence_tol: dp_settings.map(|(_, _, _, t, _)| t).unwrap_or(1e-8),
            max_iterations: dp_settings.map(|(_, _, _, _, m)| m).unwrap_or(5000),
            discount: dp_settings.map(|(_, _, d, ..)| d).unwrap_or(0.95),
            horizon: None,
            seed: stage_seed(self.seed, Stage::Rebalance),
        };
        let dp_solution: Option<DpSolution> = if dp_settings.is_some() {
            Some(dp_rebalance(&dp_config, &model)?)
        } else {
            None
        };

        let sim = SimulationConfig {
            paths: 2000,
            horizon: (self.returns.n_periods() - self.eval_end).clamp(4, 60),
            seed: stage_seed(self.seed, Stage::Rebalance),
        };
        let band = match &self.config().rebalance {
            RebalanceConfig::Band { band } => *band,
            _ => 0.05,
        };
        let period = match &self.config().rebalance {
            RebalanceConfig::Periodic { period } => *period,
            _ => self.config().holding_period,
        };
        let mut policies = vec![
            RebalancePolicy::Hold,
            RebalancePolicy::Periodic { period },
            RebalancePolicy::Band { band },
        ];
        if let Some(solution) = &dp_solution {
            policies.push(RebalancePolicy::Dp(solution));
        }

        let mut rows = Vec::new();
        for policy in &policies {
            let stats = simulate_rebalancing(policy, &dp_config, &model, &sim)?;
            rows.push(PolicyRow {
                policy: policy.name(),
                mean_cost: stats.mean_total_cost,
                mean_tracking_error: stats.mean_tracking_error,
                trades_per_path: stats.trades_per_path,
            });
        }
        let mut csv = vec!["policy,mean_cost,mean_tracking_error,trades_per_path".to_string()];
        for row in &rows {
            csv.push(format!(
                "{},{},{},{}",
                row.policy, row.mean_cost, row.mean_tracking_error, row.trades_per_path
            ));
        }
        write_csv(self.out("policy_comparison.csv"), &csv)?;
        write_json(self.out("policy_comparison.json"), &rows)?;
        Ok(rows)
    }

    // ---- impact-calibrate / tca ----------------------------------------

    /// Per-asset market stats from the panel: trailing mean volume and
    /// return volatility over `adv_window`, shares outstanding as loaded.
    fn market_stats(&self) -> Result<BTreeMap<String, MarketStats>> {
        let window = self.config().adv_window;
        let t = self.panel.dates().len();
        let start = t.saturating_sub(window);
        let r_start = self.returns.n_periods().saturating_sub(window);
        let mut out = BTreeMap::new();
        for (i, asset) in self.panel.assets().iter().enumerate() {
            let volumes: Vec<f64> =
                (start..t).map(|row| self.panel.volume()[(row, i)]).collect();
            let adv = volumes.iter().sum::<f64>() / volumes.len() as f64;
            let rets: Vec<f64> = (r_start..self.returns.n_periods())
                .map(|row| self.returns.returns()[(row, i)])
                .collect();
            let volatility = if rets.len() >= 2 { sample_std(&rets)? } else { 0.0 };
            // Average spread is not observable from the close-only panel; a
            // flat desk default keeps the weighted-spread aggregate defined.
            out.insert(
                asset.clone(),
                MarketStats {
                    adv: adv.max(1.0),
                    volatility,
                    shares_outstanding: self.panel.shares_outstanding()[i],
                    spread: 5e-4,
                },
            );
        }
        Ok(out)
    }

    fn load_orders(&self) -> Result<Vec<Order>> {
        let path = self.config().orders.as_ref().ok_or_else(|| {
            Error::InvalidInput("config has no orders file for this stage".into())
        })?;
        read_orders_csv(path)
    }

    pub fn impact_calibrate(&self) -> Result<ImpactParams> {
        let orders = self.load_orders()?;
        let stats = self.market_stats()?;
        let mut paired = Vec::with_capacity(orders.len());
        for order in orders {
            let s = stats.get(&order.asset).ok_or_else(|| {
                Error::UnknownAsset(format!("{} (order {})", order.asset, order.id))
            })?;
            paired.push((order, *s));
        }
        let options = CalibrationOptions {
            seed: stage_seed(self.seed, Stage::ImpactCalibrate),
            ..CalibrationOptions::default()
        };
        let report = calibrate_impact(&paired, &options)?;
        write_json(
            self.out("impact_params.json"),
            &ImpactCalibrationSummary {
                params: report.params,
                rms_permanent: report.rms_permanent,
                rms_temporary: report.rms_temporary,
                orders: paired.len(),
            },
        )?;
        Ok(report.params)
    }

    /// Impact parameters for TCA: config-supplied, or calibrated from the
    /// orders file when available.
    fn impact_params(&self) -> Result<ImpactParams> {
        if let Some(params) = self.config().impact {
            return Ok(params);
        }
        if self.config().orders.is_some() {
            return self.impact_calibrate();
        }
        Err(Error::InvalidInput(
            "tca: provide `impact` parameters or an `orders` file to calibrate from".into(),
        ))
    }

    fn index_fit(&self) -> Result<IndexFit> {
        fit_index_model(&self.returns, &self.benchmark_returns)
    }

    pub fn tca(&self) -> Result<TcaArtifact> {
        let orders = self.load_orders()?;
        let stats = self.market_stats()?;
        let params = self.impact_params()?;
        let index_fit = self.index_fit()?;
        let betas = blume_adjusted_betas(&self.returns, &self.benchmark_returns)?;

        // Trailing basket returns: notional-weighted asset returns.
        let notionals: BTreeMap<String, f64> = orders.iter().fold(BTreeMap::new(), |mut m, o| {
            *m.entry(o.asset.clone()).or_insert(0.0) += o.shares.abs() * o.arrival_price;
            m
        });
        let total: f64 = notionals.values().sum();
        let window = self.config().adv_window.min(self.returns.n_periods());
        let start = self.returns.n_periods() - window;
        let mut basket_returns = vec![0.0; window];
        for (asset, notional) in &notionals {
            let i = self
                .returns
                .assets()
                .iter()
                .position(|a| a == asset)
                .ok_or_else(|| Error::UnknownAsset(asset.clone()))?;
            for (k, row) in (start..self.returns.n_periods()).enumerate() {
                basket_returns[k] += notional / total * self.returns.returns()[(row, i)];
            }
        }
        let bench_tail = &self.benchmark_returns[start..];

        let pre = pre_trade_report(&PreTradeInputs {
            orders: &orders,
            stats: &stats,
            impact_params: &params,
            index_fit: &index_fit,
            adjusted_betas: &betas,
            portfolio_returns: &basket_returns,
            benchmark_returns: bench_tail,
        })?;
        write_json(self.out("tca_pre.json"), &pre)?;
        let mut rows = vec![
            "order_id,asset_id,shares,notional_weight,participation,predicted_permanent,predicted_realized,market_risk,spread,adjusted_beta"
                .to_string(),
        ];
        for o in &pre.orders {
            rows.push(format!(
                "{},{},{},{},{},{},{},{},{},{}",
                o.id,
                o.asset,
                o.shares,
                o.notional_weight,
                o.participation,
                o.predicted_permanent,
                o.predicted_realized,
                o.market_risk,
                o.spread,
                o.adjusted_beta
            ));
        }
        write_csv(self.out("tca_pre.csv"), &rows)?;

        // Post-trade slippage when benchmark prices are supplied.
        let post = if let Some(path) = &self.config().order_benchmarks {
            let benchmarks = read_order_benchmarks_csv(path)?;
            let mut paired = Vec::new();
            for order in &orders {
                let prices = benchmarks.get(&order.id).copied().ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "order_benchmarks: no row for order {}",
                        order.id
                    ))
                })?;
                paired.push((order.clone(), prices));
            }
            let entries = post_trade_report(&paired, &SlippageBenchmark::ALL)?;
            let mut rows = vec!["order_id,asset_id,benchmark,slippage".to_string()];
            for e in &entries {
                rows.push(format!(
                    "{},{},{},{}",
                    e.order_id,
                    e.asset,
                    e.benchmark.name(),
                    e.slippage
                ));
            }
            write_csv(self.out("tca_post.csv"), &rows)?;
            write_json(self.out("tca_post.json"), &entries)?;
            entries
        } else {
            Vec::new()
        };
        // FX executions, when supplied. The schema carries no side column;
        // rows are read from the buyer's side (positive slippage = cost).
        let fx = if let Some(path) = &self.config().fx {
            let rows = read_fx_csv(path)?;
            let mut out = Vec::with_capacity(rows.len());
            for row in rows {
                let (vs_market, vs_high_low_mid) = fx_slippage(
                    1.0,
                    row.exec_price,
                    row.market_price,
                    row.day_high,
                    row.day_low,
                )?;
                out.push(FxSlippageRow {
                    ts: row.ts,
                    pair: row.pair,
                    vs_market,
                    vs_high_low_mid,
                });
            }
            let mut csv_rows = vec!["ts,pair,vs_market,vs_high_low_mid".to_string()];
            for e in &out {
                csv_rows.push(format!("{},{},{},{}", e.ts, e.pair, e.vs_market, e.vs_high_low_mid));
            }
            write_csv(self.out("tca_fx.csv"), &csv_rows)?;
            write_json(self.out("tca_fx.json"), &out)?;
            out
        } else {
            Vec::new()
        };
        Ok(TcaArtifact { pre, post, fx })
    }

    // ---- attribute ------------------------------------------------------

    pub fn attribute(&self) -> Result<AttributionArtifact> {
        let realized = self.realize_cycle()?;
        let input = PerformanceInput::with_constant_rf(
            realized.portfolio_returns.clone(),
            realized.benchmark_returns.clone(),
            self.config().risk_free_rate,
        )?;
        let risk_adjusted = attribution::risk_adjusted_measures(&input)?;
        let timing = attribution::timing_regression(&input)?;

        // Per-cycle Brinson on asset segments, arithmetic totals.
        let mut brinson_cycles = Vec::new();
        for cycle in &realized.cycles {
            brinson_cycles.push(CycleBrinson {
                date: cycle.date.clone(),
                report: attribution::brinson(&cycle.segments)?,
            });
        }

        // Factor attribution over the trade window under the documented
        // constant-composition assumption (mean held weights).
        let factor = if self.factors.is_some() {
            let fit = self.fit_factors()?;
            let factors = self.factors.as_ref().unwrap();
            let trade_factors =
                factors.slice_periods(self.eval_end, self.returns.n_periods())?;
            let weights = &realized.mean_weights;
            Some(attribution::factor_attribution(
                &fit,
                &trade_factors,
                weights.as_slice(),
                &realized.portfolio_returns,
            )?)
        } else {
            None
        };

        // Standalone segment/currency files, when configured.
        let segment_reports = match &self.config().segments {
            Some(path) => read_segments_csv(path)?
                .into_iter()
                .map(|(period, data)| {
                    attribution::brinson(&data).map(|report| CycleBrinson { date: period, report })
                })
                .collect::<Result<Vec<_>>>()?,
            None => Vec::new(),
        };
        let currency_reports = match &self.config().currency {
            Some(path) => {
                let legs = read_currency_csv(path)?;
                let mut out = Vec::new();
                for (period, asset, leg) in legs {
                    let components = attribution::currency_decomposition(&leg)?;
                    out.push(CurrencyRow { period, asset_id: asset, components });
                }
                out
            }
            None => Vec::new(),
        };

        let artifact = AttributionArtifact {
            windows: self.window_summary(),
            risk_adjusted,
            timing,
            brinson: brinson_cycles,
            factor,
            segments: segment_reports,
            currency: currency_reports,
        };
        write_json(self.out("attribution.json"), &artifact)?;

        let mut rows = vec!["metric,value".to_string()];
        let r = &artifact.risk_adjusted;
        for (name, value) in [
            ("sharpe", r.sharpe),
            ("treynor", r.treynor),
            ("jensen_alpha", r.jensen_alpha),
            ("alpha_information_ratio", r.alpha_information_ratio),
            ("alpha_t_stat", r.alpha_t_stat),
            ("win_rate", r.win_rate),
            ("benchmark_correlation", r.benchmark_correlation),
            ("max_drawdown", r.max_drawdown),
            ("beta", r.beta),
            ("timing_convexity", artifact.timing.convexity),
            ("timing_t_stat", artifact.timing.t_stat_convexity),
        ] {
            rows.push(format!("{name},{value}"));
        }
        write_csv(self.out("attribution.csv"), &rows)?;
        Ok(artifact)
    }

    // ---- backtest -------------------------------------------------------

    /// Runs the full cycle and writes `cycle_report.json`. Stage artifacts
    /// are identical to running the subcommands in sequence.
    pub fn backtest(&self) -> Result<CycleReport> {
        self.ingest()?;
        if self.factors.is_some() {
            self.fit_factors()?;
            self.rank()?;
        }
        let construct = self.construct()?; // writes views.json as a dependency
        let policy_comparison = self.rebalance()?;
        if self.config().orders.is_some() {
            self.impact_calibrate()?;
            self.tca()?;
        }
        let attribution = self.attribute()?;
        let realized = self.realize_cycle()?;

        let report = CycleReport {
            seed: self.seed,
            config_hash: self.loaded.hash.clone(),
            windows: self.window_summary(),
            cycles: realized.report_cycles,
            dates: realized.dates,
            portfolio_returns: realized.portfolio_returns,
            benchmark_returns: realized.benchmark_returns,
            total_tca_cost: realized.total_tca_cost,
            attribution,
            policy_comparison,
            construction: construct
                .cycles
                .iter()
                .map(|c| ConstructCycle {
                    date: c.date.clone(),
                    n_views: c.n_views,
                    prior_returns: vector_map(self.returns.assets(), &c.prior),
                    combined_returns: vector_map(self.returns.assets(), &c.combined),
                    weights: vector_map(self.returns.assets(), &c.weights),
                })
                .collect(),
        };
        write_json(self.out("cycle_report.json"), &report)?;
        Ok(report)
    }

    /// Realizes the trading window: holds the constructed weights, lets
    /// them drift with returns, applies the configured rebalance policy at
    /// each cycle boundary and charges predicted impact costs on trades.
    fn realize_cycle(&self) -> Result<RealizedCycle> {
        let construct = self.construct()?;
        if construct.cycles.is_empty() {
            return Err(Error::InvalidInput("realize: no trading cycles".into()));
        }
        let n_assets = self.returns.assets().len();
        let stats = self.market_stats()?;
        let impact = match self.config().impact {
            Some(params) => Some(params),
            None if self.config().orders.is_some() => Some(self.impact_calibrate()?),
            None => None,
        };

        // Pre-solve the DP policy once against the first cycle target when
        // configured.
        let dp_solution = match &self.config().rebalance {
            RebalanceConfig::Dp {
                grid_points,
                cost_rate,
                paths,
                discount,
                convergence_tol,
                max_iterations,
            } => {
                let fit_returns = self.returns.slice_periods(0, self.fit_end)?;
                let sigma = covariance_of(fit_returns.returns())?;
                let mut drift = DVector::zeros(n_assets);
                let mut volatility = DVector::zeros(n_assets);
                for i in 0..n_assets {
                    let logs: Vec<f64> = fit_returns
                        .returns()
                        .column(i)
                        .iter()
                        .map(|r| (1.0 + r).ln())
                        .collect();
                    drift[i] = logs.iter().sum::<f64>() / logs.len() as f64;
                    volatility[i] = sample_std(&logs)?;
                }
                let first = &construct.cycles[0];
                let anchor = long_only(&first.weights)?;
                let sigma_c = sigma.conditioned();
                let config = DpConfig {
                    target_weights: anchor.clone(),
                    grid_points: *grid_points,
                    action_space: ActionSpace::GridTargets,
                    cost_rate: *cost_rate,
                    utility: QuadraticUtility {
                        expected_returns: &sigma_c * &anchor * self.config().risk_aversion,
                        covariance: sigma_c,
                        risk_aversion: self.config().risk_aversion,
                    },
                    paths: *paths,
                    convergence_tol: *convergence_tol,
                    max_iterations: *max_iterations,
                    discount: *discount,
                    horizon: None,
                    seed: stage_seed(self.seed, Stage::Rebalance),
                };
                Some(dp_rebalance(&config, &ReturnModel::Lognormal { drift, volatility })?)
            }
            _ => None,
        };

        let mut weights = construct.cycles[0].weights.clone();
        let mut portfolio_returns = Vec::new();
        let mut dates = Vec::new();
        let mut report_cycles = Vec::new();
        let mut cycles = Vec::new();
        let mut weight_sum = DVector::zeros(n_assets);
        let mut total_tca = 0.0;

        let trading_rows = self.trading_rows();
        for (k, &row) in trading_rows.iter().enumerate() {
            let target = &construct.cycles[k];
            let decision = self.policy_decision(k, &weights, &target.weights, dp_solution.as_ref())?;
            let post = decision.apply(&weights);

            // Predicted impact cost of the trades, charged this cycle.
            let mut tca_cost = 0.0;
            let mut trades = BTreeMap::new();
            if decision.rebalance {
                for (i, asset) in self.returns.assets().iter().enumerate() {
                    let delta = post[i] - weights[i];
                    if delta.abs() < 1e-12 {
                        continue;
                    }
                    trades.insert(asset.clone(), delta);
                    if let Some(params) = &impact {
                        let price = self.panel.close()[(row, i)];
                        let shares = delta * TRADE_NOTIONAL / price;
                        let order = Order::new(
                            format!("cycle{k}-{asset}"),
                            asset.clone(),
                            shares,
                            self.config().holding_period as f64,
                            price,
                        )?;
                        let (_, realized) = predict_impact_checked(&order, &stats[asset], params)?;
                        tca_cost += realized * delta;
                    }
                }
            }
            total_tca += tca_cost;

            // Hold through the cycle; weights drift multiplicatively.
            let cycle_end =
                (row + self.config().holding_period).min(self.returns.n_periods());
            let mut held = post.clone();
            let mut segment_portfolio_returns = vec![0.0; n_assets];
            let mut first_period = true;
            for t in row..cycle_end {
                let r_vec = self.returns.returns().row(t).transpose();
                let mut r_p = held.dot(&r_vec);
                if first_period {
                    r_p -= tca_cost;
                    first_period = false;
                }
                portfolio_returns.push(r_p);
                dates.push(self.returns.dates()[t].clone());
                for i in 0..n_assets {
                    segment_portfolio_returns[i] =
                        (1.0 + segment_portfolio_returns[i]) * (1.0 + r_vec[i]) - 1.0;
                }
                // Drift.
                let grown = DVector::from_fn(n_assets, |i, _| held[i] * (1.0 + r_vec[i]));
                let sum = grown.sum();
                held = grown / sum;
            }
            weight_sum += &post;

            // Brinson segments for the cycle: assets as segments.
            let bench_w = match &self.config().benchmark {
                Some(_) => self.benchmark.weights_at(&target.date)?,
                None => cap_weights(&self.panel, &target.date)?,
            };
            let segments = SegmentData {
                segments: self.returns.assets().to_vec(),
                portfolio_weights: post.iter().copied().collect(),
                portfolio_returns: segment_portfolio_returns.clone(),
                benchmark_weights: bench_w.iter().copied().collect(),
                benchmark_returns: segment_portfolio_returns,
            };
            // Benchmark segment returns equal asset returns (segments are
            // single assets), so reuse the compound series for both sides.

            cycles.push(RealizedCycleSegment { date: target.date.clone(), segments });
            report_cycles.push(ReportCycle {
                date: target.date.clone(),
                rebalanced: decision.rebalance,
                n_views: target.n_views,
                tca_cost,
                trades,
                weights: vector_map(self.returns.assets(), &post),
            });
            weights = held;
        }

        let benchmark_returns: Vec<f64> = (trading_rows[0]..self.returns.n_periods())
            .map(|t| self.benchmark_returns[t])
            .collect();
        let mean_weights = weight_sum / trading_rows.len() as f64;
        Ok(RealizedCycle {
            cycles,
            report_cycles,
            dates,
            portfolio_returns,
            benchmark_returns,
            mean_weights,
            total_tca_cost: total_tca,
        })
    }

    /// The configured policy's decision at a cycle boundary.
    fn policy_decision(
        &self,
        cycle_index: usize,
        weights: &DVector<f64>,
        targets: &DVector<f64>,
        dp: Option<&DpSolution>,
    ) -> Result<PolicyDecision> {
        match &self.config().rebalance {
            RebalanceConfig::Periodic { period } => {
                let t = cycle_index * self.config().holding_period;
                periodic_policy(t, *period, weights, targets)
            }
            RebalanceConfig::Band { band } => band_policy(weights, targets, *band),
            RebalanceConfig::Trigger { risk_tolerance, cost } => {
                let history = self.returns.slice_periods(0, self.fit_end)?;
                let sigma = covariance_of(history.returns())?;
                let n = weights.len();
                let port_var = (weights.transpose() * &sigma.matrix * weights)[(0, 0)];
                let sigma_p = port_var.max(0.0).sqrt();
                let mut inputs = Vec::with_capacity(n);
                for i in 0..n {
                    let sigma_i = sigma.matrix[(i, i)].max(0.0).sqrt();
                    let cov_ip = (sigma.matrix.row(i) * weights)[(0, 0)];
                    let correlation = if sigma_i > 0.0 && sigma_p > 0.0 {
                        (cov_ip / (sigma_i * sigma_p)).clamp(-1.0, 1.0)
                    } else {
                        0.0
                    };
                    inputs.push(TriggerInput {
                        risk_tolerance: *risk_tolerance,
                        cost: *cost,
                        sigma_asset: sigma_i,
                        sigma_portfolio: sigma_p,
                        correlation,
                    });
                }
                trigger_policy(weights, targets, &inputs)
            }
            RebalanceConfig::Dp { .. } => {
                let solution = dp.expect("dp solution pre-solved for dp policy");
                Ok(solution.decide(weights))
            }
        }
    }
}

fn predict_impact_checked(
    order: &Order,
    stats: &MarketStats,
    params: &ImpactParams,
) -> Result<(f64, f64)> {
    quantfolio_core::tca::predict_impact(order, stats, params)
}

fn view_from_config(view: &ViewConfig) -> View {
    match view {
        ViewConfig::Absolute { long, q, confidence } => View {
            kind: ViewKind::Absolute { assets: long.clone() },
            expected_return: *q,
            confidence: *confidence,
        },
        ViewConfig::Relative { long, short, q, confidence } => View {
            kind: ViewKind::Relative { long: long.clone(), short: short.clone() },
            expected_return: *q,
            confidence: *confidence,
        },
    }
}

fn vector_map(assets: &[String], values: &DVector<f64>) -> BTreeMap<String, f64> {
    assets.iter().cloned().zip(values.iter().copied()).collect()
}

/// De-compounds a holding-period return to per-period scale (linear
/// fallback for the pathological way-below-par case).
fn per_period_return(holding_return: f64, holding_period: usize) -> f64 {
    let h = holding_period.max(1) as f64;
    if holding_return > -1.0 {
        (1.0 + holding_return).powf(1.0 / h) - 1.0
    } else {
        holding_return / h
    }
}

/// Long-only projection: negative weights are clipped to zero and the
/// remainder renormalized. Posterior weights may carry short tilts; the
/// DP grid and policy simulator live on the weight simplex, so their
/// anchor portfolio is the clipped one (a CLI-level constraint, not part
/// of the posterior math).
fn long_only(weights: &DVector<f64>) -> Result<DVector<f64>> {
    let clipped = weights.map(|w| w.max(0.0));
    let total = clipped.sum();
    if !(total > 0.0) {
        return Err(Error::InvalidInput(
            "long-only projection: no positive weights".into(),
        ));
    }
    Ok(clipped / total)
}

// ---- artifact types -----------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct WindowSummary {
    pub fit: (String, String),
    pub evaluate: (String, String),
    pub trade: (String, String),
}

#[derive(Debug, Clone, Serialize)]
pub struct IngestSummary {
    pub assets: Vec<String>,
    pub dates: usize,
    pub periods: usize,
    pub windows: WindowSummary,
    pub benchmark: String,
}

#[derive(Debug, Clone, Serialize)]
struct FactorModelSummary {
    assets: Vec<String>,
    factors: Vec<String>,
    intercepts: Vec<f64>,
    /// Row-major `[asset][factor]` loadings.
    loadings: Vec<Vec<f64>>,
    specific_variance: Vec<f64>,
}

impl From<&FactorModelFit> for FactorModelSummary {
    fn from(fit: &FactorModelFit) -> Self {
        FactorModelSummary {
            assets: fit.assets.clone(),
            factors: fit.factors.clone(),
            intercepts: fit.intercepts.iter().copied().collect(),
            loadings: (0..fit.assets.len())
                .map(|i| fit.loadings.row(i).iter().copied().collect())
                .collect(),
            specific_variance: fit.specific_variance.iter().copied().collect(),
        }
    }
}

pub struct RankArtifact {
    pub rankings: Vec<(usize, Ranking)>,
    pub factor_weights: Vec<f64>,
}

pub struct ViewsArtifact {
    pub views: Vec<View>,
    pub signal: Option<quantfolio_core::selection::ViewSignal>,
    /// Dates whose rankings supplied the IC statistics (evaluate window).
    pub stat_dates: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
struct ViewsSummary {
    views: Vec<ViewJson>,
    signal: Option<SignalJson>,
    stat_dates: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
struct ViewJson {
    #[serde(rename = "type")]
    kind: &'static str,
    long: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    short: Option<Vec<String>>,
    q: f64,
    confidence: f64,
}

#[derive(Debug, Clone, Serialize)]
struct SignalJson {
    information_ratio: f64,
    hit_ratio: f64,
    expected_outperformance: f64,
    confidence: f64,
}

impl From<&ViewsArtifact> for ViewsSummary {
    fn from(artifact: &ViewsArtifact) -> Self {
        let views = artifact
            .views
            .iter()
            .map(|v| match &v.kind {
                ViewKind::Absolute { assets } => ViewJson {
                    kind: "absolute",
                    long: assets.clone(),
                    short: None,
                    q: v.expected_return,
                    confidence: v.confidence,
                },
                ViewKind::Relative { long, short } => ViewJson {
                    kind: "relative",
                    long: long.clone(),
                    short: Some(short.clone()),
                    q: v.expected_return,
                    confidence: v.confidence,
                },
            })
            .collect();
        let signal = artifact.signal.as_ref().map(|s| SignalJson {
            information_ratio: s.information_ratio,
            hit_ratio: s.hit_ratio,
            expected_outperformance: s.expected_outperformance,
            confidence: s.confidence,
        });
        ViewsSummary { views, signal, stat_dates: artifact.stat_dates.clone() }
    }
}

pub struct ConstructedCycle {
    pub row: usize,
    pub date: String,
    pub weights: DVector<f64>,
    pub prior: DVector<f64>,
    pub combined: DVector<f64>,
    pub n_views: usize,
}

pub struct ConstructArtifact {
    pub cycles: Vec<ConstructedCycle>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstructCycle {
    pub date: String,
    pub n_views: usize,
    pub prior_returns: BTreeMap<String, f64>,
    pub combined_returns: BTreeMap<String, f64>,
    pub weights: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PolicyRow {
    pub policy: String,
    pub mean_cost: f64,
    pub mean_tracking_error: f64,
    pub trades_per_path: f64,
}

#[derive(Debug, Clone, Serialize)]
struct ImpactCalibrationSummary {
    params: ImpactParams,
    rms_permanent: f64,
    rms_temporary: f64,
    orders: usize,
}

pub struct TcaArtifact {
    pub pre: quantfolio_core::tca::PreTradeReport,
    pub post: Vec<quantfolio_core::tca::SlippageEntry>,
    pub fx: Vec<FxSlippageRow>,
}

/// One FX execution's slippage against the two benchmarks.
#[derive(Debug, Clone, Serialize)]
pub struct FxSlippageRow {
    pub ts: String,
    pub pair: String,
    pub vs_market: f64,
    pub vs_high_low_mid: f64,
}

struct FxExecution {
    ts: String,
    pair: String,
    exec_price: f64,
    market_price: f64,
    day_high: f64,
    day_low: f64,
}

/// FX CSV: `ts,pair,exec_price,market_price,day_high,day_low`.
fn read_fx_csv(path: &Path) -> Result<Vec<FxExecution>> {
    let mut reader = csv_reader(path)?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::Data {
            path: path.display().to_string(),
            row,
            message: e.to_string(),
        })?;
        out.push(FxExecution {
            ts: record[0].to_string(),
            pair: record[1].to_string(),
            exec_price: parse_field(path, row, "exec_price", &record[2])?,
            market_price: parse_field(path, row, "market_price", &record[3])?,
            day_high: parse_field(path, row, "day_high", &record[4])?,
            day_low: parse_field(path, row, "day_low", &record[5])?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct CycleBrinson {
    pub date: String,
    #[serde(flatten)]
    pub report: BrinsonReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurrencyRow {
    pub period: String,
    pub asset_id: String,
    #[serde(flatten)]
    pub components: attribution::CurrencyComponents,
}

#[derive(Debug, Clone, Serialize)]
pub struct AttributionArtifact {
    pub windows: WindowSummary,
    pub risk_adjusted: attribution::RiskAdjustedReport,
    pub timing: attribution::TimingFit,
    pub brinson: Vec<CycleBrinson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factor: Option<attribution::FactorAttribution>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub segments: Vec<CycleBrinson>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub currency: Vec<CurrencyRow>,
}

struct RealizedCycleSegment {
    date: String,
    segments: SegmentData,
}

struct RealizedCycle {
    cycles: Vec<RealizedCycleSegment>,
    report_cycles: Vec<ReportCycle>,
    dates: Vec<String>,
    portfolio_returns: Vec<f64>,
    benchmark_returns: Vec<f64>,
    mean_weights: DVector<f64>,
    total_tca_cost: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportCycle {
    pub date: String,
    pub rebalanced: bool,
    pub n_views: usize,
    pub tca_cost: f64,
    pub trades: BTreeMap<String, f64>,
    pub weights: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CycleReport {
    pub seed: u64,
    pub config_hash: String,
    pub windows: WindowSummary,
    pub cycles: Vec<ReportCycle>,
    pub dates: Vec<String>,
    pub portfolio_returns: Vec<f64>,
    pub benchmark_returns: Vec<f64>,
    pub total_tca_cost: f64,
    pub attribution: AttributionArtifact,
    pub policy_comparison: Vec<PolicyRow>,
    pub construction: Vec<ConstructCycle>,
}

// ---- CSV readers for the TCA and attribution interfaces ------------------

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::Reader::from_path(path)
        .map_err(|e| Error::InvalidInput(format!("cannot open {}: {e}", path.display())))
}

fn parse_field<T: std::str::FromStr>(
    path: &Path,
    row: usize,
    name: &str,
    raw: &str,
) -> Result<T> {
    raw.parse::<T>().map_err(|_| Error::Data {
        path: path.display().to_string(),
        row,
        message: format!("unparseable {name} `{raw}`"),
    })
}

/// Orders CSV:
/// `order_id,asset_id,shares,duration_days,arrival_price,avg_exec_price,post_price`
/// (the last two may be empty for open orders).
pub fn read_orders_csv(path: &Path) -> Result<Vec<Order>> {
    let mut reader = csv_reader(path)?;
    let expected = [
        "order_id",
        "asset_id",
        "shares",
        "duration_days",
        "arrival_price",
        "avg_exec_price",
        "post_price",
    ];
    let headers = reader
        .headers()
        .map_err(|e| Error::Data { path: path.display().to_string(), row: 1, message: e.to_string() })?
        .clone();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Data {
            path: path.display().to_string(),
            row: 1,
            message: format!("expected header `{}`", expected.join(",")),
        });
    }
    let mut orders = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::Data {
            path: path.display().to_string(),
            row,
            message: e.to_string(),
        })?;
        let shares: f64 = parse_field(path, row, "shares", &record[2])?;
        let duration: f64 = parse_field(path, row, "duration_days", &record[3])?;
        let arrival: f64 = parse_field(path, row, "arrival_price", &record[4])?;
        let mut order = Order::new(&record[0], &record[1], shares, duration, arrival)?;
        if !record[5].is_empty() && !record[6].is_empty() {
            let avg: f64 = parse_field(path, row, "avg_exec_price", &record[5])?;
            let post: f64 = parse_field(path, row, "post_price", &record[6])?;
            order = order.completed(avg, post)?;
        }
        orders.push(order);
    }
    Ok(orders)
}

/// Benchmarks CSV: `order_id,vwap,open,close,prev_close,interval_vwap`
/// (empty cells mean the benchmark is unavailable for that order).
pub fn read_order_benchmarks_csv(path: &Path) -> Result<BTreeMap<String, BenchmarkPrices>> {
    let mut reader = csv_reader(path)?;
    let mut out = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::Data {
            path: path.display().to_string(),
            row,
            message: e.to_string(),
        })?;
        let opt = |idx: usize, name: &str| -> Result<Option<f64>> {
            if record[idx].is_empty() {
                Ok(None)
            } else {
                parse_field(path, row, name, &record[idx]).map(Some)
            }
        };
        out.insert(
            record[0].to_string(),
            BenchmarkPrices {
                vwap: opt(1, "vwap")?,
                open: opt(2, "open")?,
                close: opt(3, "close")?,
                prev_close: opt(4, "prev_close")?,
                interval_vwap: opt(5, "interval_vwap")?,
            },
        );
    }
    Ok(out)
}

/// Segments CSV: `period,segment,w_p,r_p,w_b,r_b`, grouped by period.
pub fn read_segments_csv(path: &Path) -> Result<Vec<(String, SegmentData)>> {
    let mut reader = csv_reader(path)?;
    let mut grouped: BTreeMap<String, SegmentData> = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::Data {
            path: path.display().to_string(),
            row,
            message: e.to_string(),
        })?;
        let entry = grouped.entry(record[0].to_string()).or_insert_with(|| SegmentData {
            segments: Vec::new(),
            portfolio_weights: Vec::new(),
            portfolio_returns: Vec::new(),
            benchmark_weights: Vec::new(),
            benchmark_returns: Vec::new(),
        });
        entry.segments.push(record[1].to_string());
        entry.portfolio_weights.push(parse_field(path, row, "w_p", &record[2])?);
        entry.portfolio_returns.push(parse_field(path, row, "r_p", &record[3])?);
        entry.benchmark_weights.push(parse_field(path, row, "w_b", &record[4])?);
        entry.benchmark_returns.push(parse_field(path, row, "r_b", &record[5])?);
    }
    Ok(grouped.into_iter().collect())
}

/// Currency CSV: `period,asset_id,local_return,currency_return,local_rf,base_rf`.
pub fn read_currency_csv(path: &Path) -> Result<Vec<(String, String, CurrencyLeg)>> {
    let mut reader = csv_reader(path)?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::Data {
            path: path.display().to_string(),
            row,
            message: e.to_string(),
        })?;
        out.push((
            record[0].to_string(),
            record[1].to_string(),
            CurrencyLeg {
                local_return: parse_field(path, row, "local_return", &record[2])?,
                currency_return: parse_field(path, row, "currency_return", &record[3])?,
                local_risk_free: parse_field(path, row, "local_rf", &record[4])?,
                base_risk_free: parse_field(path, row, "base_rf", &record[5])?,
            },
        ));
    }
    Ok(out)
}

/// Re-exported for the ingest round-trip helpers used in tests.
pub use marketdata::write_prices;
