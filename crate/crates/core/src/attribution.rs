//! Performance measurement: risk-adjusted ratios, alpha significance,
//! market-timing regression, style regression, multi-factor return
//! attribution, Brinson allocation/selection/interaction and currency
//! decomposition.
//!
//! The risk-adjusted block regresses portfolio excess returns on benchmark
//! excess returns once and derives every measure from that single fit, so
//! Jensen's alpha and the regression intercept are the same number by
//! construction. The alpha t-statistic follows the `alpha * sqrt(N) /
//! sigma_e` convention.

use nalgebra::{DMatrix, DVector};

use crate::econometrics::{self, pearson, sample_std};
use crate::error::{Error, Result};
use crate::factor_model::{FactorModelFit, FactorPanel};

/// Aligned portfolio/benchmark/risk-free return series.
#[derive(Debug, Clone)]
pub struct PerformanceInput {
    pub portfolio: Vec<f64>,
    pub benchmark: Vec<f64>,
    pub risk_free: Vec<f64>,
}

impl PerformanceInput {
    pub fn new(portfolio: Vec<f64>, benchmark: Vec<f64>, risk_free: Vec<f64>) -> Result<Self> {
        let n = portfolio.len();
        if benchmark.len() != n || risk_free.len() != n {
            return Err(Error::DimensionMismatch {
                context: "performance input",
                expected: n,
                actual: benchmark.len().min(risk_free.len()),
            });
        }
        if n < 3 {
            return Err(Error::InvalidInput(
                "performance input: need at least 3 periods".into(),
            ));
        }
        Ok(Self { portfolio, benchmark, risk_free })
    }

    /// Constant risk-free rate convenience constructor.
    pub fn with_constant_rf(portfolio: Vec<f64>, benchmark: Vec<f64>, rf: f64) -> Result<Self> {
        let n = portfolio.len();
        Self::new(portfolio, benchmark, vec![rf; n])
    }

    fn excess_portfolio(&self) -> Vec<f64> {
        self.portfolio.iter().zip(&self.risk_free).map(|(p, f)| p - f).collect()
    }

    fn excess_benchmark(&self) -> Vec<f64> {
        self.benchmark.iter().zip(&self.risk_free).map(|(b, f)| b - f).collect()
    }
}

/// Risk-adjusted performance report.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RiskAdjustedReport {
    pub sharpe: f64,
    pub treynor: f64,
    pub jensen_alpha: f64,
    pub alpha_information_ratio: f64,
    pub alpha_t_stat: f64,
    /// Fraction of periods the portfolio strictly beats the benchmark.
    pub win_rate: f64,
    /// Correlation of portfolio and benchmark returns (diversification
    /// gauge).
    pub benchmark_correlation: f64,
    pub max_drawdown: f64,
    pub beta: f64,
    /// Standard deviation of the regression error term.
    pub residual_std: f64,
}

/// Computes the risk-adjusted measures from one excess-on-excess OLS fit.
pub fn risk_adjusted_measures(input: &PerformanceInput) -> Result<RiskAdjustedReport> {
    let excess_p = input.excess_portfolio();
    let excess_m = input.excess_benchmark();
    let n = excess_p.len();

    let bench_std = sample_std(&excess_m)?;
    if bench_std == 0.0 {
        return Err(Error::InvalidInput(
            "risk_adjusted_measures: zero benchmark variance".into(),
        ));
    }
    let sigma_p = sample_std(&excess_p)?;
    if sigma_p == 0.0 {
        return Err(Error::InvalidInput(
            "risk_adjusted_measures: zero portfolio excess volatility (Sharpe undefined)".into(),
        ));
    }

    let design = DMatrix::from_fn(n, 1, |r, _| excess_m[r]);
    let fit = econometrics::ols_with_intercept(&design, &DVector::from_vec(excess_p.clone()))?;
    let alpha = fit.coefficients[0];
    let beta = fit.coefficients[1];
    let residual_std = fit.residual_variance.sqrt();

    let mean_excess_p = excess_p.iter().sum::<f64>() / n as f64;
    let win_rate = input
        .portfolio
        .iter()
        .zip(&input.benchmark)
        .filter(|(p, b)| p > b)
        .count() as f64
        / n as f64;

    Ok(RiskAdjustedReport {
        sharpe: mean_excess_p / sigma_p,
        treynor: mean_excess_p / beta,
        jensen_alpha: alpha,
        alpha_information_ratio: if residual_std > 0.0 { alpha / residual_std } else { 0.0 },
        alpha_t_stat: if residual_std > 0.0 {
            alpha * (n as f64).sqrt() / residual_std
        } else {
            0.0
        },
        win_rate,
        benchmark_correlation: pearson(&input.portfolio, &input.benchmark)?,
        max_drawdown: max_drawdown(&input.portfolio),
        beta,
        residual_std,
    })
}

/// Maximum peak-to-trough drawdown of the compounded return path.
pub fn max_drawdown(returns: &[f64]) -> f64 {
    let mut wealth = 1.0f64;
    let mut peak = 1.0f64;
    let mut worst = 0.0f64;
    for r in returns {
        wealth *= 1.0 + r;
        peak = peak.max(wealth);
        worst = worst.max(1.0 - wealth / peak);
    }
    worst
}

/// Market-timing regression fit: excess portfolio return on excess
/// benchmark return and its square. A convexity term near zero means no
/// timing ability.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TimingFit {
    pub intercept: f64,
    pub market: f64,
    pub convexity: f64,
    pub t_stat_convexity: f64,
}

pub fn timing_regression(input: &PerformanceInput) -> Result<TimingFit> {
    let excess_p = input.excess_portfolio();
    let excess_m = input.excess_benchmark();
    let n = excess_p.len();
    if n < 4 {
        return Err(Error::InvalidInput("timing_regression: need at least 4 periods".into()));
    }
    let design = DMatrix::from_fn(n, 2, |r, c| {
        if c == 0 {
            excess_m[r]
        } else {
            excess_m[r] * excess_m[r]
        }
    });
    let fit = econometrics::ols_with_intercept(&design, &DVector::from_vec(excess_p))
        .map_err(|e| match e {
            Error::Singular(_) => {
                Error::Singular("timing_regression: collinear regressors".into())
            }
            other => other,
        })?;
    Ok(TimingFit {
        intercept: fit.coefficients[0],
        market: fit.coefficients[1],
        convexity: fit.coefficients[2],
        t_stat_convexity: fit.t_statistics[2],
    })
}

/// Per-segment weights and returns for the portfolio and its benchmark.
#[derive(Debug, Clone)]
pub struct SegmentData {
    pub segments: Vec<String>,
    pub portfolio_weights: Vec<f64>,
    pub portfolio_returns: Vec<f64>,
    pub benchmark_weights: Vec<f64>,
    pub benchmark_returns: Vec<f64>,
}

impl SegmentData {
    pub fn validate(&self) -> Result<()> {
        let n = self.segments.len();
        if [
            self.portfolio_weights.len(),
            self.portfolio_returns.len(),
            self.benchmark_weights.len(),
            self.benchmark_returns.len(),
        ]
        .iter()
        .any(|&l| l != n)
        {
            return Err(Error::InvalidInput("segment data: length mismatch".into()));
        }
        for (name, weights) in [
            ("portfolio", &self.portfolio_weights),
            ("benchmark", &self.benchmark_weights),
        ] {
            let sum: f64 = weights.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "segment data: {name} weights sum to {sum}, expected 1"
                )));
            }
        }
        Ok(())
    }
}

/// Which allocation-effect convention to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BrinsonVariant {
    /// `allocation = (w_p - w_b) r_b` per segment.
    #[default]
    Standard,
    /// Benchmark-relative allocation `(w_p - w_b)(r_b - R_b)`; totals are
    /// unchanged because active weights sum to zero.
    BenchmarkRelative,
}

/// One segment's attribution effects.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SegmentEffects {
    pub segment: String,
    pub allocation: f64,
    pub selection: f64,
    pub interaction: f64,
}

/// Brinson attribution output; totals reconcile to the active return.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BrinsonReport {
    pub segments: Vec<SegmentEffects>,
    pub allocation: f64,
    pub selection: f64,
    pub interaction: f64,
    pub portfolio_return: f64,
    pub benchmark_return: f64,
    pub active_return: f64,
}

/// Brinson attribution with the standard allocation convention.
pub fn brinson(data: &SegmentData) -> Result<BrinsonReport> {
    brinson_with(data, BrinsonVariant::Standard)
}

/// Brinson allocation/selection/interaction per segment:
/// `allocation + selection + interaction` sums exactly to the active
/// return `R_p - R_b` under either variant.
pub fn brinson_with(data: &SegmentData, variant: BrinsonVariant) -> Result<BrinsonReport> {
    data.validate()?;
    let benchmark_return: f64 = data
        .benchmark_weights
        .iter()
        .zip(&data.benchmark_returns)
        .map(|(w, r)| w * r)
        .sum();
    let portfolio_return: f64 = data
        .portfolio_weights
        .iter()
        .zip(&data.portfolio_returns)
        .map(|(w, r)| w * r)
        .sum();

    let mut segments = Vec::with_capacity(data.segments.len());
    let (mut alloc_total, mut sel_total, mut inter_total) = (0.0, 0.0, 0.0);
    for i in 0..data.segments.len() {
        let dw = data.portfolio_weights[i] - data.benchmark_weights[i];
        let dr = data.portfolio_returns[i] - data.benchmark_returns[i];
        let allocation = match variant {
            BrinsonVariant::Standard => dw * data.benchmark_returns[i],
            BrinsonVariant::BenchmarkRelative => dw * (data.benchmark_returns[i] - benchmark_return),
        };
        let selection = data.benchmark_weights[i] * dr;
        let interaction = dw * dr;
        alloc_total += allocation;
        sel_total += selection;
        inter_total += interaction;
        segments.push(SegmentEffects {
            segment: data.segments[i].clone(),
            allocation,
            selection,
            interaction,
        });
    }
    Ok(BrinsonReport {
        segments,
        allocation: alloc_total,
        selection: sel_total,
        interaction: inter_total,
        portfolio_return,
        benchmark_return,
        active_return: portfolio_return - benchmark_return,
    })
}

/// Style-regression fit: exposures of the portfolio to style portfolios.
#[derive(Debug, Clone, serde::Serialize)]
pub struct StyleFit {
    pub styles: Vec<String>,
    pub exposures: Vec<f64>,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Unconstrained OLS of portfolio returns on style-portfolio returns.
pub fn style_regression(
    portfolio_returns: &[f64],
    style_returns: &DMatrix<f64>,
    style_names: &[String],
) -> Result<StyleFit> {
    let n = portfolio_returns.len();
    let k = style_returns.ncols();
    if style_returns.nrows() != n {
        return Err(Error::DimensionMismatch {
            context: "style returns",
            expected: n,
            actual: style_returns.nrows(),
        });
    }
    if style_names.len() != k {
        return Err(Error::DimensionMismatch {
            context: "style names",
            expected: k,
            actual: style_names.len(),
        });
    }
    if n <= k + 1 {
        return Err(Error::InvalidInput(format!(
            "style_regression: need more than {} observations, got {n}",
            k + 1
        )));
    }
    let fit = econometrics::ols_with_intercept(
        style_returns,
        &DVector::from_vec(portfolio_returns.to_vec()),
    )?;
    Ok(StyleFit {
        styles: style_names.to_vec(),
        exposures: fit.coefficients.as_slice()[1..].to_vec(),
        intercept: fit.coefficients[0],
        r_squared: fit.r_squared,
    })
}

/// Multi-factor attribution of realized portfolio returns.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FactorAttribution {
    pub factors: Vec<String>,
    /// `[period x factor]` contributions `(w'B)_k F_kt`.
    pub contributions: Vec<Vec<f64>>,
    /// Constant per-period contribution of the fitted intercepts `w'a`.
    pub intercept_contribution: f64,
    /// Per-period specific (residual) return.
    pub specific: Vec<f64>,
    /// Per-factor totals over the window.
    pub totals: Vec<f64>,
    pub specific_total: f64,
}

/// Attributes realized portfolio returns across factors: the portfolio
/// loading `w'B` times each period's factor return, an intercept term, and
/// the residual specific return. Contributions, intercept and specific
/// reconstruct the portfolio return exactly.
pub fn factor_attribution(
    fit: &FactorModelFit,
    realized_factors: &FactorPanel,
    weights: &[f64],
    portfolio_returns: &[f64],
) -> Result<FactorAttribution> {
    if weights.len() != fit.assets.len() {
        return Err(Error::DimensionMismatch {
            context: "factor attribution weights",
            expected: fit.assets.len(),
            actual: weights.len(),
        });
    }
    if realized_factors.factors() != fit.factors.as_slice() {
        return Err(Error::InvalidInput(
            "factor attribution: factor names do not match the fit".into(),
        ));
    }
    let t = realized_factors.dates().len();
    if portfolio_returns.len() != t {
        return Err(Error::DimensionMismatch {
            context: "factor attribution portfolio returns",
            expected: t,
            actual: portfolio_returns.len(),
        });
    }

    let k = fit.factors.len();
    let w = DVector::from_vec(weights.to_vec());
    let portfolio_loadings = fit.loadings.transpose() * &w;
    let intercept_contribution = fit.intercepts.dot(&w);

    let mut contributions = vec![vec![0.0; k]; t];
    let mut specific = Vec::with_capacity(t);
    let mut totals = vec![0.0; k];
    for period in 0..t {
        let mut explained = intercept_contribution;
        for factor in 0..k {
            let c = portfolio_loadings[factor] * realized_factors.values()[(period, factor)];
            contributions[period][factor] = c;
            totals[factor] += c;
            explained += c;
        }
        specific.push(portfolio_returns[period] - explained);
    }
    let specific_total = specific.iter().sum();
    Ok(FactorAttribution {
        factors: fit.factors.clone(),
        contributions,
        intercept_contribution,
        specific,
        totals,
        specific_total,
    })
}

/// One asset's currency attribution inputs: local return, currency return
/// versus the base, and the two risk-free rates.
#[derive(Debug, Clone, Copy)]
pub struct CurrencyLeg {
    pub local_return: f64,
    pub currency_return: f64,
    pub local_risk_free: f64,
    pub base_risk_free: f64,
}

impl CurrencyLeg {
    fn validate(&self) -> Result<()> {
        let all = [
            self.local_return,
            self.currency_return,
            self.local_risk_free,
            self.base_risk_free,
        ];
        if all.iter().any(|&v| !(v > -1.0)) {
            return Err(Error::InvalidInput("currency leg: returns must exceed -1".into()));
        }
        Ok(())
    }
}

/// Currency decomposition output; the three excess components sum exactly
/// to `base_return - base_risk_free`.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct CurrencyComponents {
    /// `L + E + L*E`.
    pub base_return: f64,
    /// `L - R_fk`.
    pub local_excess: f64,
    /// `R_fk + E + R_fk*E - R_base`.
    pub currency_excess: f64,
    /// `(L - R_fk) * E`.
    pub cross_product: f64,
}

/// Splits a foreign asset's base-currency return into local excess,
/// currency excess and the cross product.
pub fn currency_decomposition(leg: &CurrencyLeg) -> Result<CurrencyComponents> {
    leg.validate()?;
    let (l, e) = (leg.local_return, leg.currency_return);
    let (rf_local, rf_base) = (leg.local_risk_free, leg.base_risk_free);
    Ok(CurrencyComponents {
        base_return: l + e + l * e,
        local_excess: l - rf_local,
        currency_excess: rf_local + e + rf_local * e - rf_base,
        cross_product: (l - rf_local) * e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn series(n: usize, scale: f64, phase: f64) -> Vec<f64> {
        (0..n).map(|i| (i as f64 * phase).sin() * scale).collect()
    }

    #[test]
    fn degenerate_all_zero_inputs_error() {
        let input =
            PerformanceInput::with_constant_rf(vec![0.0; 10], vec![0.0; 10], 0.0).unwrap();
        assert!(risk_adjusted_measures(&input).is_err());
    }

    #[test]
    fn portfolio_equal_to_benchmark() {
        let m = series(24, 0.02, 0.7);
        let input = PerformanceInput::with_constant_rf(m.clone(), m, 0.001).unwrap();
        let report = risk_adjusted_measures(&input).unwrap();
        assert_relative_eq!(report.beta, 1.0, epsilon = 1e-10);
        assert_relative_eq!(report.jensen_alpha, 0.0, epsilon = 1e-12);
        assert_eq!(report.win_rate, 0.0, "strict outperformance never happens");
        assert_relative_eq!(report.benchmark_correlation, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn generate_and_fit_recovers_alpha_beta_and_hand_ratios() {
        // R_p = 0.01 + 0.9 R_m + noise over 24 periods; the ratios are then
        // recomputed by hand from the fitted estimates.
        let m = series(24, 0.03, 0.9);
        let noise = series(24, 0.002, 2.3);
        let p: Vec<f64> = m
            .iter()
            .zip(&noise)
            .map(|(rm, e)| 0.01 + 0.9 * rm + e)
            .collect();
        let input = PerformanceInput::with_constant_rf(p.clone(), m.clone(), 0.0).unwrap();
        let report = risk_adjusted_measures(&input).unwrap();

        let design = DMatrix::from_fn(24, 1, |r, _| m[r]);
        let fit =
            econometrics::ols_with_intercept(&design, &DVector::from_vec(p.clone())).unwrap();
        let se_alpha = fit.standard_errors[0];
        let se_beta = fit.standard_errors[1];
        assert!((report.jensen_alpha - 0.01).abs() < 3.0 * se_alpha + 1e-9);
        assert!((report.beta - 0.9).abs() < 3.0 * se_beta + 1e-9);

        let mean_excess = p.iter().sum::<f64>() / 24.0;
        let sigma = sample_std(&p).unwrap();
        assert_relative_eq!(report.sharpe, mean_excess / sigma, epsilon = 1e-12);
        assert_relative_eq!(report.treynor, mean_excess / report.beta, epsilon = 1e-12);
        assert_relative_eq!(
            report.alpha_information_ratio,
            report.jensen_alpha / report.residual_std,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            report.alpha_t_stat,
            report.jensen_alpha * 24f64.sqrt() / report.residual_std,
            epsilon = 1e-12
        );
    }

    #[test]
    fn jensen_alpha_equals_moment_identity() {
        // The regression intercept must equal mean(excess_p) - beta *
        // mean(excess_m) to 1e-12 (two computation routes, one number).
        let m = series(30, 0.025, 1.1);
        let p: Vec<f64> = m.iter().enumerate().map(|(i, rm)| 0.004 + 1.2 * rm + 0.003 * (i as f64 * 1.7).cos()).collect();
        let input = PerformanceInput::with_constant_rf(p.clone(), m.clone(), 0.001).unwrap();
        let report = risk_adjusted_measures(&input).unwrap();
        let mean_p = p.iter().map(|r| r - 0.001).sum::<f64>() / 30.0;
        let mean_m = m.iter().map(|r| r - 0.001).sum::<f64>() / 30.0;
        assert_relative_eq!(
            report.jensen_alpha,
            mean_p - report.beta * mean_m,
            epsilon = 1e-12
        );
    }

    #[test]
    fn sharpe_treynor_invariant_to_common_shift() {
        let m = series(20, 0.02, 0.8);
        let p: Vec<f64> = m.iter().map(|rm| 0.002 + 0.7 * rm).collect();
        let rf = vec![0.001; 20];
        let base = risk_adjusted_measures(
            &PerformanceInput::new(p.clone(), m.clone(), rf.clone()).unwrap(),
        )
        .unwrap();
        // Shift portfolio and risk-free by the same constant: excess
        // returns unchanged.
        let p2: Vec<f64> = p.iter().map(|r| r + 0.01).collect();
        let rf2: Vec<f64> = rf.iter().map(|r| r + 0.01).collect();
        let shifted =
            risk_adjusted_measures(&PerformanceInput::new(p2, m, rf2).unwrap()).unwrap();
        assert_relative_eq!(base.sharpe, shifted.sharpe, epsilon = 1e-12);
        // Beta changes with the shifted benchmark excess, so compare
        // Treynor through the unchanged mean excess instead.
        assert_relative_eq!(
            base.treynor * base.beta,
            shifted.treynor * shifted.beta,
            epsilon = 1e-12
        );
    }

    #[test]
    fn max_drawdown_known_path() {
        // 1.0 -> 1.1 -> 0.88 -> 0.968: worst drawdown = 1 - 0.88/1.1 = 0.2.
        let dd = max_drawdown(&[0.10, -0.20, 0.10]);
        assert_relative_eq!(dd, 0.2, epsilon = 1e-12);
        assert_eq!(max_drawdown(&[0.01, 0.02]), 0.0);
    }

    #[test]
    fn timing_linear_portfolio_has_zero_convexity() {
        let m = series(30, 0.03, 0.77);
        let p: Vec<f64> = m.iter().map(|rm| 0.001 + 1.1 * rm).collect();
        let input = PerformanceInput::with_constant_rf(p, m, 0.0).unwrap();
        let fit = timing_regression(&input).unwrap();
        assert!(fit.convexity.abs() < 1e-10, "convexity {}", fit.convexity);
    }

    #[test]
    fn timing_pure_convexity_recovered() {
        let m = series(30, 0.03, 0.77);
        let p: Vec<f64> = m.iter().map(|rm| rm * rm).collect();
        let input = PerformanceInput::with_constant_rf(p, m, 0.0).unwrap();
        let fit = timing_regression(&input).unwrap();
        assert_relative_eq!(fit.market, 0.0, epsilon = 1e-9);
        assert_relative_eq!(fit.convexity, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn timing_noisy_convex_fixture_within_3_se() {
        let m = series(120, 0.03, 0.59);
        let noise = series(120, 0.0015, 2.9);
        let p: Vec<f64> = m
            .iter()
            .zip(&noise)
            .map(|(rm, e)| 0.001 + 0.8 * rm + 2.0 * rm * rm + e)
            .collect();
        let input = PerformanceInput::with_constant_rf(p.clone(), m.clone(), 0.0).unwrap();
        let fit = timing_regression(&input).unwrap();
        let design = DMatrix::from_fn(120, 2, |r, c| if c == 0 { m[r] } else { m[r] * m[r] });
        let ols = econometrics::ols_with_intercept(&design, &DVector::from_vec(p)).unwrap();
        assert!((fit.convexity - 2.0).abs() < 3.0 * ols.standard_errors[2]);
        assert!(fit.t_stat_convexity > 3.0, "timing should be detected");
    }

    #[test]
    fn timing_collinear_rejected() {
        let input = PerformanceInput::with_constant_rf(
            vec![0.01, 0.02, 0.01, 0.03, 0.02],
            vec![0.02; 5],
            0.0,
        )
        .unwrap();
        assert!(timing_regression(&input).is_err());
    }

    fn two_segment_fixture() -> SegmentData {
        SegmentData {
            segments: vec!["EQ".into(), "FI".into()],
            portfolio_weights: vec![0.6, 0.4],
            portfolio_returns: vec![0.10, 0.02],
            benchmark_weights: vec![0.5, 0.5],
            benchmark_returns: vec![0.08, 0.03],
        }
    }

    #[test]
    fn brinson_identical_portfolio_is_null() {
        let data = SegmentData {
            segments: vec!["A".into(), "B".into()],
            portfolio_weights: vec![0.5, 0.5],
            portfolio_returns: vec![0.08, 0.03],
            benchmark_weights: vec![0.5, 0.5],
            benchmark_returns: vec![0.08, 0.03],
        };
        let report = brinson(&data).unwrap();
        assert_eq!(report.active_return, 0.0);
        for s in &report.segments {
            assert_eq!(s.allocation, 0.0);
            assert_eq!(s.selection, 0.0);
            assert_eq!(s.interaction, 0.0);
        }
    }

    #[test]
    fn brinson_equal_weights_pure_selection() {
        let data = SegmentData {
            segments: vec!["A".into(), "B".into()],
            portfolio_weights: vec![0.5, 0.5],
            portfolio_returns: vec![0.10, 0.03],
            benchmark_weights: vec![0.5, 0.5],
            benchmark_returns: vec![0.08, 0.03],
        };
        let report = brinson(&data).unwrap();
        assert_eq!(report.allocation, 0.0);
        assert_relative_eq!(report.selection, 0.5 * 0.02, epsilon = 1e-15);
        assert_eq!(report.interaction, 0.0);
    }

    #[test]
    fn brinson_hand_oracle() {
        // allocation = 0.1*0.08 - 0.1*0.03 = 0.005
        // selection  = 0.5*0.02 - 0.5*0.01 = 0.005
        // interaction = 0.1*0.02 + (-0.1)(-0.01) = 0.003
        // active = 0.068 - 0.055 = 0.013
        let report = brinson(&two_segment_fixture()).unwrap();
        assert_relative_eq!(report.allocation, 0.005, epsilon = 1e-15);
        assert_relative_eq!(report.selection, 0.005, epsilon = 1e-15);
        assert_relative_eq!(report.interaction, 0.003, epsilon = 1e-15);
        assert_relative_eq!(report.active_return, 0.013, epsilon = 1e-15);
        assert_relative_eq!(
            report.allocation + report.selection + report.interaction,
            report.active_return,
            epsilon = 1e-15
        );
    }

    #[test]
    fn brinson_benchmark_relative_totals_unchanged() {
        let data = two_segment_fixture();
        let standard = brinson_with(&data, BrinsonVariant::Standard).unwrap();
        let relative = brinson_with(&data, BrinsonVariant::BenchmarkRelative).unwrap();
        assert_relative_eq!(standard.allocation, relative.allocation, epsilon = 1e-15);
        assert_relative_eq!(relative.active_return, standard.active_return, epsilon = 1e-15);
        // Per-segment allocations differ between the variants.
        assert!(
            (standard.segments[0].allocation - relative.segments[0].allocation).abs() > 1e-6
        );
    }

    proptest! {
        #[test]
        fn brinson_reconciles_on_random_instances(
            raw_wp in proptest::collection::vec(0.01f64..1.0, 4),
            raw_wb in proptest::collection::vec(0.01f64..1.0, 4),
            rp in proptest::collection::vec(-0.2f64..0.2, 4),
            rb in proptest::collection::vec(-0.2f64..0.2, 4),
        ) {
            let wp_sum: f64 = raw_wp.iter().sum();
            let wb_sum: f64 = raw_wb.iter().sum();
            let data = SegmentData {
                segments: (0..4).map(|i| format!("S{i}")).collect(),
                portfolio_weights: raw_wp.iter().map(|w| w / wp_sum).collect(),
                portfolio_returns: rp,
                benchmark_weights: raw_wb.iter().map(|w| w / wb_sum).collect(),
                benchmark_returns: rb,
            };
            let report = brinson(&data).unwrap();
            let total = report.allocation + report.selection + report.interaction;
            prop_assert!((total - report.active_return).abs() < 1e-12);
        }

        #[test]
        fn currency_components_reconcile(
            l in -0.5f64..0.5,
            e in -0.5f64..0.5,
            rf_local in -0.02f64..0.1,
            rf_base in -0.02f64..0.1,
        ) {
            let leg = CurrencyLeg {
                local_return: l,
                currency_return: e,
                local_risk_free: rf_local,
                base_risk_free: rf_base,
            };
            let c = currency_decomposition(&leg).unwrap();
            let sum = c.local_excess + c.currency_excess + c.cross_product;
            prop_assert!((sum - (c.base_return - rf_base)).abs() < 1e-14);
        }
    }

    #[test]
    fn style_exact_and_mixed_recovery() {
        let a = series(40, 0.02, 0.67);
        let b = series(40, 0.015, 1.31);
        let styles = DMatrix::from_fn(40, 2, |r, c| if c == 0 { a[r] } else { b[r] });
        let names = vec!["small_cap".to_string(), "large_cap".to_string()];

        let fit = style_regression(&a, &styles, &names).unwrap();
        assert_relative_eq!(fit.exposures[0], 1.0, epsilon = 1e-10);
        assert_relative_eq!(fit.exposures[1], 0.0, epsilon = 1e-10);

        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * x + 0.5 * y).collect();
        let fit = style_regression(&mix, &styles, &names).unwrap();
        assert_relative_eq!(fit.exposures[0], 0.5, epsilon = 1e-10);
        assert_relative_eq!(fit.exposures[1], 0.5, epsilon = 1e-10);
        assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn style_noisy_mix_within_3_se() {
        let a = series(200, 0.02, 0.67);
        let b = series(200, 0.015, 1.31);
        let noise = series(200, 0.001, 2.41);
        let styles = DMatrix::from_fn(200, 2, |r, c| if c == 0 { a[r] } else { b[r] });
        let names = vec!["value".to_string(), "growth".to_string()];
        let p: Vec<f64> = (0..200).map(|i| 0.7 * a[i] + 0.3 * b[i] + noise[i]).collect();
        let fit = style_regression(&p, &styles, &names).unwrap();
        let ols =
            econometrics::ols_with_intercept(&styles, &DVector::from_vec(p.clone())).unwrap();
        assert!((fit.exposures[0] - 0.7).abs() < 3.0 * ols.standard_errors[1]);
        assert!((fit.exposures[1] - 0.3).abs() < 3.0 * ols.standard_errors[2]);
    }

    fn toy_factor_fit() -> FactorModelFit {
        FactorModelFit {
            assets: vec!["A".into(), "B".into()],
            factors: vec!["F0".into(), "F1".into()],
            intercepts: DVector::from_row_slice(&[0.001, 0.002]),
            loadings: DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.8, -0.2]),
            specific_variance: DVector::zeros(2),
            factor_covariance: econometrics::CovarianceEstimate {
                matrix: DMatrix::identity(2, 2),
                mean: DVector::zeros(2),
            },
        }
    }

    fn toy_factor_panel(t: usize) -> FactorPanel {
        let dates = (0..t).map(|i| format!("d{i}")).collect();
        let values = DMatrix::from_fn(t, 2, |r, c| ((r + 1) as f64 * (c as f64 + 0.5)) * 0.01);
        FactorPanel::new(dates, vec!["F0".into(), "F1".into()], values).unwrap()
    }

    #[test]
    fn factor_attribution_exact_model_has_zero_specific() {
        let fit = toy_factor_fit();
        let panel = toy_factor_panel(6);
        let weights = [0.6, 0.4];
        // Portfolio returns generated exactly by the model.
        let w = DVector::from_row_slice(&weights);
        let loadings_p = fit.loadings.transpose() * &w;
        let intercept_p = fit.intercepts.dot(&w);
        let returns: Vec<f64> = (0..6)
            .map(|t| {
                intercept_p
                    + loadings_p[0] * panel.values()[(t, 0)]
                    + loadings_p[1] * panel.values()[(t, 1)]
            })
            .collect();
        let attribution = factor_attribution(&fit, &panel, &weights, &returns).unwrap();
        for s in &attribution.specific {
            assert!(s.abs() < 1e-10, "specific {s}");
        }
        // Hand matrix oracle for the first period's contributions.
        for factor in 0..2 {
            let expect = (weights[0] * fit.loadings[(0, factor)]
                + weights[1] * fit.loadings[(1, factor)])
                * panel.values()[(0, factor)];
            assert_relative_eq!(attribution.contributions[0][factor], expect, epsilon = 1e-14);
        }
    }

    #[test]
    fn factor_attribution_zero_loadings_all_specific() {
        let mut fit = toy_factor_fit();
        fit.loadings = DMatrix::zeros(2, 2);
        let panel = toy_factor_panel(4);
        let returns = vec![0.01, -0.02, 0.005, 0.0];
        let weights = [0.5, 0.5];
        let attribution = factor_attribution(&fit, &panel, &weights, &returns).unwrap();
        let intercept = attribution.intercept_contribution;
        for (t, r) in returns.iter().enumerate() {
            assert_relative_eq!(attribution.specific[t], r - intercept, epsilon = 1e-15);
            assert_eq!(attribution.contributions[t], vec![0.0, 0.0]);
        }
    }

    #[test]
    fn factor_attribution_reconstructs_portfolio_return() {
        let fit = toy_factor_fit();
        let panel = toy_factor_panel(8);
        let weights = [0.3, 0.7];
        let returns: Vec<f64> = (0..8).map(|i| (i as f64 * 0.91).sin() * 0.02).collect();
        let attribution = factor_attribution(&fit, &panel, &weights, &returns).unwrap();
        for t in 0..8 {
            let rebuilt: f64 = attribution.contributions[t].iter().sum::<f64>()
                + attribution.intercept_contribution
                + attribution.specific[t];
            assert_relative_eq!(rebuilt, returns[t], epsilon = 1e-12);
        }
    }

    #[test]
    fn currency_trivial_and_forced_cases() {
        let zero = CurrencyLeg {
            local_return: 0.0,
            currency_return: 0.0,
            local_risk_free: 0.0,
            base_risk_free: 0.0,
        };
        let c = currency_decomposition(&zero).unwrap();
        assert_eq!(
            (c.base_return, c.local_excess, c.currency_excess, c.cross_product),
            (0.0, 0.0, 0.0, 0.0)
        );

        // E = 0 with matching risk-free rates: only local excess remains.
        let leg = CurrencyLeg {
            local_return: 0.03,
            currency_return: 0.0,
            local_risk_free: 0.01,
            base_risk_free: 0.01,
        };
        let c = currency_decomposition(&leg).unwrap();
        assert_relative_eq!(c.currency_excess, 0.0, epsilon = 1e-15);
        assert_eq!(c.cross_product, 0.0);
        assert_relative_eq!(c.local_excess, 0.02, epsilon = 1e-15);
    }

    #[test]
    fn currency_hand_oracle() {
        // L=0.05, E=0.02, Rfk=0.01, Rbase=0.005:
        // base = 0.071; local excess = 0.04;
        // currency excess = 0.01 + 0.02 + 0.0002 - 0.005 = 0.0252;
        // cross = 0.04 * 0.02 = 0.0008; sum = 0.066 = 0.071 - 0.005.
        let leg = CurrencyLeg {
            local_return: 0.05,
            currency_return: 0.02,
            local_risk_free: 0.01,
            base_risk_free: 0.005,
        };
        let c = currency_decomposition(&leg).unwrap();
        assert_relative_eq!(c.base_return, 0.071, epsilon = 1e-15);
        assert_relative_eq!(c.local_excess, 0.04, epsilon = 1e-15);
        assert_relative_eq!(c.currency_excess, 0.0252, epsilon = 1e-15);
        assert_relative_eq!(c.cross_product, 0.0008, epsilon = 1e-15);
        assert_relative_eq!(
            c.local_excess + c.currency_excess + c.cross_product,
            c.base_return - 0.005,
            epsilon = 1e-15
        );
    }
}
