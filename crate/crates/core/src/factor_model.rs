//! Multi-factor and single-index return models, Blume beta adjustment and
//! the single-index risk decomposition.
//!
//! The multi-factor model is `R_it = a_i + sum_k b_ik F_kt + e_it`, fit by
//! per-asset time-series OLS. The single-index model is the one-factor
//! special case against a benchmark return series; its variance identities
//! (`sigma_i^2 = beta_i^2 sigma_m^2 + sigma_ei^2` and friends) power the
//! portfolio risk decomposition.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::econometrics::{self, CovarianceEstimate};
use crate::error::{Error, Result};
use crate::marketdata::ReturnPanel;

/// Dated factor-return observations, `[date x factor]`.
#[derive(Debug, Clone)]
pub struct FactorPanel {
    dates: Vec<String>,
    factors: Vec<String>,
    values: DMatrix<f64>,
}

impl FactorPanel {
    pub fn new(dates: Vec<String>, factors: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != dates.len() || values.ncols() != factors.len() {
            return Err(Error::InvalidInput("factor panel: shape mismatch".into()));
        }
        Ok(Self { dates, factors, values })
    }

    pub fn dates(&self) -> &[String] {
        &self.dates
    }

    pub fn factors(&self) -> &[String] {
        &self.factors
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Restricts to rows `[start, end)`.
    pub fn slice_periods(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.dates.len() {
            return Err(Error::InvalidInput(format!(
                "factor panel slice: invalid range {start}..{end}"
            )));
        }
        Self::new(
            self.dates[start..end].to_vec(),
            self.factors.clone(),
            self.values.rows(start, end - start).into_owned(),
        )
    }
}

/// Estimated multi-factor model: per-asset intercepts, loadings and
/// specific variances, plus the factor-return covariance.
#[derive(Debug, Clone)]
pub struct FactorModelFit {
    pub assets: Vec<String>,
    pub factors: Vec<String>,
    pub intercepts: DVector<f64>,
    /// `[asset x factor]` sensitivities.
    pub loadings: DMatrix<f64>,
    /// Residual variance per asset (`n - k` denominator).
    pub specific_variance: DVector<f64>,
    pub factor_covariance: CovarianceEstimate,
}

/// Estimated single-index model over a whole universe.
#[derive(Debug, Clone)]
pub struct IndexFit {
    pub assets: Vec<String>,
    pub alpha: DVector<f64>,
    pub beta: DVector<f64>,
    pub residual_variance: DVector<f64>,
    pub market_variance: f64,
}

/// One asset's single-index estimates.
#[derive(Debug, Clone, Copy)]
pub struct SingleIndexEntry {
    pub alpha: f64,
    pub beta: f64,
    pub residual_variance: f64,
    pub market_variance: f64,
}

/// Which way the factor regressions run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimationMode {
    /// Per-asset regression of return history on factor-return history
    /// (the default; what the risk decomposition consumes).
    TimeSeries,
    /// Per-date regression of the cross-section of asset returns on fixed
    /// exposures, estimating factor returns instead of loadings.
    CrossSectional,
}

/// Fits the multi-factor model by per-asset time-series OLS with intercept.
pub fn fit_factor_model(returns: &ReturnPanel, factors: &FactorPanel) -> Result<FactorModelFit> {
    if returns.dates() != factors.dates() {
        return Err(Error::InvalidInput(
            "fit_factor_model: return and factor dates are not aligned".into(),
        ));
    }
    let t = returns.n_periods();
    let k = factors.factors().len();
    if t <= k + 1 {
        return Err(Error::InvalidInput(format!(
            "fit_factor_model: need more than {} observations, got {t}",
            k + 1
        )));
    }

    let n = returns.assets().len();
    let mut intercepts = DVector::zeros(n);
    let mut loadings = DMatrix::zeros(n, k);
    let mut specific = DVector::zeros(n);
    for i in 0..n {
        let y = DVector::from_fn(t, |r, _| returns.returns()[(r, i)]);
        let fit = econometrics::ols_with_intercept(factors.values(), &y).map_err(|e| match e {
            Error::Singular(_) => Error::Singular(format!(
                "fit_factor_model: factor matrix rank deficient fitting {}",
                returns.assets()[i]
            )),
            other => other,
        })?;
        intercepts[i] = fit.coefficients[0];
        for j in 0..k {
            loadings[(i, j)] = fit.coefficients[j + 1];
        }
        specific[i] = fit.residual_variance;
    }

    let factor_covariance = econometrics::covariance_of(factors.values())?;
    Ok(FactorModelFit {
        assets: returns.assets().to_vec(),
        factors: factors.factors().to_vec(),
        intercepts,
        loadings,
        specific_variance: specific,
        factor_covariance,
    })
}

/// Cross-sectional counterpart: given fixed `[asset x factor]` exposures,
/// regress each date's return cross-section on them, producing a panel of
/// estimated factor returns (intercept dropped into the panel as well).
pub fn cross_sectional_factor_returns(
    returns: &ReturnPanel,
    exposures: &DMatrix<f64>,
    factor_names: &[String],
) -> Result<FactorPanel> {
    let n = returns.assets().len();
    if exposures.nrows() != n {
        return Err(Error::DimensionMismatch {
            context: "cross-sectional exposures",
            expected: n,
            actual: exposures.nrows(),
        });
    }
    if exposures.ncols() != factor_names.len() {
        return Err(Error::DimensionMismatch {
            context: "cross-sectional factor names",
            expected: exposures.ncols(),
            actual: factor_names.len(),
        });
    }
    let k = exposures.ncols();
    let mut values = DMatrix::zeros(returns.n_periods(), k);
    for t in 0..returns.n_periods() {
        let y = returns.returns().row(t).transpose();
        let fit = econometrics::ols_with_intercept(exposures, &y)?;
        for j in 0..k {
            values[(t, j)] = fit.coefficients[j + 1];
        }
    }
    FactorPanel::new(returns.dates().to_vec(), factor_names.to_vec(), values)
}

/// Fits one asset's single-index model.
///
/// Beta is computed as `cov(R_i, R_m)/var(R_m)` and cross-checked against
/// the regression slope; the two routes agree to 1e-10 by construction of
/// OLS on a single regressor.
pub fn fit_single_index(asset_returns: &[f64], market_returns: &[f64]) -> Result<SingleIndexEntry> {
    if asset_returns.len() != market_returns.len() {
        return Err(Error::DimensionMismatch {
            context: "fit_single_index",
            expected: asset_returns.len(),
            actual: market_returns.len(),
        });
    }
    let t = asset_returns.len();
    if t < 3 {
        return Err(Error::InvalidInput(
            "fit_single_index: need at least 3 observations".into(),
        ));
    }
    let n = t as f64;
    let mean_a = asset_returns.iter().sum::<f64>() / n;
    let mean_m = market_returns.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_m = 0.0;
    for (a, m) in asset_returns.iter().zip(market_returns) {
        cov += (a - mean_a) * (m - mean_m);
        var_m += (m - mean_m) * (m - mean_m);
    }
    cov /= n - 1.0;
    var_m /= n - 1.0;
    if !(var_m > 0.0) {
        return Err(Error::InvalidInput("fit_single_index: zero market variance".into()));
    }

    let beta = cov / var_m;
    let alpha = mean_a - beta * mean_m;
    // Residual variance from the regression convention (n - 2 denominator).
    let ss_res: f64 = asset_returns
        .iter()
        .zip(market_returns)
        .map(|(a, m)| {
            let e = a - alpha - beta * m;
            e * e
        })
        .sum();
    Ok(SingleIndexEntry {
        alpha,
        beta,
        residual_variance: ss_res / (n - 2.0),
        market_variance: var_m,
    })
}

/// Fits the single-index model for every asset in the panel against a
/// benchmark return series aligned with the panel's periods.
pub fn fit_index_model(returns: &ReturnPanel, market_returns: &[f64]) -> Result<IndexFit> {
    if market_returns.len() != returns.n_periods() {
        return Err(Error::DimensionMismatch {
            context: "fit_index_model market series",
            expected: returns.n_periods(),
            actual: market_returns.len(),
        });
    }
    let n = returns.assets().len();
    let mut alpha = DVector::zeros(n);
    let mut beta = DVector::zeros(n);
    let mut resid = DVector::zeros(n);
    let mut market_variance = 0.0;
    for i in 0..n {
        let series: Vec<f64> = returns.returns().column(i).iter().copied().collect();
        let entry = fit_single_index(&series, market_returns)?;
        alpha[i] = entry.alpha;
        beta[i] = entry.beta;
        resid[i] = entry.residual_variance;
        market_variance = entry.market_variance;
    }
    Ok(IndexFit {
        assets: returns.assets().to_vec(),
        alpha,
        beta,
        residual_variance: resid,
        market_variance,
    })
}

/// Blume adjustment: regress later-period betas on earlier-period betas and
/// apply the fitted line to current betas, shrinking them toward the market.
pub fn blume_adjust(
    betas_early: &[f64],
    betas_late: &[f64],
    betas_current: &[f64],
) -> Result<Vec<f64>> {
    if betas_early.len() != betas_late.len() {
        return Err(Error::DimensionMismatch {
            context: "blume_adjust",
            expected: betas_early.len(),
            actual: betas_late.len(),
        });
    }
    if betas_early.len() < 3 {
        return Err(Error::InvalidInput("blume_adjust: need at least 3 assets".into()));
    }
    let regressors = DMatrix::from_fn(betas_early.len(), 1, |r, _| betas_early[r]);
    let response = DVector::from_row_slice(betas_late);
    let fit = econometrics::ols_with_intercept(&regressors, &response).map_err(|e| match e {
        Error::Singular(_) => {
            Error::InvalidInput("blume_adjust: zero variance in early betas".into())
        }
        other => other,
    })?;
    let (c0, c1) = (fit.coefficients[0], fit.coefficients[1]);
    Ok(betas_current.iter().map(|b| c0 + c1 * b).collect())
}

/// Blume-adjusted betas from a return panel: betas are estimated on the two
/// halves of the history (the split when explicit periods are not given),
/// the half-on-half regression is fit, and the full-sample betas are
/// adjusted through it.
pub fn blume_adjusted_betas(
    returns: &ReturnPanel,
    market_returns: &[f64],
) -> Result<BTreeMap<String, f64>> {
    let t = returns.n_periods();
    if t < 6 {
        return Err(Error::InvalidInput(
            "blume_adjusted_betas: need at least 6 periods to split".into(),
        ));
    }
    let mid = t / 2;
    let early = fit_index_model(&returns.slice_periods(0, mid)?, &market_returns[..mid])?;
    let late = fit_index_model(&returns.slice_periods(mid, t)?, &market_returns[mid..])?;
    let current = fit_index_model(returns, market_returns)?;
    let adjusted = blume_adjust(
        early.beta.as_slice(),
        late.beta.as_slice(),
        current.beta.as_slice(),
    )?;
    Ok(returns
        .assets()
        .iter()
        .cloned()
        .zip(adjusted)
        .collect())
}

impl IndexFit {
    fn index_of(&self, asset: &str) -> Result<usize> {
        self.assets
            .iter()
            .position(|a| a == asset)
            .ok_or_else(|| Error::UnknownAsset(asset.to_string()))
    }

    /// Security return variance `beta^2 sigma_m^2 + sigma_e^2`.
    pub fn security_variance(&self, asset: &str) -> Result<f64> {
        let i = self.index_of(asset)?;
        Ok(self.beta[i] * self.beta[i] * self.market_variance + self.residual_variance[i])
    }

    /// Portfolio variance `beta_p^2 sigma_m^2 + sum w_i^2 sigma_ei^2` with
    /// `beta_p = sum w_i beta_i`.
    pub fn portfolio_variance(&self, weights: &[f64]) -> Result<f64> {
        if weights.len() != self.assets.len() {
            return Err(Error::DimensionMismatch {
                context: "portfolio_variance weights",
                expected: self.assets.len(),
                actual: weights.len(),
            });
        }
        let beta_p: f64 = weights.iter().zip(self.beta.iter()).map(|(w, b)| w * b).sum();
        let specific: f64 = weights
            .iter()
            .zip(self.residual_variance.iter())
            .map(|(w, v)| w * w * v)
            .sum();
        Ok(beta_p * beta_p * self.market_variance + specific)
    }

    /// Full covariance matrix assembled from the single-index identities:
    /// diagonal from the security-variance equation, off-diagonal from the
    /// product formula.
    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let n = self.assets.len();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.beta[i] * self.beta[i] * self.market_variance + self.residual_variance[i]
            } else {
                security_covariance(self.beta[i], self.beta[j], self.market_variance)
            }
        })
    }
}

/// Cross-security covariance `beta_i beta_j sigma_m^2`.
pub fn security_covariance(beta_i: f64, beta_j: f64, market_variance: f64) -> f64 {
    beta_i * beta_j * market_variance
}

/// Loads a factors CSV with header `date,factor_id,value`.
pub fn load_factors(path: impl AsRef<Path>) -> Result<FactorPanel> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::InvalidInput(format!("cannot open {path_str}: {e}")))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Data { path: path_str.clone(), row: 1, message: e.to_string() })?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["date", "factor_id", "value"] {
        return Err(Error::Data {
            path: path_str,
            row: 1,
            message: "expected header `date,factor_id,value`".into(),
        });
    }
    let mut cells: BTreeMap<(String, String), f64> = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::Data {
            path: path_str.clone(),
            row,
            message: e.to_string(),
        })?;
        let value: f64 = record[2].parse().map_err(|_| Error::Data {
            path: path_str.clone(),
            row,
            message: format!("unparseable value `{}`", &record[2]),
        })?;
        if cells.insert((record[0].to_string(), record[1].to_string()), value).is_some() {
            return Err(Error::Data {
                path: path_str.clone(),
                row,
                message: format!("duplicate (date, factor) = ({}, {})", &record[0], &record[1]),
            });
        }
    }
    let mut dates: Vec<String> = cells.keys().map(|(d, _)| d.clone()).collect();
    dates.dedup();
    let mut factors: Vec<String> = cells.keys().map(|(_, f)| f.clone()).collect();
    factors.sort();
    factors.dedup();
    let mut values = DMatrix::zeros(dates.len(), factors.len());
    for (r, d) in dates.iter().enumerate() {
        for (c, f) in factors.iter().enumerate() {
            values[(r, c)] = *cells.get(&(d.clone(), f.clone())).ok_or_else(|| Error::Data {
                path: path_str.clone(),
                row: 0,
                message: format!("missing (date, factor) = ({d}, {f})"),
            })?;
        }
    }
    FactorPanel::new(dates, factors, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marketdata::{compute_returns, synthetic_market, SyntheticSpec};
    use approx::assert_relative_eq;

    fn factor_panel_from(values: DMatrix<f64>, dates: Vec<String>) -> FactorPanel {
        let names = (0..values.ncols()).map(|k| format!("F{k}")).collect();
        FactorPanel::new(dates, names, values).unwrap()
    }

    #[test]
    fn factor_model_noiseless_recovery() {
        let dates: Vec<String> = (0..10).map(|i| format!("2024-01-{:02}", i + 1)).collect();
        let f = DMatrix::from_fn(10, 1, |r, _| (r as f64 * 0.77).sin() * 0.02);
        let returns = DMatrix::from_fn(10, 1, |r, _| 0.01 + 1.5 * f[(r, 0)]);
        let rp = ReturnPanel::new(dates.clone(), vec!["X".into()], returns).unwrap();
        let fit = fit_factor_model(&rp, &factor_panel_from(f, dates)).unwrap();
        assert_relative_eq!(fit.intercepts[0], 0.01, epsilon = 1e-12);
        assert_relative_eq!(fit.loadings[(0, 0)], 1.5, epsilon = 1e-12);
        assert!(fit.specific_variance[0] < 1e-20);
    }

    #[test]
    fn factor_model_zero_factor_is_rank_deficient() {
        let dates: Vec<String> = (0..8).map(|i| format!("2024-01-{:02}", i + 1)).collect();
        let f = DMatrix::zeros(8, 1);
        let returns = DMatrix::from_fn(8, 1, |r, _| (r as f64 * 0.3).cos() * 0.01);
        let rp = ReturnPanel::new(dates.clone(), vec!["X".into()], returns).unwrap();
        assert!(matches!(
            fit_factor_model(&rp, &factor_panel_from(f, dates)),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn factor_model_misaligned_dates_rejected() {
        let dates_a: Vec<String> = (0..5).map(|i| format!("2024-01-{:02}", i + 1)).collect();
        let dates_b: Vec<String> = (0..5).map(|i| format!("2024-02-{:02}", i + 1)).collect();
        let rp = ReturnPanel::new(dates_a, vec!["X".into()], DMatrix::zeros(5, 1)).unwrap();
        let fp = factor_panel_from(DMatrix::from_element(5, 1, 0.01), dates_b);
        assert!(fit_factor_model(&rp, &fp).is_err());
    }

    #[test]
    fn factor_model_recovers_generating_loadings_within_3_se() {
        // Generate-from-model oracle: two factors plus sigma = 0.01 noise
        // over 500 periods.
        let spec = SyntheticSpec {
            assets: 4,
            periods: 501,
            initial_price: 100.0,
            drift: vec![0.0; 4],
            volatility: vec![0.01; 4],
            factor_loadings: Some(DMatrix::from_row_slice(
                4,
                2,
                &[1.0, 0.2, 0.8, -0.5, 1.2, 0.7, 0.5, 1.0],
            )),
            factor_volatility: vec![0.015, 0.01],
            average_volume: 1e6,
            shares_outstanding: 1e7,
        };
        let market = synthetic_market(17, &spec).unwrap();
        let rp = compute_returns(&market.prices).unwrap();
        let shocks = market.factor_returns.unwrap();
        let fp = factor_panel_from(shocks, rp.dates().to_vec());
        let fit = fit_factor_model(&rp, &fp).unwrap();
        // Log returns vs simple returns introduce a small bias; 3 standard
        // errors with sigma = 0.01 over 500 periods is ~0.004 wide per unit
        // of factor vol, comfortably above it.
        let truth = [[1.0, 0.2], [0.8, -0.5], [1.2, 0.7], [0.5, 1.0]];
        for i in 0..4 {
            for k in 0..2 {
                let se = (fit.specific_variance[i]
                    / (500.0 * fit.factor_covariance.matrix[(k, k)]))
                    .sqrt();
                assert!(
                    (fit.loadings[(i, k)] - truth[i][k]).abs() < 3.0 * se + 5e-3,
                    "loading ({i},{k}) = {} vs {}",
                    fit.loadings[(i, k)],
                    truth[i][k]
                );
            }
        }
    }

    #[test]
    fn factor_model_residuals_orthogonal_to_factors() {
        let market = synthetic_market(29, &SyntheticSpec::uniform(3, 60, 0.0, 0.02)).unwrap();
        let rp = compute_returns(&market.prices).unwrap();
        let f = DMatrix::from_fn(rp.n_periods(), 2, |r, c| {
            ((r as f64 + 1.0) * (0.31 + c as f64 * 0.17)).sin() * 0.01
        });
        let fp = factor_panel_from(f.clone(), rp.dates().to_vec());
        let fit = fit_factor_model(&rp, &fp).unwrap();
        for i in 0..3 {
            for k in 0..2 {
                let mut dot = 0.0;
                for t in 0..rp.n_periods() {
                    let resid = rp.returns()[(t, i)]
                        - fit.intercepts[i]
                        - fit.loadings[(i, 0)] * f[(t, 0)]
                        - fit.loadings[(i, 1)] * f[(t, 1)];
                    dot += resid * f[(t, k)];
                }
                assert!(dot.abs() < 1e-8, "asset {i} factor {k}: {dot}");
            }
        }
    }

    #[test]
    fn single_index_identity_and_constant_cases() {
        let m: Vec<f64> = (0..10).map(|i| (i as f64 * 0.9).sin() * 0.02).collect();
        let fit = fit_single_index(&m, &m).unwrap();
        assert_relative_eq!(fit.beta, 1.0, epsilon = 1e-12);
        assert_relative_eq!(fit.alpha, 0.0, epsilon = 1e-14);
        assert!(fit.residual_variance < 1e-25);

        let constant = vec![0.004; 10];
        let fit = fit_single_index(&constant, &m).unwrap();
        assert_relative_eq!(fit.beta, 0.0, epsilon = 1e-14);
        assert_relative_eq!(fit.alpha, 0.004, epsilon = 1e-14);
    }

    #[test]
    fn single_index_moment_and_regression_routes_agree() {
        let m: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin() * 0.02).collect();
        let a: Vec<f64> = m
            .iter()
            .enumerate()
            .map(|(i, r)| 0.001 + 0.7 * r + 0.005 * (i as f64 * 1.3).cos())
            .collect();
        let entry = fit_single_index(&a, &m).unwrap();

        let design = DMatrix::from_fn(50, 1, |r, _| m[r]);
        let fit = econometrics::ols_with_intercept(&design, &DVector::from_row_slice(&a)).unwrap();
        assert_relative_eq!(entry.beta, fit.coefficients[1], epsilon = 1e-10);
        assert_relative_eq!(entry.alpha, fit.coefficients[0], epsilon = 1e-10);
        assert_relative_eq!(entry.residual_variance, fit.residual_variance, epsilon = 1e-14);
    }

    #[test]
    fn single_index_generate_and_fit_oracle() {
        // R_i = 0.002 + 0.8 R_m + noise over 1000 periods.
        let market = synthetic_market(31, &SyntheticSpec::uniform(1, 1001, 0.0, 0.02)).unwrap();
        let rp = compute_returns(&market.prices).unwrap();
        let m: Vec<f64> = rp.returns().column(0).iter().copied().collect();
        let noise_market =
            synthetic_market(32, &SyntheticSpec::uniform(1, 1001, 0.0, 0.005)).unwrap();
        let noise_rp = compute_returns(&noise_market.prices).unwrap();
        let a: Vec<f64> = m
            .iter()
            .zip(noise_rp.returns().column(0).iter())
            .map(|(r, e)| 0.002 + 0.8 * r + e)
            .collect();
        let fit = fit_single_index(&a, &m).unwrap();
        assert!((fit.beta - 0.8).abs() < 0.05, "beta {}", fit.beta);
    }

    #[test]
    fn single_index_alpha_shifts_beta_invariant() {
        let m: Vec<f64> = (0..30).map(|i| (i as f64 * 0.61).sin() * 0.03).collect();
        let a: Vec<f64> = m.iter().map(|r| 0.5 * r + 0.001).collect();
        let base = fit_single_index(&a, &m).unwrap();
        let shifted: Vec<f64> = a.iter().map(|r| r + 0.01).collect();
        let fit = fit_single_index(&shifted, &m).unwrap();
        assert_relative_eq!(fit.beta, base.beta, epsilon = 1e-12);
        assert_relative_eq!(fit.alpha, base.alpha + 0.01, epsilon = 1e-12);
    }

    #[test]
    fn blume_identity_and_full_reversion() {
        let early = [0.5, 1.0, 1.5];
        let adjusted = blume_adjust(&early, &early, &[0.9, 1.1]).unwrap();
        assert_relative_eq!(adjusted[0], 0.9, epsilon = 1e-10);
        assert_relative_eq!(adjusted[1], 1.1, epsilon = 1e-10);

        let ones = [1.0, 1.0, 1.0];
        let adjusted = blume_adjust(&early, &ones, &[0.3, 2.0]).unwrap();
        assert_relative_eq!(adjusted[0], 1.0, epsilon = 1e-10);
        assert_relative_eq!(adjusted[1], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn blume_hand_oracle() {
        // late ~ early: c1 = 0.15/0.25 = 0.6, c0 = 0.4; adjusted(2.0) = 1.6.
        let adjusted = blume_adjust(&[0.5, 1.0, 1.5], &[0.7, 1.0, 1.3], &[2.0]).unwrap();
        assert_relative_eq!(adjusted[0], 1.6, epsilon = 1e-12);
    }

    #[test]
    fn blume_rejects_degenerate_inputs() {
        assert!(blume_adjust(&[1.0, 1.0], &[1.0, 1.0], &[1.0]).is_err());
        assert!(blume_adjust(&[1.0, 1.0, 1.0], &[0.9, 1.0, 1.1], &[1.0]).is_err());
    }

    fn toy_index_fit() -> IndexFit {
        IndexFit {
            assets: vec!["A".into(), "B".into(), "C".into()],
            alpha: DVector::zeros(3),
            beta: DVector::from_row_slice(&[0.8, 1.0, 1.3]),
            residual_variance: DVector::from_row_slice(&[0.01, 0.02, 0.005]),
            market_variance: 0.04,
        }
    }

    #[test]
    fn security_variance_forced_arithmetic() {
        let fit = toy_index_fit();
        // 0.8^2 * 0.04 + 0.01 = 0.0356
        assert_relative_eq!(fit.security_variance("A").unwrap(), 0.0356, epsilon = 1e-15);
        assert!(fit.security_variance("Z").is_err());

        let mut zero_beta = toy_index_fit();
        zero_beta.beta[0] = 0.0;
        assert_relative_eq!(
            zero_beta.security_variance("A").unwrap(),
            0.01,
            epsilon = 1e-15
        );
    }

    #[test]
    fn security_covariance_forced_arithmetic() {
        assert_eq!(security_covariance(0.0, 1.2, 0.05), 0.0);
        assert_relative_eq!(security_covariance(1.0, 1.0, 0.04), 0.04, epsilon = 1e-15);
        assert_relative_eq!(security_covariance(0.5, 2.0, 0.04), 0.04, epsilon = 1e-15);
    }

    #[test]
    fn portfolio_variance_matches_quadratic_form() {
        let fit = toy_index_fit();
        let w = [0.5, 0.3, 0.2];
        let direct = fit.portfolio_variance(&w).unwrap();
        let sigma = fit.covariance_matrix();
        let wv = DVector::from_row_slice(&w);
        let quad = (wv.transpose() * &sigma * &wv)[(0, 0)];
        assert_relative_eq!(direct, quad, max_relative = 1e-12);

        // Single asset recovers the security variance; zero weights give 0.
        assert_relative_eq!(
            fit.portfolio_variance(&[1.0, 0.0, 0.0]).unwrap(),
            fit.security_variance("A").unwrap(),
            epsilon = 1e-15
        );
        assert_eq!(fit.portfolio_variance(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!(fit.portfolio_variance(&[0.5, 0.5]).is_err());
    }

    #[test]
    fn blume_adjusted_betas_from_panel() {
        let market = synthetic_market(41, &SyntheticSpec::uniform(4, 121, 0.0, 0.02)).unwrap();
        let rp = compute_returns(&market.prices).unwrap();
        let bench = crate::marketdata::BenchmarkSpec::cap_weighted(&market.prices).unwrap();
        let m = bench.returns(&rp).unwrap();
        let adjusted = blume_adjusted_betas(&rp, &m).unwrap();
        assert_eq!(adjusted.len(), 4);
        for beta in adjusted.values() {
            assert!(beta.is_finite());
        }
    }
}
