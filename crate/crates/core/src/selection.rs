//! Security selection: factor-score rankings, Information Coefficient
//! statistics and the conversion of IC stability into view confidences.
//!
//! The IC of a ranking is the rank correlation between scores at one point
//! in time and realized returns over the following holding period. Its
//! mean/std ratio (the information ratio) and the fraction of positive-IC
//! holding periods (the hit ratio) are the two confidence sources for
//! views; negative information ratios always map to zero confidence.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::econometrics::{sample_std, spearman};
use crate::error::{Error, Result};
use crate::marketdata::ReturnPanel;

/// A dated best-first ordering of the universe with the raw scores that
/// induced it. Ties in score are broken by asset identifier ascending so
/// rankings are identical across runs and platforms.
#[derive(Debug, Clone)]
pub struct Ranking {
    pub date: String,
    /// Asset identifiers, best (highest score) first.
    pub assets: Vec<String>,
    /// Scores aligned with `assets`.
    pub scores: Vec<f64>,
}

impl Ranking {
    /// Ranks `universe` by descending score.
    pub fn from_scores(
        date: impl Into<String>,
        universe: &[String],
        scores: &[f64],
    ) -> Result<Self> {
        if universe.len() != scores.len() {
            return Err(Error::DimensionMismatch {
                context: "ranking scores",
                expected: universe.len(),
                actual: scores.len(),
            });
        }
        let mut order: Vec<usize> = (0..universe.len()).collect();
        order.sort_by(|&a, &b| {
            scores[b]
                .partial_cmp(&scores[a])
                .expect("finite scores")
                .then_with(|| universe[a].cmp(&universe[b]))
        });
        Ok(Self {
            date: date.into(),
            assets: order.iter().map(|&i| universe[i].clone()).collect(),
            scores: order.iter().map(|&i| scores[i]).collect(),
        })
    }

    pub fn score_of(&self, asset: &str) -> Option<f64> {
        self.assets.iter().position(|a| a == asset).map(|i| self.scores[i])
    }

    /// Top `count` assets (best scores).
    pub fn top(&self, count: usize) -> &[String] {
        &self.assets[..count.min(self.assets.len())]
    }

    /// Bottom `count` assets, worst first.
    pub fn bottom(&self, count: usize) -> Vec<String> {
        let n = self.assets.len();
        let count = count.min(n);
        self.assets[n - count..].iter().rev().cloned().collect()
    }
}

/// Per-holding-period Information Coefficients.
#[derive(Debug, Clone)]
pub struct IcSeries {
    pub dates: Vec<String>,
    pub values: Vec<f64>,
    pub holding_period: usize,
}

impl IcSeries {
    pub fn new(dates: Vec<String>, values: Vec<f64>, holding_period: usize) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::DimensionMismatch {
                context: "ic series",
                expected: dates.len(),
                actual: values.len(),
            });
        }
        if values.is_empty() {
            return Err(Error::InvalidInput("ic series: empty".into()));
        }
        if holding_period == 0 {
            return Err(Error::InvalidInput("ic series: holding period must be >= 1".into()));
        }
        if values.iter().any(|v| !(-1.0..=1.0).contains(v)) {
            return Err(Error::InvalidInput("ic series: IC outside [-1, 1]".into()));
        }
        Ok(Self { dates, values, holding_period })
    }
}

/// A long/short group view with the statistics that back it, ready to feed
/// portfolio construction.
#[derive(Debug, Clone)]
pub struct ViewSignal {
    pub group_long: Vec<String>,
    pub group_short: Option<Vec<String>>,
    /// Historical mean spread of group returns per holding period.
    pub expected_outperformance: f64,
    pub information_ratio: f64,
    pub hit_ratio: f64,
    pub confidence: f64,
}

impl ViewSignal {
    fn validate(&self) -> Result<()> {
        if self.group_long.is_empty() {
            return Err(Error::InvalidInput("view signal: empty long group".into()));
        }
        if let Some(short) = &self.group_short {
            if short.is_empty() {
                return Err(Error::InvalidInput("view signal: empty short group".into()));
            }
            if self.group_long.iter().any(|a| short.contains(a)) {
                return Err(Error::InvalidInput(
                    "view signal: long and short groups overlap".into(),
                ));
            }
        }
        if self.information_ratio <= 0.0 && self.confidence != 0.0 {
            return Err(Error::InvalidInput(
                "view signal: non-positive IR must carry zero confidence".into(),
            ));
        }
        Ok(())
    }
}

/// How a view confidence is derived from IC statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConfidenceMode {
    /// Confidence is the hit ratio.
    HitRatio,
    /// Confidence is the information ratio linearly clamped into [0, 1] by
    /// `cap`.
    InformationRatio { cap: f64 },
}

impl Default for ConfidenceMode {
    fn default() -> Self {
        ConfidenceMode::InformationRatio { cap: 1.0 }
    }
}

/// Composite model scores: per-factor cross-sectional standardization
/// (mean 0, sample std 1) followed by the weighted combination.
pub fn composite_score(exposures: &DMatrix<f64>, factor_weights: &[f64]) -> Result<Vec<f64>> {
    let (n, k) = (exposures.nrows(), exposures.ncols());
    if factor_weights.len() != k {
        return Err(Error::DimensionMismatch {
            context: "composite_score weights",
            expected: k,
            actual: factor_weights.len(),
        });
    }
    if n < 2 {
        return Err(Error::InvalidInput("composite_score: need at least 2 assets".into()));
    }
    let mut standardized = DMatrix::zeros(n, k);
    for j in 0..k {
        let col: Vec<f64> = exposures.column(j).iter().copied().collect();
        let mean = col.iter().sum::<f64>() / n as f64;
        let std = sample_std(&col)?;
        if std == 0.0 {
            return Err(Error::InvalidInput(format!(
                "composite_score: factor {j} has zero cross-sectional std"
            )));
        }
        for i in 0..n {
            standardized[(i, j)] = (col[i] - mean) / std;
        }
    }
    Ok((0..n)
        .map(|i| {
            factor_weights
                .iter()
                .enumerate()
                .map(|(j, w)| w * standardized[(i, j)])
                .sum()
        })
        .collect())
}

/// Information Coefficient of one ranking: Spearman correlation of its
/// scores with realized forward returns. `forward_returns` is aligned with
/// `assets`, which must cover the ranking's universe.
pub fn information_coefficient(
    ranking: &Ranking,
    assets: &[String],
    forward_returns: &[f64],
) -> Result<f64> {
    if assets.len() != forward_returns.len() {
        return Err(Error::DimensionMismatch {
            context: "information_coefficient",
            expected: assets.len(),
            actual: forward_returns.len(),
        });
    }
    if ranking.assets.len() != assets.len() {
        return Err(Error::DimensionMismatch {
            context: "information_coefficient universe",
            expected: ranking.assets.len(),
            actual: assets.len(),
        });
    }
    if assets.len() < 2 {
        return Err(Error::InvalidInput(
            "information_coefficient: need at least 2 assets".into(),
        ));
    }
    let by_asset: HashMap<&str, f64> = assets
        .iter()
        .map(String::as_str)
        .zip(forward_returns.iter().copied())
        .collect();
    let mut scores = Vec::with_capacity(assets.len());
    let mut realized = Vec::with_capacity(assets.len());
    for (asset, score) in ranking.assets.iter().zip(&ranking.scores) {
        let fwd = by_asset
            .get(asset.as_str())
            .ok_or_else(|| Error::UnknownAsset(asset.clone()))?;
        scores.push(*score);
        realized.push(*fwd);
    }
    spearman(&scores, &realized)
}

/// Mean IC divided by its sample standard deviation.
pub fn information_ratio(ics: &IcSeries) -> Result<f64> {
    if ics.values.len() < 2 {
        return Err(Error::InvalidInput(
            "information_ratio: need at least 2 IC observations".into(),
        ));
    }
    let all_equal = ics.values.iter().all(|v| *v == ics.values[0]);
    let mean = ics.values.iter().sum::<f64>() / ics.values.len() as f64;
    let std = sample_std(&ics.values)?;
    if all_equal || std == 0.0 {
        return Err(Error::InvalidInput(
            "information_ratio: zero IC standard deviation".into(),
        ));
    }
    Ok(mean / std)
}

/// Fraction of holding periods with strictly positive IC; exact zeros
/// count as non-positive.
pub fn hit_ratio(ics: &IcSeries) -> Result<f64> {
    if ics.values.is_empty() {
        return Err(Error::InvalidInput("hit_ratio: empty IC series".into()));
    }
    let positive = ics.values.iter().filter(|&&v| v > 0.0).count();
    Ok(positive as f64 / ics.values.len() as f64)
}

/// Maps IC statistics to a confidence in [0, 1]. A non-positive
/// information ratio yields zero under either mode.
pub fn view_confidence(ir: f64, hr: f64, mode: ConfidenceMode) -> Result<f64> {
    if !(0.0..=1.0).contains(&hr) {
        return Err(Error::InvalidInput(format!(
            "view_confidence: hit ratio {hr} outside [0,1]"
        )));
    }
    if ir <= 0.0 {
        return Ok(0.0);
    }
    match mode {
        ConfidenceMode::HitRatio => Ok(hr),
        ConfidenceMode::InformationRatio { cap } => {
            if !(cap > 0.0) {
                return Err(Error::InvalidInput("view_confidence: cap must be positive".into()));
            }
            Ok((ir / cap).clamp(0.0, 1.0))
        }
    }
}

/// Compound return of asset `i` over return rows `(t, t + h]`.
fn forward_return(returns: &ReturnPanel, t: usize, h: usize, i: usize) -> f64 {
    let mut acc = 1.0;
    for step in 1..=h {
        acc *= 1.0 + returns.returns()[(t + step, i)];
    }
    acc - 1.0
}

/// Builds the long/short group view implied by a ranking history: groups
/// come from the most recent ranking, the statistics (mean top-minus-bottom
/// spread, IR, hit ratio, confidence) from the full history at the given
/// holding period.
///
/// Each ranking's date must be a return date; the forward window for a
/// ranking at return row `t` covers rows `(t, t + holding_period]`, and
/// rankings without a complete window are skipped for statistics.
pub fn build_view_signals(
    rankings: &[Ranking],
    returns: &ReturnPanel,
    holding_period: usize,
    quantile: f64,
    mode: ConfidenceMode,
) -> Result<Vec<ViewSignal>> {
    if rankings.is_empty() {
        return Err(Error::InvalidInput("build_view_signals: no rankings".into()));
    }
    if !(quantile > 0.0 && quantile <= 0.5) {
        return Err(Error::InvalidInput(format!(
            "build_view_signals: quantile {quantile} outside (0, 0.5]"
        )));
    }
    if holding_period == 0 {
        return Err(Error::InvalidInput(
            "build_view_signals: holding period must be >= 1".into(),
        ));
    }
    let universe = returns.assets();
    let n = universe.len();
    if (n as f64) < 2.0 / quantile {
        return Err(Error::InvalidInput(format!(
            "build_view_signals: universe of {n} is smaller than 2/quantile = {}",
            2.0 / quantile
        )));
    }
    let group_size = ((n as f64) * quantile).floor() as usize;

    let mut ic_dates = Vec::new();
    let mut ic_values = Vec::new();
    let mut spreads = Vec::new();
    for ranking in rankings {
        let t = returns
            .dates()
            .iter()
            .position(|d| d == &ranking.date)
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "build_view_signals: ranking date {} not in returns",
                    ranking.date
                ))
            })?;
        if t + holding_period > returns.n_periods() - 1 {
            continue; // incomplete forward window
        }
        let forward: Vec<f64> = (0..n)
            .map(|i| forward_return(returns, t, holding_period, i))
            .collect();
        ic_values.push(information_coefficient(ranking, universe, &forward)?);
        ic_dates.push(ranking.date.clone());

        let by_asset: HashMap<&str, f64> = universe
            .iter()
            .map(String::as_str)
            .zip(forward.iter().copied())
            .collect();
        let mean_of = |group: &[String]| -> f64 {
            group.iter().map(|a| by_asset[a.as_str()]).sum::<f64>() / group.len() as f64
        };
        let top = ranking.top(group_size).to_vec();
        let bottom = ranking.bottom(group_size);
        spreads.push(mean_of(&top) - mean_of(&bottom));
    }
    if ic_values.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "build_view_signals: need at least 2 complete holding periods, got {}",
            ic_values.len()
        )));
    }

    let ics = IcSeries::new(ic_dates, ic_values, holding_period)?;
    // A constant IC series (e.g. perfect foresight, IC = 1 every period) has
    // no finite IR; carry its sign as an infinity so the confidence rules
    // still apply.
    let ir = match information_ratio(&ics) {
        Ok(v) => v,
        Err(_) => {
            let mean = ics.values.iter().sum::<f64>() / ics.values.len() as f64;
            if mean > 0.0 {
                f64::INFINITY
            } else if mean < 0.0 {
                f64::NEG_INFINITY
            } else {
                0.0
            }
        }
    };
    let hr = hit_ratio(&ics)?;
    let confidence = view_confidence(ir, hr, mode)?;
    let latest = rankings.last().expect("non-empty");
    let signal = ViewSignal {
        group_long: latest.top(group_size).to_vec(),
        group_short: Some(latest.bottom(group_size)),
        expected_outperformance: spreads.iter().sum::<f64>() / spreads.len() as f64,
        information_ratio: ir,
        hit_ratio: hr,
        confidence,
    };
    signal.validate()?;
    Ok(vec![signal])
}

/// Exhaustive simplex-grid search for the factor weights maximizing mean
/// IC of the composite ranking over the supplied history. `steps` is the
/// grid resolution per factor (weights are multiples of `1/steps`); ties
/// keep the first maximizer in enumeration order.
pub fn optimize_factor_weights(
    exposures: &DMatrix<f64>,
    returns: &ReturnPanel,
    ranking_dates: &[String],
    holding_period: usize,
    steps: usize,
) -> Result<Vec<f64>> {
    let k = exposures.ncols();
    if k == 0 || steps == 0 {
        return Err(Error::InvalidInput("optimize_factor_weights: empty grid".into()));
    }
    let n = returns.assets().len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut composition = vec![0usize; k];
    enumerate_compositions(steps, k, 0, &mut composition, &mut |comp| {
        let weights: Vec<f64> = comp.iter().map(|&c| c as f64 / steps as f64).collect();
        let Ok(scores) = composite_score(exposures, &weights) else {
            return;
        };
        let mut ics = Vec::new();
        for date in ranking_dates {
            let Some(t) = returns.dates().iter().position(|d| d == date) else {
                continue;
            };
            if t + holding_period > returns.n_periods() - 1 {
                continue;
            }
            let Ok(ranking) = Ranking::from_scores(date.clone(), returns.assets(), &scores) else {
                continue;
            };
            let forward: Vec<f64> = (0..n)
                .map(|i| forward_return(returns, t, holding_period, i))
                .collect();
            if let Ok(ic) = information_coefficient(&ranking, returns.assets(), &forward) {
                ics.push(ic);
            }
        }
        if ics.is_empty() {
            return;
        }
        let mean_ic = ics.iter().sum::<f64>() / ics.len() as f64;
        if best.as_ref().is_none_or(|(b, _)| mean_ic > *b) {
            best = Some((mean_ic, weights));
        }
    });
    best.map(|(_, w)| w).ok_or_else(|| {
        Error::InvalidInput("optimize_factor_weights: no evaluable grid point".into())
    })
}

/// Visits every composition of `total` into `k` non-negative parts.
fn enumerate_compositions(
    total: usize,
    k: usize,
    idx: usize,
    current: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    if idx == k - 1 {
        current[idx] = total;
        visit(current);
        return;
    }
    for c in 0..=total {
        current[idx] = c;
        enumerate_compositions(total - c, k, idx + 1, current, visit);
    }
}
