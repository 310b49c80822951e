//! Price/volume panels, return computation, capitalization weights and the
//! deterministic synthetic market generator used by tests and fixtures.
//!
//! Dates are opaque ordered labels (ISO-8601 strings in the CSV schema);
//! the library never does calendar arithmetic on them. A missing
//! `(date, asset)` cell is a hard ingestion error — silent forward-fills
//! corrupt every estimator downstream.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

/// Dated close/volume matrices for a fixed asset universe.
#[derive(Debug, Clone)]
pub struct PricePanel {
    dates: Vec<String>,
    assets: Vec<String>,
    close: DMatrix<f64>,
    volume: DMatrix<f64>,
    shares_outstanding: DVector<f64>,
}

impl PricePanel {
    /// Validates and assembles a panel. `close` and `volume` are
    /// `[date x asset]`; `shares_outstanding` is per asset.
    pub fn new(
        dates: Vec<String>,
        assets: Vec<String>,
        close: DMatrix<f64>,
        volume: DMatrix<f64>,
        shares_outstanding: DVector<f64>,
    ) -> Result<Self> {
        let (t, n) = (dates.len(), assets.len());
        if close.nrows() != t || close.ncols() != n {
            return Err(Error::InvalidInput(format!(
                "price panel: close matrix is {}x{}, expected {}x{}",
                close.nrows(),
                close.ncols(),
                t,
                n
            )));
        }
        if volume.nrows() != t || volume.ncols() != n {
            return Err(Error::InvalidInput("price panel: volume shape mismatch".into()));
        }
        if shares_outstanding.len() != n {
            return Err(Error::DimensionMismatch {
                context: "shares_outstanding",
                expected: n,
                actual: shares_outstanding.len(),
            });
        }
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidInput(format!(
                    "price panel: dates not strictly increasing at {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for a in &assets {
            if !seen.insert(a.clone()) {
                return Err(Error::InvalidInput(format!("price panel: duplicate asset {a}")));
            }
        }
        if close.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::InvalidInput("price panel: non-positive price".into()));
        }
        if volume.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidInput("price panel: negative volume".into()));
        }
        if shares_outstanding.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidInput(
                "price panel: non-positive shares outstanding".into(),
            ));
        }
        Ok(Self { dates, assets, close, volume, shares_outstanding })
    }

    pub fn dates(&self) -> &[String] {
        &self.dates
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn close(&self) -> &DMatrix<f64> {
        &self.close
    }

    pub fn volume(&self) -> &DMatrix<f64> {
        &self.volume
    }

    pub fn shares_outstanding(&self) -> &DVector<f64> {
        &self.shares_outstanding
    }

    pub fn date_index(&self, date: &str) -> Option<usize> {
        self.dates.iter().position(|d| d == date)
    }

    pub fn asset_index(&self, asset: &str) -> Option<usize> {
        self.assets.iter().position(|a| a == asset)
    }

    /// Restricts the panel to `assets`, preserving the given order.
    pub fn select_assets(&self, assets: &[String]) -> Result<Self> {
        let idx: Vec<usize> = assets
            .iter()
            .map(|a| self.asset_index(a).ok_or_else(|| Error::UnknownAsset(a.clone())))
            .collect::<Result<_>>()?;
        let t = self.dates.len();
        let close = DMatrix::from_fn(t, idx.len(), |r, c| self.close[(r, idx[c])]);
        let volume = DMatrix::from_fn(t, idx.len(), |r, c| self.volume[(r, idx[c])]);
        let shares = DVector::from_fn(idx.len(), |c, _| self.shares_outstanding[idx[c]]);
        Self::new(self.dates.clone(), assets.to_vec(), close, volume, shares)
    }

    /// Restricts the panel to the date rows `[start, end)`.
    pub fn slice_dates(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.dates.len() {
            return Err(Error::InvalidInput(format!(
                "slice_dates: invalid range {start}..{end} for {} dates",
                self.dates.len()
            )));
        }
        Self::new(
            self.dates[start..end].to_vec(),
            self.assets.clone(),
            self.close.rows(start, end - start).into_owned(),
            self.volume.rows(start, end - start).into_owned(),
            self.shares_outstanding.clone(),
        )
    }
}

/// Simple per-period returns derived from a [`PricePanel`].
///
/// Row `t` holds `close[t+1]/close[t] - 1` and is labeled with the date the
/// return is realized (the later date), so the panel has one fewer row than
/// its source.
#[derive(Debug, Clone)]
pub struct ReturnPanel {
    dates: Vec<String>,
    assets: Vec<String>,
    returns: DMatrix<f64>,
}

impl ReturnPanel {
    pub fn new(dates: Vec<String>, assets: Vec<String>, returns: DMatrix<f64>) -> Result<Self> {
        if returns.nrows() != dates.len() || returns.ncols() != assets.len() {
            return Err(Error::InvalidInput("return panel: shape mismatch".into()));
        }
        if returns.iter().any(|&r| !(r > -1.0)) {
            return Err(Error::InvalidInput("return panel: return <= -1".into()));
        }
        Ok(Self { dates, assets, returns })
    }

    pub fn dates(&self) -> &[String] {
        &self.dates
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn returns(&self) -> &DMatrix<f64> {
        &self.returns
    }

    pub fn n_periods(&self) -> usize {
        self.dates.len()
    }

    /// Column of returns for one asset.
    pub fn asset_returns(&self, asset: &str) -> Result<Vec<f64>> {
        let i = self
            .assets
            .iter()
            .position(|a| a == asset)
            .ok_or_else(|| Error::UnknownAsset(asset.to_string()))?;
        Ok(self.returns.column(i).iter().copied().collect())
    }

    /// Restricts to return rows `[start, end)`.
    pub fn slice_periods(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.dates.len() {
            return Err(Error::InvalidInput(format!(
                "slice_periods: invalid range {start}..{end} for {} periods",
                self.dates.len()
            )));
        }
        Self::new(
            self.dates[start..end].to_vec(),
            self.assets.clone(),
            self.returns.rows(start, end - start).into_owned(),
        )
    }
}

/// Per-date benchmark weights over a universe, used both as the market
/// proxy for equilibrium returns and as the comparison series for
/// attribution and tracking error.
#[derive(Debug, Clone)]
pub struct BenchmarkSpec {
    dates: Vec<String>,
    assets: Vec<String>,
    weights: DMatrix<f64>,
}

impl BenchmarkSpec {
    pub fn new(dates: Vec<String>, assets: Vec<String>, weights: DMatrix<f64>) -> Result<Self> {
        if weights.nrows() != dates.len() || weights.ncols() != assets.len() {
            return Err(Error::InvalidInput("benchmark: shape mismatch".into()));
        }
        for t in 0..weights.nrows() {
            let row = weights.row(t);
            if row.iter().any(|&w| w < 0.0) {
                return Err(Error::InvalidInput(format!(
                    "benchmark: negative weight at {}",
                    dates[t]
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "benchmark: weights at {} sum to {sum}, expected 1",
                    dates[t]
                )));
            }
        }
        Ok(Self { dates, assets, weights })
    }

    /// Market-capitalization-weighted proxy built from a price panel, one
    /// weight row per panel date.
    pub fn cap_weighted(panel: &PricePanel) -> Result<Self> {
        let t = panel.dates().len();
        let n = panel.assets().len();
        let mut weights = DMatrix::zeros(t, n);
        for (r, date) in panel.dates().iter().enumerate() {
            let w = cap_weights(panel, date)?;
            weights.row_mut(r).copy_from(&w.transpose());
        }
        Self::new(panel.dates().to_vec(), panel.assets().to_vec(), weights)
    }

    pub fn dates(&self) -> &[String] {
        &self.dates
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn weights_at(&self, date: &str) -> Result<DVector<f64>> {
        let r = self
            .dates
            .iter()
            .position(|d| d == date)
            .ok_or_else(|| Error::InvalidInput(format!("benchmark: no weights for date {date}")))?;
        Ok(self.weights.row(r).transpose())
    }

    /// Benchmark return series aligned with `returns`: each period uses the
    /// weight row immediately preceding the return's realization date.
    pub fn returns(&self, returns: &ReturnPanel) -> Result<Vec<f64>> {
        if self.assets != returns.assets() {
            return Err(Error::InvalidInput(
                "benchmark: asset universe does not match return panel".into(),
            ));
        }
        let mut out = Vec::with_capacity(returns.n_periods());
        for (t, date) in returns.dates().iter().enumerate() {
            let j = self
                .dates
                .iter()
                .position(|d| d == date)
                .ok_or_else(|| Error::InvalidInput(format!("benchmark: no row for date {date}")))?;
            if j == 0 {
                return Err(Error::InvalidInput(format!(
                    "benchmark: no weights preceding {date}"
                )));
            }
            let w = self.weights.row(j - 1);
            out.push(w.transpose().dot(&returns.returns().row(t).transpose()));
        }
        Ok(out)
    }
}

/// Simple returns `close[t+1]/close[t] - 1` for every asset.
pub fn compute_returns(panel: &PricePanel) -> Result<ReturnPanel> {
    let t = panel.dates().len();
    if t < 2 {
        return Err(Error::InvalidInput("compute_returns: need at least 2 dates".into()));
    }
    let n = panel.assets().len();
    let returns = DMatrix::from_fn(t - 1, n, |r, c| {
        panel.close()[(r + 1, c)] / panel.close()[(r, c)] - 1.0
    });
    ReturnPanel::new(panel.dates()[1..].to_vec(), panel.assets().to_vec(), returns)
}

/// Capitalization weights `p_i s_i / sum_j p_j s_j` at one panel date.
pub fn cap_weights(panel: &PricePanel, date: &str) -> Result<DVector<f64>> {
    let r = panel
        .date_index(date)
        .ok_or_else(|| Error::InvalidInput(format!("cap_weights: unknown date {date}")))?;
    let caps = DVector::from_fn(panel.assets().len(), |i, _| {
        panel.close()[(r, i)] * panel.shares_outstanding()[i]
    });
    let total = caps.sum();
    if !(total > 0.0) {
        return Err(Error::InvalidInput("cap_weights: zero total capitalization".into()));
    }
    Ok(caps / total)
}

/// Formats `v` with 10 significant digits, the canonical float encoding of
/// every CSV this crate writes. Parsing such a string back to `f64` and
/// re-formatting reproduces it byte-for-byte.
pub fn format_float(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    let decimals = (9 - exp).max(0) as usize;
    format!("{v:.decimals$}")
}

struct PriceRow {
    close: f64,
    volume: f64,
}

/// Loads a prices CSV with header `date,asset_id,close,volume,shares_outstanding`.
///
/// Every `(date, asset)` pair must appear exactly once and shares
/// outstanding must be consistent per asset. Errors carry the 1-based file
/// row (header is row 1).
pub fn load_prices(path: impl AsRef<Path>) -> Result<PricePanel> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let data_err = |row: usize, message: String| Error::Data {
        path: path_str.clone(),
        row,
        message,
    };

    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::InvalidInput(format!(
        "cannot open {path_str}: {e}"
    )))?;
    let headers = reader
        .headers()
        .map_err(|e| data_err(1, format!("bad header: {e}")))?
        .clone();
    let expected = ["date", "asset_id", "close", "volume", "shares_outstanding"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(data_err(
            1,
            format!("expected header `{}`, got `{}`", expected.join(","), headers.iter().collect::<Vec<_>>().join(",")),
        ));
    }

    // (date, asset) -> row payload, plus the file row for duplicate reports.
    let mut cells: BTreeMap<(String, String), PriceRow> = BTreeMap::new();
    let mut shares_by_asset: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| data_err(row, format!("bad record: {e}")))?;
        if record.len() != 5 {
            return Err(data_err(row, format!("expected 5 fields, got {}", record.len())));
        }
        let date = record[0].to_string();
        if !is_iso_date(&date) {
            return Err(data_err(row, format!("unparseable date `{date}` (expected YYYY-MM-DD)")));
        }
        let asset = record[1].to_string();
        let parse = |field: usize, name: &str| -> Result<f64> {
            record[field]
                .parse::<f64>()
                .map_err(|_| data_err(row, format!("unparseable {name} `{}`", &record[field])))
        };
        let close = parse(2, "close")?;
        let volume = parse(3, "volume")?;
        let shares = parse(4, "shares_outstanding")?;
        if !(close > 0.0) {
            return Err(data_err(row, format!("non-positive price {close} for {asset}")));
        }
        if !(volume >= 0.0) {
            return Err(data_err(row, format!("negative volume {volume} for {asset}")));
        }
        if !(shares > 0.0) {
            return Err(data_err(row, format!("non-positive shares_outstanding for {asset}")));
        }
        if let Some((prev, prev_row)) = shares_by_asset.get(&asset) {
            if *prev != shares {
                return Err(data_err(
                    row,
                    format!("shares_outstanding for {asset} changed from {prev} (row {prev_row})"),
                ));
            }
        } else {
            shares_by_asset.insert(asset.clone(), (shares, row));
        }
        if cells
            .insert((date.clone(), asset.clone()), PriceRow { close, volume })
            .is_some()
        {
            return Err(data_err(row, format!("duplicate (date, asset) = ({date}, {asset})")));
        }
    }
    if cells.is_empty() {
        return Err(data_err(2, "no data rows".into()));
    }

    let mut dates: Vec<String> = cells.keys().map(|(d, _)| d.clone()).collect();
    dates.dedup();
    let mut assets: Vec<String> = shares_by_asset.keys().cloned().collect();
    assets.sort();

    let mut close = DMatrix::zeros(dates.len(), assets.len());
    let mut volume = DMatrix::zeros(dates.len(), assets.len());
    for (r, date) in dates.iter().enumerate() {
        for (c, asset) in assets.iter().enumerate() {
            let cell = cells.get(&(date.clone(), asset.clone())).ok_or_else(|| {
                Error::Data {
                    path: path_str.clone(),
                    row: 0,
                    message: format!("missing (date, asset) = ({date}, {asset}); holes are not filled"),
                }
            })?;
            close[(r, c)] = cell.close;
            volume[(r, c)] = cell.volume;
        }
    }
    let shares = DVector::from_fn(assets.len(), |i, _| shares_by_asset[&assets[i]].0);
    PricePanel::new(dates, assets, close, volume, shares)
}

/// Writes the prices CSV schema read by [`load_prices`], rows sorted by
/// date then asset, floats in the canonical 10-significant-digit encoding.
pub fn write_prices(panel: &PricePanel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("date,asset_id,close,volume,shares_outstanding\n");
    for (r, date) in panel.dates().iter().enumerate() {
        for (c, asset) in panel.assets().iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                date,
                asset,
                format_float(panel.close()[(r, c)]),
                format_float(panel.volume()[(r, c)]),
                format_float(panel.shares_outstanding()[c]),
            ));
        }
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    file.write_all(out.as_bytes()).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Loads a benchmark CSV with header `date,asset_id,weight`.
pub fn load_benchmark(path: impl AsRef<Path>) -> Result<BenchmarkSpec> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::InvalidInput(format!("cannot open {path_str}: {e}")))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Data { path: path_str.clone(), row: 1, message: e.to_string() })?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["date", "asset_id", "weight"] {
        return Err(Error::Data {
            path: path_str,
            row: 1,
            message: "expected header `date,asset_id,weight`".into(),
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
        let weight: f64 = record[2].parse().map_err(|_| Error::Data {
            path: path_str.clone(),
            row,
            message: format!("unparseable weight `{}`", &record[2]),
        })?;
        cells.insert((record[0].to_string(), record[1].to_string()), weight);
    }
    let mut dates: Vec<String> = cells.keys().map(|(d, _)| d.clone()).collect();
    dates.dedup();
    let mut assets: Vec<String> = cells.keys().map(|(_, a)| a.clone()).collect();
    assets.sort();
    assets.dedup();
    let weights = DMatrix::from_fn(dates.len(), assets.len(), |r, c| {
        cells
            .get(&(dates[r].clone(), assets[c].clone()))
            .copied()
            .unwrap_or(0.0)
    });
    BenchmarkSpec::new(dates, assets, weights)
}

fn is_iso_date(s: &str) -> bool {
    let b = s.as_bytes();
    b.len() == 10
        && b[4] == b'-'
        && b[7] == b'-'
        && b.iter().enumerate().all(|(i, &c)| i == 4 || i == 7 || c.is_ascii_digit())
}

/// Parameters for [`synthetic_market`]. Log-price increments are
/// `drift + loadings * f_t + volatility * z`, with `f_t` mean-zero factor
/// shocks; volumes are lognormal around `average_volume`.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub assets: usize,
    /// Number of dates (price rows), at least 2.
    pub periods: usize,
    pub initial_price: f64,
    /// Per-asset log drift per period.
    pub drift: Vec<f64>,
    /// Per-asset idiosyncratic volatility per period (>= 0).
    pub volatility: Vec<f64>,
    /// Optional `[asset x factor]` loadings inducing cross-correlation.
    pub factor_loadings: Option<DMatrix<f64>>,
    /// Per-factor shock volatility.
    pub factor_volatility: Vec<f64>,
    pub average_volume: f64,
    pub shares_outstanding: f64,
}

impl SyntheticSpec {
    /// Uncorrelated spec with uniform drift and volatility.
    pub fn uniform(assets: usize, periods: usize, drift: f64, volatility: f64) -> Self {
        Self {
            assets,
            periods,
            initial_price: 100.0,
            drift: vec![drift; assets],
            volatility: vec![volatility; assets],
            factor_loadings: None,
            factor_volatility: Vec::new(),
            average_volume: 1.0e6,
            shares_outstanding: 1.0e7,
        }
    }
}

/// A generated market: the price panel plus the factor shock series that
/// produced it (rows align with the panel's return periods).
#[derive(Debug, Clone)]
pub struct SyntheticMarket {
    pub prices: PricePanel,
    pub factor_returns: Option<DMatrix<f64>>,
}

/// Generates a deterministic synthetic market for a given seed: identical
/// seeds and specs produce identical panels.
pub fn synthetic_market(seed: u64, spec: &SyntheticSpec) -> Result<SyntheticMarket> {
    if spec.assets == 0 {
        return Err(Error::InvalidInput("synthetic_market: need at least 1 asset".into()));
    }
    if spec.periods < 2 {
        return Err(Error::InvalidInput("synthetic_market: horizon must be >= 2".into()));
    }
    if spec.drift.len() != spec.assets || spec.volatility.len() != spec.assets {
        return Err(Error::InvalidInput(
            "synthetic_market: drift/volatility length must match asset count".into(),
        ));
    }
    if spec.volatility.iter().any(|&v| v < 0.0) || spec.factor_volatility.iter().any(|&v| v < 0.0)
    {
        return Err(Error::InvalidInput("synthetic_market: negative volatility".into()));
    }
    if let Some(l) = &spec.factor_loadings {
        if l.nrows() != spec.assets || l.ncols() != spec.factor_volatility.len() {
            return Err(Error::InvalidInput(
                "synthetic_market: loadings shape must be assets x factors".into(),
            ));
        }
    }
    if !(spec.initial_price > 0.0) || !(spec.average_volume >= 0.0) || !(spec.shares_outstanding > 0.0) {
        return Err(Error::InvalidInput("synthetic_market: invalid scale parameters".into()));
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n_factors = spec.factor_volatility.len();
    let steps = spec.periods - 1;

    let mut factor_shocks = DMatrix::zeros(steps, n_factors);
    let mut log_prices = DMatrix::zeros(spec.periods, spec.assets);
    for i in 0..spec.assets {
        log_prices[(0, i)] = spec.initial_price.ln();
    }
    let mut volume = DMatrix::zeros(spec.periods, spec.assets);
    for i in 0..spec.assets {
        volume[(0, i)] = spec.average_volume;
    }

    for t in 0..steps {
        for k in 0..n_factors {
            factor_shocks[(t, k)] = spec.factor_volatility[k] * standard_normal(&mut rng);
        }
        for i in 0..spec.assets {
            let mut inc = spec.drift[i] + spec.volatility[i] * standard_normal(&mut rng);
            if let Some(l) = &spec.factor_loadings {
                for k in 0..n_factors {
                    inc += l[(i, k)] * factor_shocks[(t, k)];
                }
            }
            log_prices[(t + 1, i)] = log_prices[(t, i)] + inc;
            let vshock: f64 = standard_normal(&mut rng);
            volume[(t + 1, i)] = spec.average_volume * (0.2 * vshock - 0.02).exp();
        }
    }

    let close = log_prices.map(f64::exp);
    let dates = synthetic_dates(spec.periods);
    let assets = (0..spec.assets).map(|i| format!("A{i:03}")).collect();
    let shares = DVector::from_element(spec.assets, spec.shares_outstanding);
    let prices = PricePanel::new(dates, assets, close, volume, shares)?;
    let factor_returns = (n_factors > 0).then_some(factor_shocks);
    Ok(SyntheticMarket { prices, factor_returns })
}

/// Box-Muller standard normal; keeps the generator stack on rand's uniform
/// API so draws are stable across rand_distr versions.
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u1: f64 = rng.random();
        if u1 > 0.0 {
            let u2: f64 = rng.random();
            return (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        }
    }
}

/// Sequential ISO-8601 date labels starting at 2020-01-01.
fn synthetic_dates(n: usize) -> Vec<String> {
    let start = chrono::NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    (0..n)
        .map(|t| (start + chrono::Days::new(t as u64)).format("%Y-%m-%d").to_string())
        .collect()
}
