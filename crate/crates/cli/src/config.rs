//! Backtest configuration: a JSON file with a strict schema (unknown keys
//! are hard errors — silent typos in quant configs are costly).
//!
//! See `docs/config_schema.json` for the documented schema and
//! `fixtures/config.json` for a runnable example.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use quantfolio_core::selection::ConfidenceMode;
use quantfolio_core::tca::ImpactParams;
use quantfolio_core::{Error, Result};

/// Top-level configuration for the pipeline and backtest harness.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BacktestConfig {
    /// Prices CSV (`date,asset_id,close,volume,shares_outstanding`).
    pub prices: PathBuf,
    /// Optional factors CSV (`date,factor_id,value`).
    #[serde(default)]
    pub factors: Option<PathBuf>,
    /// Optional benchmark CSV (`date,asset_id,weight`); cap weights are
    /// used when absent.
    #[serde(default)]
    pub benchmark: Option<PathBuf>,
    /// Optional universe restriction (subset of panel assets).
    #[serde(default)]
    pub universe: Option<Vec<String>>,
    /// Per-period risk-free rate; all returns are treated as excess over
    /// this rate in construction and attribution.
    #[serde(default)]
    pub risk_free_rate: f64,
    /// Rebalance cadence in return periods.
    pub holding_period: usize,
    /// Long/short group quantile in (0, 0.5].
    pub quantile: f64,
    #[serde(default)]
    pub confidence: ConfidenceConfig,
    pub risk_aversion: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// History split: model fitting, out-of-sample signal evaluation, and
    /// the remainder trades.
    #[serde(default)]
    pub split: SplitConfig,
    /// Composite factor weights; `null` optimizes them by grid search on
    /// the fit window.
    #[serde(default)]
    pub factor_weights: Option<Vec<f64>>,
    /// Grid resolution for the factor-weight search.
    #[serde(default = "default_weight_grid")]
    pub factor_weight_grid: usize,
    /// Manual views; `null` auto-generates one from the signal stage when
    /// factors are present, `[]` disables views entirely.
    #[serde(default)]
    pub views: Option<Vec<ViewConfig>>,
    /// Trailing window (periods) for average daily volume and volatility.
    #[serde(default = "default_adv_window")]
    pub adv_window: usize,
    pub rebalance: RebalanceConfig,
    /// Impact parameters used for TCA costs inside the backtest.
    #[serde(default)]
    pub impact: Option<ImpactParams>,
    /// Completed-orders CSV
    /// (`order_id,asset_id,shares,duration_days,arrival_price,avg_exec_price,post_price`)
    /// for calibration and post-trade analysis.
    #[serde(default)]
    pub orders: Option<PathBuf>,
    /// Post-trade benchmark prices CSV
    /// (`order_id,vwap,open,close,prev_close,interval_vwap`).
    #[serde(default)]
    pub order_benchmarks: Option<PathBuf>,
    /// Standalone Brinson segments CSV (`period,segment,w_p,r_p,w_b,r_b`).
    #[serde(default)]
    pub segments: Option<PathBuf>,
    /// Currency legs CSV
    /// (`period,asset_id,local_return,currency_return,local_rf,base_rf`).
    #[serde(default)]
    pub currency: Option<PathBuf>,
    /// FX executions CSV (`ts,pair,exec_price,market_price,day_high,day_low`).
    #[serde(default)]
    pub fx: Option<PathBuf>,
    pub seed: u64,
}

fn default_tau() -> f64 {
    0.05
}

fn default_adv_window() -> usize {
    21
}

fn default_weight_grid() -> usize {
    4
}

/// Confidence mapping selection (`hit` or `ir` with a cap).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, tag = "mode", rename_all = "snake_case")]
pub enum ConfidenceConfig {
    Hit,
    Ir {
        #[serde(default = "default_ir_cap")]
        cap: f64,
    },
}

fn default_ir_cap() -> f64 {
    1.0
}

impl Default for ConfidenceConfig {
    fn default() -> Self {
        ConfidenceConfig::Ir { cap: default_ir_cap() }
    }
}

impl ConfidenceConfig {
    pub fn mode(&self) -> ConfidenceMode {
        match self {
            ConfidenceConfig::Hit => ConfidenceMode::HitRatio,
            ConfidenceConfig::Ir { cap } => ConfidenceMode::InformationRatio { cap: *cap },
        }
    }
}

/// History split fractions; the trading window is the remainder.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub fit: f64,
    pub evaluate: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { fit: 0.4, evaluate: 0.3 }
    }
}

/// One manual view record.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, tag = "type", rename_all = "snake_case")]
pub enum ViewConfig {
    Absolute {
        long: Vec<String>,
        q: f64,
        confidence: f64,
    },
    Relative {
        long: Vec<String>,
        short: Vec<String>,
        q: f64,
        confidence: f64,
    },
}

/// Rebalancing policy selection for the trading cycle, also defining the
/// policy-comparison stage.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, tag = "policy", rename_all = "snake_case")]
pub enum RebalanceConfig {
    Periodic {
        period: usize,
    },
    Band {
        band: f64,
    },
    Trigger {
        risk_tolerance: f64,
        /// Per-asset transaction cost as a return fraction.
        cost: f64,
    },
    Dp {
        grid_points: usize,
        cost_rate: f64,
        #[serde(default = "default_dp_paths")]
        paths: usize,
        #[serde(default = "default_dp_discount")]
        discount: f64,
        #[serde(default = "default_dp_tol")]
        convergence_tol: f64,
        #[serde(default = "default_dp_iters")]
        max_iterations: usize,
    },
}

fn default_dp_paths() -> usize {
    128
}

fn default_dp_discount() -> f64 {
    0.95
}

fn default_dp_tol() -> f64 {
    1e-8
}

fn default_dp_iters() -> usize {
    5000
}

/// A parsed configuration plus the SHA-256 of its raw bytes (the run's
/// configuration fingerprint).
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: BacktestConfig,
    pub hash: String,
    pub path: PathBuf,
}

/// Loads and validates a configuration file. Referenced data files are
/// resolved relative to the config file's directory.
pub fn load_config(path: impl AsRef<Path>) -> Result<LoadedConfig> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut config: BacktestConfig = serde_json::from_slice(&bytes)
        .map_err(|e| Error::InvalidInput(format!("config {}: {e}", path.display())))?;
    let digest = Sha256::digest(&bytes);
    let hash: String = digest.iter().map(|b| format!("{b:02x}")).collect();

    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let resolve = |p: &PathBuf| -> PathBuf {
        if p.is_absolute() {
            p.clone()
        } else {
            base.join(p)
        }
    };
    config.prices = resolve(&config.prices);
    for opt in [
        &mut config.factors,
        &mut config.benchmark,
        &mut config.orders,
        &mut config.order_benchmarks,
        &mut config.segments,
        &mut config.currency,
        &mut config.fx,
    ] {
        if let Some(p) = opt {
            *p = resolve(p);
        }
    }
    validate(&config)?;
    Ok(LoadedConfig { config, hash, path: path.to_path_buf() })
}

fn validate(config: &BacktestConfig) -> Result<()> {
    let exists = |p: &Path, what: &str| -> Result<()> {
        if p.exists() {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("config: {what} file {} does not exist", p.display())))
        }
    };
    exists(&config.prices, "prices")?;
    for (opt, what) in [
        (&config.factors, "factors"),
        (&config.benchmark, "benchmark"),
        (&config.orders, "orders"),
        (&config.order_benchmarks, "order_benchmarks"),
        (&config.segments, "segments"),
        (&config.currency, "currency"),
        (&config.fx, "fx"),
    ] {
        if let Some(p) = opt {
            exists(p, what)?;
        }
    }
    if config.holding_period == 0 {
        return Err(Error::InvalidInput("config: holding_period must be >= 1".into()));
    }
    if !(config.quantile > 0.0 && config.quantile <= 0.5) {
        return Err(Error::InvalidInput("config: quantile must be in (0, 0.5]".into()));
    }
    if !(config.risk_aversion > 0.0) {
        return Err(Error::InvalidInput("config: risk_aversion must be > 0".into()));
    }
    if !(config.tau > 0.0) {
        return Err(Error::InvalidInput("config: tau must be > 0".into()));
    }
    if !(config.split.fit > 0.0
        && config.split.evaluate >= 0.0
        && config.split.fit + config.split.evaluate < 1.0)
    {
        return Err(Error::InvalidInput(
            "config: split fractions must satisfy fit > 0, evaluate >= 0, fit + evaluate < 1"
                .into(),
        ));
    }
    if config.adv_window == 0 {
        return Err(Error::InvalidInput("config: adv_window must be >= 1".into()));
    }
    match &config.rebalance {
        RebalanceConfig::Periodic { period } if *period == 0 => {
            return Err(Error::InvalidInput("config: rebalance period must be >= 1".into()));
        }
        RebalanceConfig::Band { band } if !(*band > 0.0) => {
            return Err(Error::InvalidInput("config: rebalance band must be > 0".into()));
        }
        RebalanceConfig::Trigger { risk_tolerance, cost } => {
            if !(*risk_tolerance > 0.0) || *cost < 0.0 {
                return Err(Error::InvalidInput(
                    "config: trigger needs risk_tolerance > 0 and cost >= 0".into(),
                ));
            }
        }
        RebalanceConfig::Dp { grid_points, cost_rate, discount, .. } => {
            if *grid_points < 2 || *cost_rate < 0.0 || !(*discount > 0.0 && *discount < 1.0) {
                return Err(Error::InvalidInput(
                    "config: dp needs grid_points >= 2, cost_rate >= 0, discount in (0, 1)".into(),
                ));
            }
        }
        _ => {}
    }
    Ok(())
}

/// Pipeline stages in execution order; each owns a deterministic RNG
/// sub-stream derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Ingest,
    FitFactors,
    Rank,
    Views,
    Construct,
    Rebalance,
    ImpactCalibrate,
    Tca,
    Attribute,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Ingest,
        Stage::FitFactors,
        Stage::Rank,
        Stage::Views,
        Stage::Construct,
        Stage::Rebalance,
        Stage::ImpactCalibrate,
        Stage::Tca,
        Stage::Attribute,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::FitFactors => "fit-factors",
            Stage::Rank => "rank",
            Stage::Views => "views",
            Stage::Construct => "construct",
            Stage::Rebalance => "rebalance",
            Stage::ImpactCalibrate => "impact-calibrate",
            Stage::Tca => "tca",
            Stage::Attribute => "attribute",
        }
    }

    pub fn from_name(name: &str) -> Option<Stage> {
        Stage::ALL.iter().copied().find(|s| s.name() == name)
    }
}

/// Per-stage RNG sub-stream: SplitMix64 over the master seed and the
/// stage's position, so stages are isolated but reproducible.
pub fn stage_seed(master: u64, stage: Stage) -> u64 {
    let idx = Stage::ALL.iter().position(|s| *s == stage).expect("stage listed") as u64;
    let mut z = master ^ (idx.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_config(dir: &Path) -> String {
        format!(
            r#"{{
              "prices": "{}",
              "holding_period": 5,
              "quantile": 0.2,
              "risk_aversion": 2.5,
              "rebalance": {{"policy": "periodic", "period": 5}},
              "seed": 42
            }}"#,
            dir.join("prices.csv").display()
        )
    }

    fn write_prices(dir: &Path) {
        std::fs::write(
            dir.join("prices.csv"),
            "date,asset_id,close,volume,shares_outstanding\n2024-01-01,AAA,100,10,1000\n",
        )
        .unwrap();
    }

    #[test]
    fn loads_minimal_config_with_defaults() {
        let dir = tempfile::tempdir().unwrap();
        write_prices(dir.path());
        let path = dir.path().join("config.json");
        std::fs::write(&path, minimal_config(dir.path())).unwrap();
        let loaded = load_config(&path).unwrap();
        assert_eq!(loaded.config.tau, 0.05);
        assert_eq!(loaded.config.adv_window, 21);
        assert_eq!(loaded.hash.len(), 64);
        assert!(matches!(loaded.config.confidence, ConfidenceConfig::Ir { .. }));
    }

    #[test]
    fn unknown_keys_are_hard_errors() {
        let dir = tempfile::tempdir().unwrap();
        write_prices(dir.path());
        let path = dir.path().join("config.json");
        let text = minimal_config(dir.path()).replace("\"seed\": 42", "\"seed\": 42, \"sed\": 1");
        std::fs::write(&path, text).unwrap();
        let err = load_config(&path).unwrap_err();
        assert!(err.to_string().contains("sed"), "{err}");
    }

    #[test]
    fn missing_files_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(&path, minimal_config(dir.path())).unwrap();
        let err = load_config(&path).unwrap_err();
        assert!(err.to_string().contains("does not exist"), "{err}");
    }

    #[test]
    fn stage_seeds_differ_and_are_stable() {
        let a = stage_seed(42, Stage::Rebalance);
        let b = stage_seed(42, Stage::ImpactCalibrate);
        assert_ne!(a, b);
        assert_eq!(a, stage_seed(42, Stage::Rebalance));
    }

    #[test]
    fn view_config_json_shape() {
        let json = r#"[
          {"type": "absolute", "long": ["AAA"], "q": 0.01, "confidence": 0.5},
          {"type": "relative", "long": ["AAA"], "short": ["BBB"], "q": 0.02, "confidence": 0.8}
        ]"#;
        let views: Vec<ViewConfig> = serde_json::from_str(json).unwrap();
        assert_eq!(views.len(), 2);
        assert!(matches!(views[0], ViewConfig::Absolute { .. }));
        assert!(matches!(views[1], ViewConfig::Relative { .. }));
    }
}
