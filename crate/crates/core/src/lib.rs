//! Portfolio-management toolkit covering the full investment cycle:
//! factor estimation, signal evaluation, Black-Litterman construction,
//! risk decomposition, rebalancing policies, market-impact/transaction-cost
//! analysis and performance attribution.
//!
//! The crate is a pure library; the companion CLI crate drives it as a
//! batch pipeline. All types are immutable after construction and all
//! operations are deterministic for a fixed seed.

pub mod attribution;
pub mod black_litterman;
pub mod econometrics;
pub mod error;
pub mod factor_model;
pub mod marketdata;
pub mod rebalancing;
pub mod selection;
pub mod tca;

pub use error::{Error, Result};
pub use marketdata::{BenchmarkSpec, PricePanel, ReturnPanel};
