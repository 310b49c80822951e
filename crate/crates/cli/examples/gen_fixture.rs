//! Regenerates the bundled fixture under `fixtures/`: a 5-asset synthetic
//! market with two factors, a book of completed orders with post-trade
//! benchmarks, and small segment/currency attribution inputs.
//!
//! Usage: `cargo run -p quantfolio-cli --example gen_fixture [-- <dir>]`

use std::path::PathBuf;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use quantfolio_core::marketdata::{
    compute_returns, format_float, synthetic_market, write_prices, SyntheticSpec,
};
use quantfolio_core::tca::{predict_impact, ImpactParams, MarketStats, Order};

fn main() {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("fixtures"));
    std::fs::create_dir_all(&dir).expect("create fixture dir");

    // Five assets, two factors; asset order carries a mild persistent
    // return spread so the signal stage has something to find.
    let assets = 5;
    let periods = 320;
    let spec = SyntheticSpec {
        assets,
        periods,
        initial_price: 100.0,
        drift: (0..assets).map(|i| 4e-4 * (0.5 + 0.5 * i as f64)).collect(),
        volatility: vec![0.004; assets],
        factor_loadings: Some(DMatrix::from_fn(assets, 2, |i, k| {
            if k == 0 {
                0.5 + 0.5 * i as f64
            } else {
                1.2 - 0.3 * i as f64
            }
        })),
        factor_volatility: vec![0.002, 0.002],
        average_volume: 2.0e6,
        shares_outstanding: 4.0e7,
    };
    let market = synthetic_market(20240601, &spec).expect("synthetic market");
    write_prices(&market.prices, dir.join("prices.csv")).expect("write prices");

    // Factor observations align with return dates.
    let shocks = market.factor_returns.as_ref().expect("factor shocks");
    let return_dates = &market.prices.dates()[1..];
    let mut factors = String::from("date,factor_id,value\n");
    for (t, date) in return_dates.iter().enumerate() {
        for (k, name) in ["MKT", "SPREAD"].iter().enumerate() {
            factors.push_str(&format!("{date},{name},{}\n", format_float(shocks[(t, k)])));
        }
    }
    std::fs::write(dir.join("factors.csv"), factors).expect("write factors");

    // Completed orders generated from a known impact model plus noise.
    let truth = ImpactParams { alpha: 0.9, beta: 0.6, gamma: 0.4, eta: 0.12, delta: 0.2 };
    let returns = compute_returns(&market.prices).expect("returns");
    let mut rng = ChaCha12Rng::seed_from_u64(777);
    let mut orders = String::from(
        "order_id,asset_id,shares,duration_days,arrival_price,avg_exec_price,post_price\n",
    );
    let mut benchmarks = String::from("order_id,vwap,open,close,prev_close,interval_vwap\n");
    for n in 0..160 {
        let asset_idx = n % assets;
        let asset = &market.prices.assets()[asset_idx];
        let date_row = 40 + (n * 7) % (periods - 50);
        let arrival = market.prices.close()[(date_row, asset_idx)];
        let adv = 2.0e6;
        let vol_rows = 21.min(date_row);
        let rets: Vec<f64> = (date_row - vol_rows..date_row)
            .map(|t| returns.returns()[(t, asset_idx)])
            .collect();
        let volatility = {
            let mean = rets.iter().sum::<f64>() / rets.len() as f64;
            (rets.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (rets.len() - 1) as f64)
                .sqrt()
        };
        let stats = MarketStats {
            adv,
            volatility,
            shares_outstanding: 4.0e7,
            spread: 5e-4,
        };
        let duration = 0.25 + 0.5 * rng.random::<f64>();
        let rate = 10f64.powf(-2.5 + 2.0 * rng.random::<f64>());
        let side = if rng.random::<f64>() < 0.5 { 1.0 } else { -1.0 };
        let shares = side * rate * adv * duration;
        let order = Order::new(format!("ord-{n:04}"), asset.clone(), shares, duration, arrival)
            .expect("order");
        let (permanent, realized) = predict_impact(&order, &stats, &truth).expect("impact");
        let jitter = |rng: &mut ChaCha12Rng| 1.0 + 0.05 * (rng.random::<f64>() - 0.5);
        let post = arrival * (1.0 + permanent * jitter(&mut rng));
        let avg = arrival * (1.0 + realized * jitter(&mut rng));
        orders.push_str(&format!(
            "ord-{n:04},{asset},{},{},{},{},{}\n",
            format_float(shares),
            format_float(duration),
            format_float(arrival),
            format_float(avg),
            format_float(post)
        ));
        benchmarks.push_str(&format!(
            "ord-{n:04},{},{},{},{},{}\n",
            format_float(arrival * (1.0 + 0.3 * realized)),
            format_float(arrival * (1.0 - 0.001 + 0.002 * rng.random::<f64>())),
            format_float(post * (1.0 - 0.0005 + 0.001 * rng.random::<f64>())),
            format_float(arrival * (1.0 - 0.002 + 0.002 * rng.random::<f64>())),
            format_float(arrival * (1.0 + 0.5 * realized)),
        ));
    }
    std::fs::write(dir.join("orders.csv"), orders).expect("write orders");
    std::fs::write(dir.join("order_benchmarks.csv"), benchmarks).expect("write benchmarks");

    // Small Brinson and currency inputs.
    std::fs::write(
        dir.join("segments.csv"),
        "period,segment,w_p,r_p,w_b,r_b\n\
         2024-Q1,equity,0.6,0.10,0.5,0.08\n\
         2024-Q1,fixed_income,0.4,0.02,0.5,0.03\n\
         2024-Q2,equity,0.55,0.04,0.5,0.05\n\
         2024-Q2,fixed_income,0.45,0.01,0.5,0.012\n",
    )
    .expect("write segments");
    std::fs::write(
        dir.join("currency.csv"),
        "period,asset_id,local_return,currency_return,local_rf,base_rf\n\
         2024-Q1,JP-EQ,0.05,0.02,0.01,0.005\n\
         2024-Q1,EU-EQ,0.03,-0.01,0.008,0.005\n\
         2024-Q2,JP-EQ,-0.02,0.015,0.01,0.005\n",
    )
    .expect("write currency");

    std::fs::write(
        dir.join("fx.csv"),
        "ts,pair,exec_price,market_price,day_high,day_low\n\
         2024-03-01T10:15:00Z,EURUSD,1.1050,1.1000,1.1200,1.0800\n\
         2024-03-01T14:40:00Z,USDJPY,151.20,151.40,152.10,150.60\n\
         2024-03-02T09:05:00Z,EURUSD,1.0980,1.0995,1.1100,1.0900\n",
    )
    .expect("write fx");

    std::fs::write(
        dir.join("config.json"),
        r#"{
  "prices": "prices.csv",
  "factors": "factors.csv",
  "holding_period": 5,
  "quantile": 0.4,
  "confidence": {"mode": "hit"},
  "factor_weights": [1.0, 0.0],
  "risk_aversion": 15.0,
  "tau": 0.05,
  "split": {"fit": 0.4, "evaluate": 0.3},
  "rebalance": {"policy": "band", "band": 0.02},
  "impact": {"alpha": 0.9, "beta": 0.6, "gamma": 0.4, "eta": 0.12, "delta": 0.2},
  "orders": "orders.csv",
  "order_benchmarks": "order_benchmarks.csv",
  "segments": "segments.csv",
  "currency": "currency.csv",
  "fx": "fx.csv",
  "seed": 42
}
"#,
    )
    .expect("write config");

    println!("fixture written to {}", dir.display());
}
