//! Generates a synthetic bid log, saves it next to its metadata sidecar and loads it back.
//!
//! ```text
//! cargo run --release --example generate_log -- [out.csv]
//! ```

use std::path::Path;

use demand_bandit::bidlog::{generate_log, load_log, save_log, LogGenParams, KPI_NAMES};

pub fn run_example(out: &Path) -> demand_bandit::Result<()> {
    let params = LogGenParams {
        price_sigma: 0.7,
        ..LogGenParams::with_impressions(10_000)
    };
    let log = generate_log(&params, 7)?;
    save_log(&log, out)?;
    let reloaded = load_log(out)?;
    assert_eq!(reloaded, log);

    let n = log.len() as f64;
    let mean_ctr = log.impressions().iter().map(|i| i.ctr).sum::<f64>() / n;
    println!("{} impressions, total cost {:.1}, mean ctr {:.4}", log.len(), log.total_cost(), mean_ctr);
    for (name, per_cost) in KPI_NAMES.iter().zip(log.kpi_per_cost()) {
        println!("  {name:<7} per unit cost {per_cost:.5}");
    }
    println!("saved to {}", out.display());
    Ok(())
}

#[allow(dead_code)]
fn main() -> demand_bandit::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "bid_log.csv".into());
    run_example(Path::new(&out))
}
