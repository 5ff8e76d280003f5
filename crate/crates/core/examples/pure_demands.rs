//! Bids for each pure demand (PV only, clicks only, GMV only) on one log and prints the
//! KPI matrix with every column divided by its maximum. Each demand wins its own KPI.
//!
//! ```text
//! cargo run --release --example pure_demands
//! ```

use demand_bandit::bidding::{pure_demand_table, simulate_bidding, DemandVector};
use demand_bandit::bidlog::{generate_log, LogGenParams, KPI_NAMES};

pub fn run_example() -> demand_bandit::Result<()> {
    let log = generate_log(&LogGenParams::default(), 11)?;
    let budget = 0.1 * log.total_cost();

    for (k, name) in KPI_NAMES.iter().enumerate() {
        let out = simulate_bidding(&DemandVector::unit(k), budget, &log)?;
        println!(
            "e_{:<7} wins {:>5} impressions, spend {:>8.2}, lambda {:.5}",
            name, out.won_count, out.spend, out.lambda
        );
    }

    let table = pure_demand_table(&log, budget)?;
    println!("\n{:<10}{:>8}{:>8}{:>8}", "demand", KPI_NAMES[0], KPI_NAMES[1], KPI_NAMES[2]);
    for (k, row) in table.iter().enumerate() {
        println!("e_{:<8}{:>8.4}{:>8.4}{:>8.4}", KPI_NAMES[k], row[0], row[1], row[2]);
        assert_eq!(row[k], 1.0);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> demand_bandit::Result<()> {
    run_example()
}
