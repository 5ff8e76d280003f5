//! The full comparison: random demand, no dropout, four dropout rates and the 40% arm
//! without demand features, five seeds each. Prints the seed-averaged table and, given an
//! output directory, writes per-run metrics, `summary.csv` and the SVG curves.
//!
//! ```text
//! cargo run --release --example sweep -- [rounds] [out_dir]
//! ```

use std::time::Instant;

use demand_bandit::harness::{run_sweep, SweepConfig};

pub fn run_example(config: &SweepConfig) -> demand_bandit::Result<()> {
    let start = Instant::now();
    let result = run_sweep(config)?;
    println!("{:<28}{:>10}{:>8}{:>9}{:>9}", "arm", "AER", "AAR", "AER/max", "AAR/max");
    for s in &result.summary {
        println!(
            "{:<28}{:>10.3}{:>8.4}{:>9.4}{:>9.4}",
            s.arm, s.mean_aer, s.mean_aar, s.normalized_aer, s.normalized_aar
        );
    }
    println!("{} runs in {:.1?}", result.runs.len(), start.elapsed());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let mut config = SweepConfig::default();
    if let Some(rounds) = args.next() {
        config.base.rounds = rounds.parse()?;
    }
    config.out_dir = args.next().map(Into::into);
    run_example(&config)?;
    Ok(())
}
