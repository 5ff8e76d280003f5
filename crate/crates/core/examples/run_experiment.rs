//! One experiment arm: the learned agent with 40% dropout against random demand on the
//! same advertisers, with the metrics of the learned run written as CSV.
//!
//! ```text
//! cargo run --release --example run_experiment -- [rounds] [out_dir]
//! ```

use std::path::Path;

use demand_bandit::harness::{metrics_file_name, run_experiment, write_metrics, AgentMode, ExperimentConfig};

pub fn run_example(rounds: usize, out_dir: &Path) -> demand_bandit::Result<()> {
    let learned = ExperimentConfig {
        name: "dropout_40".into(),
        rounds,
        ..ExperimentConfig::default()
    };
    let random = ExperimentConfig {
        name: "random".into(),
        agent_mode: AgentMode::RandomDemand,
        ..learned.clone()
    };
    for config in [&random, &learned] {
        let result = run_experiment(config, 0)?;
        println!(
            "{:<11} AER {:>8.3}  AAR {:.4}",
            config.name,
            result.final_regret(),
            result.final_adoption_rate()
        );
        if config.agent_mode == AgentMode::Learned {
            let path = out_dir.join(metrics_file_name(&config.name, 0));
            write_metrics(&path, &result.rows)?;
            println!("adoption bias {:.3}, metrics in {}", result.adoption_bias.unwrap_or(0.0), path.display());
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let rounds = args.next().map_or(Ok(2000), |r| r.parse())?;
    let out = args.next().unwrap_or_else(|| ".".into());
    run_example(rounds, Path::new(&out))?;
    Ok(())
}
