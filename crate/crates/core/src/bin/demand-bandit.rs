use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use demand_bandit::bidding::pure_demand_table;
use demand_bandit::bidlog::{generate_log, load_log, save_log, LogGenParams, KPI_NAMES};
use demand_bandit::harness::{
    metrics_file_name, run_experiment, run_sweep, write_demand_table, write_metrics, ExperimentConfig,
    SweepConfig,
};
use demand_bandit::{Error, Result};

/// Advertiser-demand bandit simulator.
#[derive(Debug, Parser)]
#[command(name = "demand-bandit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic bid log (CSV plus `<stem>.meta.json`).
    GenLog(GenLogArgs),
    /// Run one experiment and write `metrics_<arm>_<seed>.csv`.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: the config's `out_dir`, else the current directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every arm over every seed and write metrics, `summary.csv` and SVG plots.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// KPI table of the three pure demands, each column max-normalized.
    Table2 {
        #[arg(long)]
        log: PathBuf,
        /// Budget as a fraction of the log's total cost.
        #[arg(long)]
        budget_frac: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct GenLogArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    ctr_alpha: Option<f64>,
    #[arg(long)]
    ctr_beta: Option<f64>,
    #[arg(long)]
    cvr_alpha: Option<f64>,
    #[arg(long)]
    cvr_beta: Option<f64>,
    #[arg(long)]
    price_mu: Option<f64>,
    #[arg(long)]
    price_sigma: Option<f64>,
    #[arg(long)]
    cost_base: Option<f64>,
    #[arg(long)]
    cost_noise: Option<f64>,
}

impl GenLogArgs {
    fn params(&self) -> LogGenParams {
        let d = LogGenParams::with_impressions(self.n);
        LogGenParams {
            ctr_alpha: self.ctr_alpha.unwrap_or(d.ctr_alpha),
            ctr_beta: self.ctr_beta.unwrap_or(d.ctr_beta),
            cvr_alpha: self.cvr_alpha.unwrap_or(d.cvr_alpha),
            cvr_beta: self.cvr_beta.unwrap_or(d.cvr_beta),
            price_mu: self.price_mu.unwrap_or(d.price_mu),
            price_sigma: self.price_sigma.unwrap_or(d.price_sigma),
            cost_base: self.cost_base.unwrap_or(d.cost_base),
            cost_noise: self.cost_noise.unwrap_or(d.cost_noise),
            ..d
        }
    }
}

fn gen_log(args: &GenLogArgs) -> Result<()> {
    let log = generate_log(&args.params(), args.seed)?;
    save_log(&log, &args.out)?;
    println!(
        "wrote {} impressions (total cost {:.2}) to {}",
        log.len(),
        log.total_cost(),
        args.out.display()
    );
    Ok(())
}

fn run(config: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<()> {
    let config = ExperimentConfig::from_file(config)?;
    let seed = seed.unwrap_or(config.seed);
    let out = out.or_else(|| config.out_dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    let result = run_experiment(&config, seed)?;
    let path = out.join(metrics_file_name(&config.name, seed));
    write_metrics(&path, &result.rows)?;
    print!(
        "{} seed {seed}: AER {:.4}, AAR {:.4}",
        config.name,
        result.final_regret(),
        result.final_adoption_rate()
    );
    if let Some(b) = result.adoption_bias {
        print!(", adoption bias {b:.4}");
    }
    println!("\nwrote {}", path.display());
    Ok(())
}

fn sweep(config: &Path, out: Option<PathBuf>) -> Result<()> {
    let mut config = SweepConfig::from_file(config)?;
    if out.is_some() {
        config.out_dir = out;
    }
    let result = run_sweep(&config)?;
    println!("{:<28} {:>12} {:>8} {:>8} {:>8} {:>8}", "arm", "AER", "AAR", "AER/max", "AAR/max", "bias");
    for s in &result.summary {
        let bias = s.mean_adoption_bias.map_or_else(|| "-".to_string(), |b| format!("{b:.3}"));
        println!(
            "{:<28} {:>12.4} {:>8.4} {:>8.4} {:>8.4} {:>8}",
            s.arm, s.mean_aer, s.mean_aar, s.normalized_aer, s.normalized_aar, bias
        );
    }
    if let Some(dir) = &config.out_dir {
        println!("wrote metrics, summary.csv, regret.svg and adoption.svg to {}", dir.display());
    }
    Ok(())
}

fn table2(log: &Path, budget_frac: f64, out: Option<PathBuf>) -> Result<()> {
    if !(budget_frac.is_finite() && budget_frac > 0.0) {
        return Err(Error::Config(format!("--budget-frac must be positive, got {budget_frac}")));
    }
    let log = load_log(log)?;
    let table = pure_demand_table(&log, budget_frac * log.total_cost())?;
    println!("{:<10} {:>8} {:>8} {:>8}", "demand", KPI_NAMES[0], KPI_NAMES[1], KPI_NAMES[2]);
    for (name, row) in KPI_NAMES.iter().zip(&table) {
        println!("{:<10} {:>8.4} {:>8.4} {:>8.4}", format!("e_{name}"), row[0], row[1], row[2]);
    }
    if let Some(path) = out {
        write_demand_table(&path, &table)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::GenLog(args) => gen_log(&args),
        Command::Run { config, seed, out } => run(&config, seed, out),
        Command::Sweep { config, out } => sweep(&config, out),
        Command::Table2 { log, budget_frac, out } => table2(&log, budget_frac, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
