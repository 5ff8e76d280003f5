//! Multi-arm, multi-seed sweeps.

use std::path::Path;

use rayon::prelude::*;

use super::config::SweepConfig;
use super::metrics::max_normalize;
use super::output::{metrics_file_name, write_metrics, write_summary};
use super::plot::write_sweep_plots;
use super::run::{run_experiment, RunResult};
use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

/// Environment variable capping the number of concurrently running tasks.
pub const THREADS_ENV: &str = "DB_THREADS";

/// Parallelism allowed by `DB_THREADS`; `None` when unset (use all cores).
pub fn thread_limit() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
        Err(e) => Err(Error::Config(format!("{THREADS_ENV}: {e}"))),
    }
}

/// Seed-averaged results of one arm.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmSummary {
    pub arm: String,
    pub seeds: Vec<u64>,
    /// Mean final accumulated expected regret.
    pub mean_aer: f64,
    /// Mean final accumulated adoption rate.
    pub mean_aar: f64,
    pub normalized_aer: f64,
    pub normalized_aar: f64,
    /// Mean final adoption-head bias, for learned arms.
    pub mean_adoption_bias: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Arm-major, seeds in configuration order.
    pub runs: Vec<RunResult>,
    pub summary: Vec<ArmSummary>,
}

impl SweepResult {
    pub fn arm(&self, name: &str) -> Option<&ArmSummary> {
        self.summary.iter().find(|s| s.arm == name)
    }

    pub fn runs_of<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a RunResult> + 'a {
        self.runs.iter().filter(move |r| r.arm == name)
    }

    /// Per-round mean over seeds of `field` for one arm.
    pub fn mean_curve(&self, name: &str, field: impl Fn(&super::MetricsRow) -> f64) -> Vec<f64> {
        let runs: Vec<_> = self.runs_of(name).collect();
        let len = runs.iter().map(|r| r.rows.len()).min().unwrap_or(0);
        (0..len)
            .map(|t| {
                let s: CompensatedSum = runs.iter().map(|r| field(&r.rows[t])).collect();
                s.value() / runs.len() as f64
            })
            .collect()
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut n = 0usize;
    let s: CompensatedSum = values.inspect(|_| n += 1).collect();
    if n == 0 {
        0.0
    } else {
        s.value() / n as f64
    }
}

/// Seed-averaged finals per arm with both columns max-normalized.
pub fn summarize(runs: &[RunResult], arm_order: &[String]) -> Vec<ArmSummary> {
    let mut summary: Vec<ArmSummary> = arm_order
        .iter()
        .map(|arm| {
            let mine: Vec<_> = runs.iter().filter(|r| &r.arm == arm).collect();
            let biases: Vec<f64> = mine.iter().filter_map(|r| r.adoption_bias).collect();
            ArmSummary {
                arm: arm.clone(),
                seeds: mine.iter().map(|r| r.seed).collect(),
                mean_aer: mean(mine.iter().map(|r| r.final_regret())),
                mean_aar: mean(mine.iter().map(|r| r.final_adoption_rate())),
                normalized_aer: 0.0,
                normalized_aar: 0.0,
                mean_adoption_bias: (!biases.is_empty()).then(|| mean(biases.into_iter())),
            }
        })
        .collect();
    let aer = max_normalize(&summary.iter().map(|s| s.mean_aer).collect::<Vec<_>>());
    let aar = max_normalize(&summary.iter().map(|s| s.mean_aar).collect::<Vec<_>>());
    for (s, (a, b)) in summary.iter_mut().zip(aer.into_iter().zip(aar)) {
        s.normalized_aer = a;
        s.normalized_aar = b;
    }
    summary
}

/// Runs every arm under every seed. Tasks are independent and run in parallel (capped by
/// `DB_THREADS`); results are ordered deterministically regardless of scheduling. With an
/// output directory each task writes its own metrics file, and the summary and plots are
/// written after all tasks finish.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    if config.arms.is_empty() || config.seeds.is_empty() {
        return Err(Error::Config("a sweep needs at least one arm and one seed".into()));
    }
    let arm_configs = config.arm_configs();
    let mut names: Vec<String> = Vec::new();
    for c in &arm_configs {
        if names.contains(&c.name) {
            return Err(Error::Config(format!("duplicate arm name `{}`", c.name)));
        }
        c.validate()
            .map_err(|e| Error::Config(format!("arm `{}`: {e}", c.name)))?;
        names.push(c.name.clone());
    }
    let out_dir = config.out_dir.as_deref();
    let tasks: Vec<_> = arm_configs
        .iter()
        .flat_map(|c| config.seeds.iter().map(move |&s| (c, s)))
        .collect();

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_limit()? {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let runs = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(c, seed)| {
                let task = || {
                    let result = run_experiment(c, seed)?;
                    if let Some(dir) = out_dir {
                        write_metrics(&dir.join(metrics_file_name(&c.name, seed)), &result.rows)?;
                    }
                    Ok(result)
                };
                task().map_err(|e: Error| Error::Arm {
                    arm: c.name.clone(),
                    seed,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let summary = summarize(&runs, &names);
    let result = SweepResult { runs, summary };
    if let Some(dir) = out_dir {
        write_sweep_outputs(&result, dir)?;
    }
    Ok(result)
}

/// `summary.csv` plus the regret and adoption plots.
pub fn write_sweep_outputs(result: &SweepResult, dir: &Path) -> Result<()> {
    write_summary(&dir.join("summary.csv"), &result.summary)?;
    write_sweep_plots(result, dir)?;
    Ok(())
}
