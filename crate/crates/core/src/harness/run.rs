//! The closed bandit loop.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{AgentMode, BasisSpec, ExperimentConfig};
use super::metrics::{MetricsRow, MetricsTracker};
use crate::agent::{
    build_features, feature_dim, normalize_performance, pooled_history, DemandAgent, FeatureConfig,
    TrainingExample,
};
use crate::bidding::DemandVector;
use crate::bidlog::{generate_log, load_log, BidLog};
use crate::env::{sample_simplex, DemandBasis, Environment, LogSharing};
use crate::error::{Error, Result};

/// Independent seed for a named sub-stream of an experiment (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_LOG: u64 = 1;
const STREAM_BASIS: u64 = 2;
const STREAM_UNITS: u64 = 3;
const STREAM_VISITS: u64 = 4;
const STREAM_REWARDS: u64 = 5;
const STREAM_RANDOM_POLICY: u64 = 6;
const STREAM_AGENT: u64 = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub arm: String,
    pub seed: u64,
    pub rows: Vec<MetricsRow>,
    /// Adoption-head logit offset at the end of the run (learned mode only).
    pub adoption_bias: Option<f64>,
}

impl RunResult {
    pub fn final_regret(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cum_expected_regret)
    }

    pub fn final_adoption_rate(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cum_adoption_rate)
    }
}

fn load_or_generate(config: &ExperimentConfig, seed: u64) -> Result<BidLog> {
    match &config.log.path {
        Some(path) => load_log(path),
        None => generate_log(
            &config.log.generate,
            config.log.seed.unwrap_or_else(|| derive_seed(seed, STREAM_LOG)),
        ),
    }
}

/// Builds the environment for `(config, seed)`. The log, basis and units depend only on
/// the seed and the environment settings, so arms compared under one seed face the same
/// advertisers.
pub fn build_environment(config: &ExperimentConfig, seed: u64) -> Result<Environment> {
    config.validate()?;
    let basis = match config.basis {
        BasisSpec::Identity => DemandBasis::identity(),
        BasisSpec::Random { m } => {
            DemandBasis::random(m, &mut ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_BASIS)))?
        }
    };
    let units_seed = derive_seed(seed, STREAM_UNITS);
    match config.log.sharing {
        LogSharing::Shared => Environment::shared(
            basis,
            load_or_generate(config, seed)?,
            config.n_units,
            config.budget_range,
            config.adoption,
            units_seed,
        ),
        LogSharing::PerUnit => {
            if config.log.path.is_some() {
                return Err(Error::Config("per-unit logs are generated, not loaded".into()));
            }
            let base = config.log.seed.unwrap_or_else(|| derive_seed(seed, STREAM_LOG));
            let logs = (0..config.n_units as u64)
                .map(|u| generate_log(&config.log.generate, derive_seed(base, u)))
                .collect::<Result<Vec<_>>>()?;
            Environment::per_unit(basis, logs, config.budget_range, config.adoption, units_seed)
        }
    }
}

fn numeric(round: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Contract(message) => Error::Numeric { round, message },
        other => other,
    }
}

/// Runs `config.rounds` rounds under `seed` and returns one metrics row per round.
pub fn run_experiment(config: &ExperimentConfig, seed: u64) -> Result<RunResult> {
    let mut env = build_environment(config, seed)?;
    let m = env.basis().m();
    let budget_scale = 0.5 * (config.budget_range.0 + config.budget_range.1);
    let features = FeatureConfig {
        ablate_demand_info: config.ablate_demand_info,
        budget_scale,
    };
    let mut agent = match config.agent_mode {
        AgentMode::Learned => Some(DemandAgent::new(
            feature_dim(m),
            &config.agent,
            config.dropout_rate,
            derive_seed(seed, STREAM_AGENT),
        )?),
        _ => None,
    };
    let kpi_scales: Vec<_> = (0..env.units().len())
        .map(|u| env.log_for(u).kpi_per_cost())
        .collect();

    let mut visit_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_VISITS));
    let mut reward_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_REWARDS));
    let mut policy_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_RANDOM_POLICY));
    let mut tracker = MetricsTracker::new();
    let mut rows = Vec::with_capacity(config.rounds);

    for t in 1..=config.rounds {
        let unit_id = env.visit(&mut visit_rng)?;
        let unit = env.unit(unit_id);
        let pooled = pooled_history(&unit.adoption_history, config.agent.pooling);
        let x = build_features(&env.observe(unit_id), &pooled, &features).map_err(numeric(t))?;

        let demand = match (config.agent_mode, agent.as_mut()) {
            (AgentMode::Learned, Some(agent)) => agent.propose(&x).map_err(numeric(t))?.0,
            (AgentMode::RandomDemand, _) => {
                let c = sample_simplex(crate::bidlog::N_KPI, &mut policy_rng);
                DemandVector::normalized([c[0], c[1], c[2]])?
            }
            (AgentMode::Oracle, _) => *unit.true_demand(),
            (AgentMode::Learned, None) => unreachable!("learned mode always builds an agent"),
        };

        let budget = unit.budget;
        let step = env.step(unit_id, &demand, &mut reward_rng)?;
        let row = tracker.record(&step);
        if !(row.cum_expected_regret.is_finite() && row.expected_reward.is_finite()) {
            return Err(Error::Numeric {
                round: t,
                message: "non-finite reward bookkeeping".into(),
            });
        }
        rows.push(row);

        if let Some(agent) = agent.as_mut() {
            let perf_norm = normalize_performance(&step.recommended_performance, budget, &kpi_scales[unit_id]);
            agent.record(TrainingExample::new(x, perf_norm, step.reward).map_err(numeric(t))?);
            agent.train().map_err(numeric(t))?;
        }
    }

    Ok(RunResult {
        arm: config.name.clone(),
        seed,
        rows,
        adoption_bias: agent.map(|a| a.params().adoption_bias()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bidlog::LogGenParams;

    fn small(mode: AgentMode) -> ExperimentConfig {
        let mut c = ExperimentConfig {
            rounds: 60,
            n_units: 5,
            agent_mode: mode,
            ..Default::default()
        };
        c.log.generate = LogGenParams::with_impressions(500);
        c.budget_range = (20.0, 40.0);
        c
    }

    #[test]
    fn one_round_run() {
        let c = ExperimentConfig {
            rounds: 1,
            ..small(AgentMode::RandomDemand)
        };
        let r = run_experiment(&c, 3).unwrap();
        assert_eq!(r.rows.len(), 1);
        let row = &r.rows[0];
        assert_eq!(row.cum_expected_regret, row.optimal_expected_reward - row.expected_reward);
        assert!(row.cum_adoption_rate == 0.0 || row.cum_adoption_rate == 1.0);
    }

    #[test]
    fn oracle_has_zero_regret() {
        let r = run_experiment(&small(AgentMode::Oracle), 1).unwrap();
        assert!(r.rows.iter().all(|row| row.cum_expected_regret == 0.0));
    }

    #[test]
    fn learned_runs_are_reproducible() {
        let c = small(AgentMode::Learned);
        assert_eq!(run_experiment(&c, 9).unwrap(), run_experiment(&c, 9).unwrap());
    }

    #[test]
    fn regret_is_nondecreasing_and_rates_bounded() {
        for mode in [AgentMode::Learned, AgentMode::RandomDemand] {
            let r = run_experiment(&small(mode), 2).unwrap();
            for w in r.rows.windows(2) {
                assert!(w[1].cum_expected_regret >= w[0].cum_expected_regret);
            }
            assert!(r.rows.iter().all(|row| (0.0..=1.0).contains(&row.cum_adoption_rate)));
        }
    }

    #[test]
    fn per_unit_logs_are_supported() {
        let mut c = small(AgentMode::RandomDemand);
        c.log.sharing = LogSharing::PerUnit;
        let env = build_environment(&c, 4).unwrap();
        assert_ne!(env.log_for(0), env.log_for(1));
        run_experiment(&c, 4).unwrap();
    }

    #[test]
    fn derived_seeds_differ_by_stream() {
        assert_ne!(derive_seed(1, 1), derive_seed(1, 2));
        assert_ne!(derive_seed(1, 1), derive_seed(2, 1));
        assert_eq!(derive_seed(5, 3), derive_seed(5, 3));
    }
}
