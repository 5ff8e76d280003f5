//! The closed loop written out by hand with the library pieces: observe a unit, sample a
//! demand under dropout, let the simulated advertiser respond, learn from the response.
//! The trained network is then checkpointed and restored.
//!
//! ```text
//! cargo run --release --example bandit_loop -- [rounds] [checkpoint_stem]
//! ```

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use demand_bandit::agent::{
    build_features, feature_dim, load_checkpoint, normalize_performance, pooled_history, save_checkpoint,
    AgentConfig, DemandAgent, FeatureConfig, TrainOutcome, TrainingExample,
};
use demand_bandit::bidlog::{generate_log, LogGenParams};
use demand_bandit::env::{AdoptionModelParams, DemandBasis, Environment};

pub fn run_example(rounds: usize, checkpoint: &Path) -> demand_bandit::Result<()> {
    let log = generate_log(&LogGenParams::with_impressions(5_000), 1)?;
    let kpi_per_cost = log.kpi_per_cost();
    let budget_range = (100.0, 400.0);
    let mut env = Environment::shared(
        DemandBasis::identity(),
        log,
        200,
        budget_range,
        AdoptionModelParams::default(),
        1,
    )?;
    let config = AgentConfig::default();
    let mut agent = DemandAgent::new(feature_dim(env.basis().m()), &config, 0.4, 1)?;
    let features = FeatureConfig {
        ablate_demand_info: false,
        budget_scale: 0.5 * (budget_range.0 + budget_range.1),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut adopted, mut regret, mut last_loss) = (0usize, 0.0, None);
    for t in 1..=rounds {
        let id = env.visit(&mut rng)?;
        let unit = env.unit(id);
        let budget = unit.budget;
        let pooled = pooled_history(&unit.adoption_history, config.pooling);
        let x = build_features(&env.observe(id), &pooled, &features)?;
        let (w, _mask_seed) = agent.propose(&x)?;
        let step = env.step(id, &w, &mut rng)?;

        adopted += usize::from(step.reward);
        regret += step.adopt_prob_optimal - step.adopt_prob_recommended;
        let perf = normalize_performance(&step.recommended_performance, budget, &kpi_per_cost);
        agent.record(TrainingExample::new(x, perf, step.reward)?);
        if let TrainOutcome::Trained { loss } = agent.train()? {
            last_loss = Some(loss);
        }
        if t % (rounds / 5).max(1) == 0 {
            println!(
                "t {t:>5}: AER {regret:>8.3}  AAR {:.4}  loss {}",
                adopted as f64 / t as f64,
                last_loss.map_or("-".into(), |l| format!("{l:.4}"))
            );
        }
    }

    save_checkpoint(agent.params(), checkpoint)?;
    let restored = load_checkpoint(checkpoint)?;
    assert_eq!(&restored, agent.params());
    println!(
        "checkpoint {} restored, adoption bias {:.4}",
        checkpoint.display(),
        restored.adoption_bias()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let rounds = args.next().map_or(Ok(2000), |r| r.parse())?;
    let stem = args.next().unwrap_or_else(|| "agent_checkpoint".into());
    run_example(rounds, Path::new(&stem))?;
    Ok(())
}
