//! The simulated advertiser: adoption probability as a function of the relative utility
//! gap, and how one ad unit responds to a few recommended demands.
//!
//! ```text
//! cargo run --release --example adoption_model
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use demand_bandit::bidding::DemandVector;
use demand_bandit::bidlog::{generate_log, LogGenParams};
use demand_bandit::env::{AdoptionModelParams, DemandBasis, Environment};

pub fn run_example() -> demand_bandit::Result<()> {
    let params = AdoptionModelParams::default();
    println!("gap    p(adopt)");
    for gap in [0.0, 0.01, 0.05, 0.1, 0.2, 0.3, 0.5, 1.0] {
        println!("{gap:<6} {:.4}", params.probability_for_gap(gap));
    }

    let log = generate_log(&LogGenParams::with_impressions(5_000), 3)?;
    let mut env = Environment::shared(DemandBasis::identity(), log, 10, (100.0, 400.0), params, 3)?;
    let unit = env.unit(0);
    println!(
        "\nunit 0: budget {:.1}, latent demand {:?}",
        unit.budget,
        unit.true_demand().weights()
    );
    let latent = *unit.true_demand();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for (name, w) in [
        ("latent", latent),
        ("uniform", DemandVector::uniform()),
        ("pv only", DemandVector::unit(0)),
        ("gmv only", DemandVector::unit(2)),
    ] {
        let step = env.step(0, &w, &mut rng)?;
        println!(
            "{name:<9} p_rec {:.4}  p_opt {:.4}  adopted {}",
            step.adopt_prob_recommended, step.adopt_prob_optimal, step.reward
        );
    }
    println!("history length {}", env.unit(0).adoption_history.len());
    Ok(())
}

#[allow(dead_code)]
fn main() -> demand_bandit::Result<()> {
    run_example()
}
