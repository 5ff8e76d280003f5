//! Dropout as Thompson sampling: a fresh mask per call makes the proposed demand vary
//! around the mask-free estimate; without dropout every call returns the same demand.
//!
//! ```text
//! cargo run --release --example thompson_dropout
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use demand_bandit::agent::{forward, thompson_sample_demand, Architecture, FeatureVector, NetworkParams};

/// Welford's update: exactly zero for identical inputs.
fn sample_variance(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for x in xs {
        n += 1.0;
        let delta = x - mean;
        mean += delta / n;
        m2 += delta * (x - mean);
    }
    m2 / (n - 1.0)
}

pub fn run_example() -> demand_bandit::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let x = FeatureVector::new((0..16).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    for rate in [0.0, 0.2, 0.4, 0.8] {
        let mut init = ChaCha8Rng::seed_from_u64(1);
        let params = NetworkParams::init(Architecture::new(16, vec![64, 64]), rate, &mut init)?;
        let greedy = forward(&params, &x, None)?;
        let draws: Vec<[f64; 3]> = (0..1000)
            .map(|_| thompson_sample_demand(&params, &x, &mut rng).map(|(w, _)| *w.weights()))
            .collect::<Result<_, _>>()?;
        let var: Vec<f64> = (0..3).map(|k| sample_variance(draws.iter().map(|d| d[k]))).collect();
        println!(
            "dropout {rate:.1}: greedy {:?}\n             sample variance {:.3e} {:.3e} {:.3e}",
            greedy.weights().map(|v| (v * 1e4).round() / 1e4),
            var[0],
            var[1],
            var[2]
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> demand_bandit::Result<()> {
    run_example()
}
