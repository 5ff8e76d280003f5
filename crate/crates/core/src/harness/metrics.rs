//! Regret and adoption bookkeeping.

use serde::{Deserialize, Serialize};

use crate::env::EnvStep;
use crate::error::{Error, Result};

/// One round of an experiment. `cum_expected_regret` sums
/// `optimal_expected_reward - expected_reward`, `cum_adoption_rate` is realized
/// adoptions over rounds so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub t: usize,
    pub expected_reward: f64,
    pub optimal_expected_reward: f64,
    /// 1 if the advertiser adopted this round.
    pub realized: u8,
    pub cum_expected_regret: f64,
    pub cum_adoption_rate: f64,
}

#[derive(Debug, Clone, Default)]
pub struct MetricsTracker {
    rounds: usize,
    adopted: usize,
    regret: f64,
}

impl MetricsTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, step: &EnvStep) -> MetricsRow {
        self.rounds += 1;
        self.adopted += usize::from(step.reward);
        self.regret += step.adopt_prob_optimal - step.adopt_prob_recommended;
        MetricsRow {
            t: self.rounds,
            expected_reward: step.adopt_prob_recommended,
            optimal_expected_reward: step.adopt_prob_optimal,
            realized: u8::from(step.reward),
            cum_expected_regret: self.regret,
            cum_adoption_rate: self.adopted as f64 / self.rounds as f64,
        }
    }
}

/// `log(x + 1)` elementwise.
pub fn log_curve(series: &[f64]) -> Result<Vec<f64>> {
    series
        .iter()
        .map(|&x| {
            if x >= 0.0 && x.is_finite() {
                Ok(x.ln_1p())
            } else {
                Err(Error::Contract(format!("curve values must be finite and nonnegative, got {x}")))
            }
        })
        .collect()
}

/// Divides every series by the largest value across the whole group.
/// An all-zero group is returned unchanged.
pub fn normalize_group(group: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let max = group
        .iter()
        .flat_map(|s| s.iter().copied())
        .fold(0.0, f64::max);
    group
        .iter()
        .map(|s| {
            if max > 0.0 {
                s.iter().map(|x| x / max).collect()
            } else {
                s.clone()
            }
        })
        .collect()
}

/// Regret-curve preprocessing for plots: `log(x + 1)` per point, then normalization by
/// the maximum across every arm in the comparison group.
pub fn curve_transform(group: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let logged = group.iter().map(|s| log_curve(s)).collect::<Result<Vec<_>>>()?;
    Ok(normalize_group(&logged))
}

/// Column divided by its maximum, leaving all-zero columns alone.
pub fn max_normalize(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        values.iter().map(|v| v / max).collect()
    } else {
        values.to_vec()
    }
}
