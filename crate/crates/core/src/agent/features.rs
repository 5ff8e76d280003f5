//! Agent input layout.
//!
//! `x = [A (row-major, n*m) | c (m) | pooled history demand (n) | budget / budget_scale (1)]`

use serde::{Deserialize, Serialize};

use crate::bidlog::N_KPI;
use crate::env::{HistoryEntry, UnitObservation};
use crate::error::{Error, Result};

/// Bumped whenever the segment order or contents change.
pub const FEATURE_LAYOUT_VERSION: u32 = 1;

pub fn feature_dim(m: usize) -> usize {
    N_KPI * m + m + N_KPI + 1
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Contract(format!("feature value {bad} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Which past recommendations feed the pooled-history segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolingMode {
    #[default]
    AdoptedOnly,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureConfig {
    /// Zero the `A` and `c` segments (layout unchanged).
    pub ablate_demand_info: bool,
    /// Budgets are divided by this before entering the network.
    pub budget_scale: f64,
}

/// Mean of the recorded recommendations selected by `mode`; zero when none qualify.
pub fn pooled_history(history: &[HistoryEntry], mode: PoolingMode) -> [f64; N_KPI] {
    let mut sum = [0.0; N_KPI];
    let mut count = 0usize;
    for entry in history {
        if mode == PoolingMode::All || entry.adopted {
            for (s, w) in sum.iter_mut().zip(entry.demand.weights()) {
                *s += w;
            }
            count += 1;
        }
    }
    if count > 0 {
        sum.map(|s| s / count as f64)
    } else {
        sum
    }
}

pub fn build_features(
    obs: &UnitObservation,
    pooled: &[f64; N_KPI],
    config: &FeatureConfig,
) -> Result<FeatureVector> {
    let m = obs.feature_c.len();
    if obs.matrix_a.len() != N_KPI * m {
        return Err(Error::Contract(format!(
            "basis has {} entries, expected {} for m = {m}",
            obs.matrix_a.len(),
            N_KPI * m
        )));
    }
    if !(config.budget_scale.is_finite() && config.budget_scale > 0.0) {
        return Err(Error::Config(format!(
            "budget scale must be positive, got {}",
            config.budget_scale
        )));
    }
    let mut x = Vec::with_capacity(feature_dim(m));
    if config.ablate_demand_info {
        x.resize(N_KPI * m + m, 0.0);
    } else {
        x.extend_from_slice(&obs.matrix_a);
        x.extend_from_slice(&obs.feature_c);
    }
    x.extend_from_slice(pooled);
    x.push(obs.budget / config.budget_scale);
    FeatureVector::new(x)
}
