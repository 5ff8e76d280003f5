//! The demand-estimating bandit agent.
//!
//! A feed-forward network maps observable unit features to a demand vector. The
//! recommended strategy is the bidding oracle's answer for that demand; the network is
//! trained to predict whether the advertiser adopts it, `sigmoid(w . v + b)`, from a
//! class-balanced replay buffer. Exploration comes from acting under a freshly sampled
//! dropout mask each round, a cheap stand-in for drawing network weights from a
//! posterior.

pub mod checkpoint;
pub mod features;
pub mod network;
pub mod optim;
pub mod replay;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_FORMAT_VERSION};
pub use features::{build_features, feature_dim, pooled_history, FeatureConfig, FeatureVector, PoolingMode};
pub use network::{
    backward, forward, loss, loss_and_gradients, predict_adoption, thompson_sample_demand,
    Architecture, DropoutMask, Gradients, NetworkParams,
};
pub use optim::{adam_step, AdamHyper, AdamState};
pub use replay::{ReplayBuffer, TrainingExample};

use crate::bidding::{DemandVector, KpiVector};
use crate::bidlog::N_KPI;
use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub hidden: Vec<usize>,
    pub adam: AdamHyper,
    pub batch_size: usize,
    /// Per class.
    pub buffer_capacity: usize,
    pub pooling: PoolingMode,
    /// Optimizer updates per environment round.
    pub train_steps_per_round: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            adam: AdamHyper::default(),
            batch_size: 32,
            buffer_capacity: 2048,
            pooling: PoolingMode::AdoptedOnly,
            train_steps_per_round: 1,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        self.adam.validate()?;
        if self.batch_size < 2 {
            return Err(Error::Config("batch_size must be at least 2".into()));
        }
        if self.buffer_capacity == 0 || self.hidden.contains(&0) {
            return Err(Error::Config("buffer capacity and hidden widths must be positive".into()));
        }
        Ok(())
    }
}

/// `v[i] / (kpi_per_cost[i] * budget)`: performance relative to what an average
/// impression mix would buy with the same budget.
pub fn normalize_performance(perf: &KpiVector, budget: f64, kpi_per_cost: &[f64; N_KPI]) -> KpiVector {
    KpiVector(std::array::from_fn(|i| {
        let denom = kpi_per_cost[i] * budget;
        if denom > 0.0 {
            perf.values()[i] / denom
        } else {
            0.0
        }
    }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrainOutcome {
    /// Not enough examples of one class yet; nothing changed.
    Skipped,
    Trained { loss: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainHyper {
    pub adam: AdamHyper,
    pub batch_size: usize,
}

/// One balanced mini-batch update, each example under its own dropout mask.
///
/// Before the very first update the adoption bias is centered on that batch: `b` is set
/// to minus the mean of `w . v`, so the head starts at even odds as the 1:1 batches
/// require. Left at zero, `b` moves one Adam step at a time while the softmax logits move
/// through every hidden unit at once, and the only quick way to fit the first negatives
/// is to swing the demand away from whatever was being recommended.
pub fn train_step<R: Rng + ?Sized>(
    buffer: &ReplayBuffer,
    params: &mut NetworkParams,
    opt_state: &mut AdamState,
    rng: &mut R,
    hyper: &TrainHyper,
) -> Result<TrainOutcome> {
    let Some(batch) = buffer.sample_balanced(hyper.batch_size, rng) else {
        return Ok(TrainOutcome::Skipped);
    };
    let masks: Vec<DropoutMask> = batch.iter().map(|_| DropoutMask::sample(params, rng)).collect();
    if opt_state.steps() == 0 {
        let mut logits = CompensatedSum::new();
        for (ex, mask) in batch.iter().zip(&masks) {
            logits.add(forward(params, &ex.features, Some(mask))?.dot(&ex.perf_norm));
        }
        params.set_adoption_bias(-logits.value() / batch.len() as f64);
    }
    let (loss, grads) = loss_and_gradients(&batch, params, &masks)?;
    if !loss.is_finite() || grads.0.iter().any(|g| !g.is_finite()) {
        return Err(Error::Contract("non-finite loss or gradient".into()));
    }
    adam_step(params.flat_mut(), &grads.0, opt_state, &hyper.adam)?;
    Ok(TrainOutcome::Trained { loss })
}

/// Network, optimizer state, replay buffer and random streams of one learner.
#[derive(Debug, Clone)]
pub struct DemandAgent {
    params: NetworkParams,
    opt_state: AdamState,
    buffer: ReplayBuffer,
    hyper: TrainHyper,
    steps_per_round: usize,
    action_rng: ChaCha8Rng,
    train_rng: ChaCha8Rng,
}

impl DemandAgent {
    pub fn new(input_dim: usize, config: &AgentConfig, dropout_rate: f64, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
        init_rng.set_stream(0);
        let arch = Architecture::new(input_dim, config.hidden.clone());
        let params = NetworkParams::init(arch, dropout_rate, &mut init_rng)?;
        let mut action_rng = ChaCha8Rng::seed_from_u64(seed);
        action_rng.set_stream(1);
        let mut train_rng = ChaCha8Rng::seed_from_u64(seed);
        train_rng.set_stream(2);
        Ok(Self {
            opt_state: AdamState::new(params.flat().len()),
            params,
            buffer: ReplayBuffer::new(config.buffer_capacity)?,
            hyper: TrainHyper {
                adam: config.adam,
                batch_size: config.batch_size,
            },
            steps_per_round: config.train_steps_per_round,
            action_rng,
            train_rng,
        })
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    /// Thompson-sampled demand for `x` plus the mask seed that produced it.
    pub fn propose(&mut self, x: &FeatureVector) -> Result<(DemandVector, u64)> {
        thompson_sample_demand(&self.params, x, &mut self.action_rng)
    }

    /// Mask-free demand for `x`.
    pub fn greedy(&self, x: &FeatureVector) -> Result<DemandVector> {
        forward(&self.params, x, None)
    }

    pub fn record(&mut self, example: TrainingExample) {
        self.buffer.push(example);
    }

    /// Runs the configured number of updates; returns the last outcome.
    pub fn train(&mut self) -> Result<TrainOutcome> {
        let mut outcome = TrainOutcome::Skipped;
        for _ in 0..self.steps_per_round {
            outcome = train_step(
                &self.buffer,
                &mut self.params,
                &mut self.opt_state,
                &mut self.train_rng,
                &self.hyper,
            )?;
            if outcome == TrainOutcome::Skipped {
                break;
            }
        }
        Ok(outcome)
    }
}
