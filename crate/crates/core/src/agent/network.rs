//! Demand network and adoption head.
//!
//! `w = softmax(W_L relu(... relu(W_1 x + b_1) * mask_1 ...) + b_L)` and the predicted
//! adoption probability is `sigmoid(w . v + b)`, with `v` the budget-normalized
//! performance report. All parameters live in one flat vector so the optimizer and the
//! gradient checker can treat them uniformly.

use std::ops::Range;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::FeatureVector;
use super::replay::TrainingExample;
use crate::bidding::{DemandVector, KpiVector};
use crate::bidlog::N_KPI;
use crate::error::{Error, Result};
use crate::numeric::sigmoid;

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside the log of the loss.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub output: usize,
}

impl Architecture {
    pub fn new(input: usize, hidden: Vec<usize>) -> Self {
        Self {
            input,
            hidden,
            output: N_KPI,
        }
    }

    /// `(fan_in, fan_out)` for each dense layer.
    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        let mut fan_in = self.input;
        for &h in &self.hidden {
            dims.push((fan_in, h));
            fan_in = h;
        }
        dims.push((fan_in, self.output));
        dims
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum::<usize>() + 1
    }
}

/// Offsets of one dense layer inside the flat parameter vector.
#[derive(Debug, Clone)]
struct LayerSpan {
    fan_in: usize,
    fan_out: usize,
    weights: Range<usize>,
    bias: Range<usize>,
}

fn spans(arch: &Architecture) -> Vec<LayerSpan> {
    let mut offset = 0;
    arch.layer_dims()
        .into_iter()
        .map(|(fan_in, fan_out)| {
            let weights = offset..offset + fan_in * fan_out;
            let bias = weights.end..weights.end + fan_out;
            offset = bias.end;
            LayerSpan {
                fan_in,
                fan_out,
                weights,
                bias,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    arch: Architecture,
    theta: Vec<f64>,
    dropout_rate: f64,
}

impl NetworkParams {
    /// Weights uniform in `(-1/sqrt(fan_in), 1/sqrt(fan_in))`, biases and the adoption
    /// bias at zero.
    pub fn init<R: Rng + ?Sized>(arch: Architecture, dropout_rate: f64, rng: &mut R) -> Result<Self> {
        let mut params = Self::zeros(arch, dropout_rate)?;
        for span in spans(&params.arch) {
            let bound = 1.0 / (span.fan_in as f64).sqrt();
            for w in &mut params.theta[span.weights] {
                *w = rng.random_range(-bound..bound);
            }
        }
        Ok(params)
    }

    pub fn zeros(arch: Architecture, dropout_rate: f64) -> Result<Self> {
        let theta = vec![0.0; arch.parameter_count()];
        Self::from_flat(arch, theta, dropout_rate)
    }

    pub fn from_flat(arch: Architecture, theta: Vec<f64>, dropout_rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(Error::Config(format!(
                "dropout rate must lie in [0, 1), got {dropout_rate}"
            )));
        }
        if arch.input == 0 || arch.output == 0 || arch.hidden.contains(&0) {
            return Err(Error::Config(format!("degenerate architecture {arch:?}")));
        }
        if theta.len() != arch.parameter_count() {
            return Err(Error::Contract(format!(
                "parameter vector has {} entries, architecture needs {}",
                theta.len(),
                arch.parameter_count()
            )));
        }
        Ok(Self {
            arch,
            theta,
            dropout_rate,
        })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout_rate
    }

    pub fn flat(&self) -> &[f64] {
        &self.theta
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    /// Trainable logit offset of the adoption head.
    pub fn adoption_bias(&self) -> f64 {
        self.theta[self.theta.len() - 1]
    }

    pub fn set_adoption_bias(&mut self, b: f64) {
        let last = self.theta.len() - 1;
        self.theta[last] = b;
    }

    /// Named tensors `(name, rows, cols, values)` in flat order, for checkpoints.
    pub fn tensors(&self) -> Vec<(String, usize, usize, &[f64])> {
        let mut out = Vec::new();
        for (l, span) in spans(&self.arch).into_iter().enumerate() {
            out.push((
                format!("layer{l}.weight"),
                span.fan_out,
                span.fan_in,
                &self.theta[span.weights],
            ));
            out.push((format!("layer{l}.bias"), span.fan_out, 1, &self.theta[span.bias]));
        }
        let n = self.theta.len();
        out.push(("adoption.bias".to_string(), 1, 1, &self.theta[n - 1..]));
        out
    }
}

/// One sampled sub-network: a keep/drop pattern per hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    layers: Vec<Vec<f64>>,
}

impl DropoutMask {
    /// Inverted dropout: kept units are scaled by `1 / (1 - rate)`.
    pub fn sample<R: Rng + ?Sized>(params: &NetworkParams, rng: &mut R) -> Self {
        let rate = params.dropout_rate;
        let scale = 1.0 / (1.0 - rate);
        let layers = params
            .arch
            .hidden
            .iter()
            .map(|&h| {
                (0..h)
                    .map(|_| {
                        if rate > 0.0 && rng.random::<f64>() < rate {
                            0.0
                        } else {
                            scale
                        }
                    })
                    .collect()
            })
            .collect();
        Self { layers }
    }

    /// Mask derived from a standalone seed, so the draw can be replayed from the seed alone.
    pub fn from_seed(params: &NetworkParams, seed: u64) -> Self {
        Self::sample(params, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn layers(&self) -> &[Vec<f64>] {
        &self.layers
    }

    fn check(&self, arch: &Architecture) -> Result<()> {
        let ok = self.layers.len() == arch.hidden.len()
            && self.layers.iter().zip(&arch.hidden).all(|(m, &h)| m.len() == h);
        if ok {
            Ok(())
        } else {
            Err(Error::Contract("dropout mask shape does not match the network".into()))
        }
    }
}

/// Intermediate values kept for backpropagation.
struct Trace {
    /// Input to each dense layer (after relu and mask for hidden layers).
    layer_inputs: Vec<Vec<f64>>,
    /// Hidden pre-activations.
    pre_activations: Vec<Vec<f64>>,
    output: [f64; N_KPI],
}

fn softmax(z: &[f64]) -> [f64; N_KPI] {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = [0.0; N_KPI];
    let mut total = 0.0;
    for (o, &zi) in out.iter_mut().zip(z) {
        *o = (zi - max).exp();
        total += *o;
    }
    out.map(|e| e / total)
}

fn dense(theta: &[f64], span: &LayerSpan, input: &[f64]) -> Vec<f64> {
    let w = &theta[span.weights.clone()];
    let b = &theta[span.bias.clone()];
    (0..span.fan_out)
        .map(|o| {
            let row = &w[o * span.fan_in..(o + 1) * span.fan_in];
            row.iter().zip(input).map(|(a, x)| a * x).sum::<f64>() + b[o]
        })
        .collect()
}

fn forward_trace(params: &NetworkParams, x: &[f64], mask: Option<&DropoutMask>) -> Result<Trace> {
    if x.len() != params.arch.input {
        return Err(Error::Contract(format!(
            "network expects {} inputs, got {}",
            params.arch.input,
            x.len()
        )));
    }
    if let Some(m) = mask {
        m.check(&params.arch)?;
    }
    let spans = spans(&params.arch);
    let (last, hidden) = spans.split_last().expect("at least one layer");
    let mut layer_inputs = Vec::with_capacity(spans.len());
    let mut pre_activations = Vec::with_capacity(hidden.len());
    let mut h = x.to_vec();
    for (l, span) in hidden.iter().enumerate() {
        let pre = dense(&params.theta, span, &h);
        let mut act: Vec<f64> = pre.iter().map(|&z| z.max(0.0)).collect();
        if let Some(m) = mask {
            for (a, k) in act.iter_mut().zip(&m.layers[l]) {
                *a *= k;
            }
        }
        layer_inputs.push(std::mem::replace(&mut h, act));
        pre_activations.push(pre);
    }
    let logits = dense(&params.theta, last, &h);
    layer_inputs.push(h);
    Ok(Trace {
        layer_inputs,
        pre_activations,
        output: softmax(&logits),
    })
}

/// Demand vector for features `x`. Without a mask every unit is kept unscaled.
pub fn forward(params: &NetworkParams, x: &FeatureVector, mask: Option<&DropoutMask>) -> Result<DemandVector> {
    let trace = forward_trace(params, x.values(), mask)?;
    DemandVector::normalized(trace.output)
}

/// Thompson step: draw one sub-network and act greedily under it. Returns the demand and
/// the seed that regenerates the mask.
pub fn thompson_sample_demand<R: RngCore + ?Sized>(
    params: &NetworkParams,
    x: &FeatureVector,
    rng: &mut R,
) -> Result<(DemandVector, u64)> {
    let mask_seed = rng.next_u64();
    let mask = DropoutMask::from_seed(params, mask_seed);
    Ok((forward(params, x, Some(&mask))?, mask_seed))
}

/// `sigmoid(w . v + b)`.
pub fn predict_adoption(w: &DemandVector, perf_norm: &KpiVector, bias: f64) -> f64 {
    sigmoid(w.dot(perf_norm) + bias)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<f64>);

fn example_probability(params: &NetworkParams, trace: &Trace, ex: &TrainingExample) -> f64 {
    let s: f64 = trace
        .output
        .iter()
        .zip(ex.perf_norm.values())
        .map(|(w, v)| w * v)
        .sum::<f64>()
        + params.adoption_bias();
    sigmoid(s)
}

fn cross_entropy(p: f64, label: bool) -> f64 {
    let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    if label {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Mean binary cross-entropy of the adoption head, example `i` run under `masks[i]`.
pub fn loss<E: std::borrow::Borrow<TrainingExample>>(
    batch: &[E],
    params: &NetworkParams,
    masks: &[DropoutMask],
) -> Result<f64> {
    Ok(loss_and_gradients(batch, params, masks)?.0)
}

/// Exact gradients of [`loss`]. The performance report is an input, not a parameter.
pub fn backward<E: std::borrow::Borrow<TrainingExample>>(
    batch: &[E],
    params: &NetworkParams,
    masks: &[DropoutMask],
) -> Result<Gradients> {
    Ok(loss_and_gradients(batch, params, masks)?.1)
}

pub fn loss_and_gradients<E: std::borrow::Borrow<TrainingExample>>(
    batch: &[E],
    params: &NetworkParams,
    masks: &[DropoutMask],
) -> Result<(f64, Gradients)> {
    let examples: Vec<&TrainingExample> = batch.iter().map(|e| e.borrow()).collect();
    check_batch(&examples, masks)?;
    let n = examples.len() as f64;
    let spans = spans(&params.arch);
    let mut grad = vec![0.0; params.theta.len()];
    let bias_index = grad.len() - 1;
    let mut total = 0.0;

    for (ex, mask) in examples.iter().zip(masks) {
        let trace = forward_trace(params, ex.features.values(), Some(mask))?;
        let p = example_probability(params, &trace, ex);
        total += cross_entropy(p, ex.label);

        // The clamp is flat outside [PROB_CLAMP, 1 - PROB_CLAMP].
        let d_logit = if (PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p) {
            (p - if ex.label { 1.0 } else { 0.0 }) / n
        } else {
            0.0
        };
        grad[bias_index] += d_logit;

        let w = trace.output;
        let v = ex.perf_norm.values();
        let g_w: [f64; N_KPI] = std::array::from_fn(|k| d_logit * v[k]);
        let inner: f64 = w.iter().zip(&g_w).map(|(a, b)| a * b).sum();
        let mut delta: Vec<f64> = (0..N_KPI).map(|j| w[j] * (g_w[j] - inner)).collect();

        for l in (0..spans.len()).rev() {
            let span = &spans[l];
            let input = &trace.layer_inputs[l];
            for o in 0..span.fan_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = span.weights.start + o * span.fan_in;
                for (g, x) in grad[row..row + span.fan_in].iter_mut().zip(input) {
                    *g += d * x;
                }
                grad[span.bias.start + o] += d;
            }
            if l == 0 {
                break;
            }
            // Back through W_l, the mask and the relu of hidden layer l - 1.
            let w_l = &params.theta[span.weights.clone()];
            let pre = &trace.pre_activations[l - 1];
            let keep = &mask.layers[l - 1];
            delta = (0..span.fan_in)
                .map(|i| {
                    if pre[i] <= 0.0 || keep[i] == 0.0 {
                        return 0.0;
                    }
                    let back: f64 = (0..span.fan_out)
                        .map(|o| w_l[o * span.fan_in + i] * delta[o])
                        .sum();
                    back * keep[i]
                })
                .collect();
        }
    }
    Ok((total / n, Gradients(grad)))
}

fn check_batch(batch: &[&TrainingExample], masks: &[DropoutMask]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Contract("loss needs a nonempty batch".into()));
    }
    if masks.len() != batch.len() {
        return Err(Error::Contract(format!(
            "{} masks for {} examples",
            masks.len(),
            batch.len()
        )));
    }
    Ok(())
}
