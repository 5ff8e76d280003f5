#![allow(dead_code)]

use rand::Rng;

use demand_bandit::agent::{DropoutMask, NetworkParams, TrainingExample};
use demand_bandit::bidding::{impression_utility, DemandVector};
use demand_bandit::bidlog::{BidLog, Impression, LogGenParams};

/// Small log with costs and KPI values spread over a few orders of magnitude.
pub fn random_log<R: Rng>(rng: &mut R, n: usize) -> BidLog {
    let imps = (0..n)
        .map(|id| {
            Impression::new(
                id,
                rng.random_range(0.001..0.3),
                rng.random_range(0.001..0.5),
                rng.random_range(1.0..500.0),
                rng.random_range(0.05..20.0),
            )
            .unwrap()
        })
        .collect();
    BidLog::from_impressions(imps, 0, LogGenParams::with_impressions(n)).unwrap()
}

pub fn random_demand<R: Rng>(rng: &mut R) -> DemandVector {
    DemandVector::normalized([rng.random(), rng.random(), rng.random::<f64>() + 1e-9]).unwrap()
}

pub fn total_utility(w: &DemandVector, log: &BidLog, winners: &[usize]) -> f64 {
    winners.iter().map(|&i| impression_utility(w, &log.impressions()[i])).sum()
}

/// Exhaustive search over every prefix of the value-per-cost order (ties by lower id):
/// returns the ids of the best prefix whose cost fits in the budget.
pub fn best_feasible_prefix(w: &DemandVector, budget: f64, log: &BidLog) -> Vec<usize> {
    let imps = log.impressions();
    let mut order: Vec<usize> = (0..imps.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = impression_utility(w, &imps[a]) / imps[a].cost;
        let rb = impression_utility(w, &imps[b]) / imps[b].cost;
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    let mut best = (0.0, 0);
    for k in 0..=order.len() {
        let cost: f64 = order[..k].iter().map(|&i| imps[i].cost).sum();
        if cost > budget + 1e-9 {
            continue;
        }
        let value = total_utility(w, log, &order[..k]);
        if value > best.0 {
            best = (value, k);
        }
    }
    order[..best.1].to_vec()
}

/// Welford's running variance (sample, n - 1); exactly zero for identical inputs.
pub fn sample_variance(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for x in xs {
        n += 1.0;
        let delta = x - mean;
        mean += delta / n;
        m2 += delta * (x - mean);
    }
    m2 / (n - 1.0)
}

/// Straightforward re-implementation of the adoption loss from the published tensor
/// layout: dense layers `W x + b` (W stored row-major, rows = outputs), ReLU then mask on
/// hidden layers, softmax output, `sigmoid(w . v + b_adopt)`, clamped cross-entropy.
pub fn reference_loss(params: &NetworkParams, batch: &[TrainingExample], masks: &[DropoutMask]) -> f64 {
    let tensors = params.tensors();
    let n_layers = (tensors.len() - 1) / 2;
    let b_adopt = tensors.last().unwrap().3[0];
    let mut total = 0.0;
    for (ex, mask) in batch.iter().zip(masks) {
        let mut h: Vec<f64> = ex.features.values().to_vec();
        for l in 0..n_layers {
            let (_, rows, cols, w) = &tensors[2 * l];
            let b = tensors[2 * l + 1].3;
            let mut z: Vec<f64> = (0..*rows)
                .map(|r| (0..*cols).map(|c| w[r * cols + c] * h[c]).sum::<f64>() + b[r])
                .collect();
            if l + 1 < n_layers {
                for (j, zj) in z.iter_mut().enumerate() {
                    *zj = zj.max(0.0) * mask.layers()[l][j];
                }
            }
            h = z;
        }
        let m = h.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = h.iter().map(|z| (z - m).exp()).collect();
        let s: f64 = e.iter().sum();
        let logit: f64 = e.iter().zip(ex.perf_norm.values()).map(|(ei, v)| ei / s * v).sum::<f64>() + b_adopt;
        let p = (1.0 / (1.0 + (-logit).exp())).clamp(1e-12, 1.0 - 1e-12);
        total += if ex.label { -p.ln() } else { -(1.0 - p).ln() };
    }
    total / batch.len() as f64
}
