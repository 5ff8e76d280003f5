//! Simulated advertisers.
//!
//! Each ad unit has a budget and a latent demand `w* = A c`, where the columns of `A`
//! are typical demand vectors and `c` mixes them. The agent observes `A`, `c` and the
//! budget, never `w*`. Adoption of a recommended performance report `v'` follows a
//! conditional logit against a constant null option:
//!
//! ```text
//! g = max((w*.v - w*.v') / w*.v, eps_gap)
//! u = min(alpha / g, u_cap)
//! P(adopt) = e^u / (e^u + c_null)
//! ```
//!
//! where `v` is the unit's optimal performance under its own demand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::bidding::{impression_utility, simulate_bidding, DemandVector, KpiVector};
use crate::bidlog::{BidLog, N_KPI};
use crate::error::{Error, Result};
use crate::numeric::sigmoid_open;

/// Floor on the optimal objective when forming the relative gap.
const TINY_VALUE: f64 = 1e-300;

/// Uniform draw from the `m`-dimensional simplex (flat Dirichlet).
pub fn sample_simplex<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<f64> {
    let draws: Vec<f64> = (0..m).map(|_| Exp1.sample(rng)).collect();
    let sum: f64 = draws.iter().sum();
    draws.into_iter().map(|x| x / sum).collect()
}

/// Typical demand vectors stacked as the columns of an `N_KPI x m` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandBasis {
    columns: Vec<DemandVector>,
}

impl DemandBasis {
    pub fn new(columns: Vec<DemandVector>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::Config("demand basis needs at least one column".into()));
        }
        Ok(Self { columns })
    }

    pub fn identity() -> Self {
        Self {
            columns: (0..N_KPI).map(DemandVector::unit).collect(),
        }
    }

    /// `m` columns drawn uniformly from the simplex.
    pub fn random<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<Self> {
        if m == 0 {
            return Err(Error::Config("random basis needs m >= 1".into()));
        }
        let columns = (0..m)
            .map(|_| {
                let c = sample_simplex(N_KPI, rng);
                DemandVector::normalized([c[0], c[1], c[2]])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { columns })
    }

    pub fn m(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[DemandVector] {
        &self.columns
    }

    /// Row-major `N_KPI x m` entries, the layout the agent sees.
    pub fn flattened(&self) -> Vec<f64> {
        (0..N_KPI)
            .flat_map(|row| self.columns.iter().map(move |col| col.weights()[row]))
            .collect()
    }

    /// `A c` for a mixing vector `c` on the `m`-simplex.
    pub fn combine(&self, c: &[f64]) -> Result<DemandVector> {
        if c.len() != self.m() {
            return Err(Error::Contract(format!(
                "mixing vector has {} entries, basis has {} columns",
                c.len(),
                self.m()
            )));
        }
        let mut w = [0.0; N_KPI];
        for (col, &weight) in self.columns.iter().zip(c) {
            for (acc, x) in w.iter_mut().zip(col.weights()) {
                *acc += weight * x;
            }
        }
        DemandVector::normalized(w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdoptionModelParams {
    /// Utility scale.
    pub alpha: f64,
    /// Weight of the reject option, `e^{u_null}`.
    pub c_null: f64,
    /// Floor on the relative utility gap.
    pub eps_gap: f64,
    /// Ceiling on the utility.
    pub u_cap: f64,
}

impl Default for AdoptionModelParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            c_null: 20.0,
            eps_gap: 0.01,
            u_cap: 50.0,
        }
    }
}

impl AdoptionModelParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("c_null", self.c_null),
            ("eps_gap", self.eps_gap),
            ("u_cap", self.u_cap),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!(
                    "adoption parameter {name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.eps_gap >= 1.0 {
            return Err(Error::Config(format!(
                "eps_gap must be below 1, got {}",
                self.eps_gap
            )));
        }
        Ok(())
    }

    /// Adoption probability for a given relative gap. Nonincreasing in `gap`, strictly
    /// inside (0, 1).
    pub fn probability_for_gap(&self, gap: f64) -> f64 {
        let g = if gap.is_nan() { 1.0 } else { gap.max(self.eps_gap) };
        let u = (self.alpha / g).min(self.u_cap);
        // e^u / (e^u + C) == sigmoid(u - ln C)
        sigmoid_open(u - self.c_null.ln())
    }

    /// Adoption probability of the unit's own optimal strategy.
    pub fn optimal_probability(&self) -> f64 {
        self.probability_for_gap(0.0)
    }
}

/// `(w*.v - w*.v') / w*.v`, the relative utility lost by the recommendation.
pub fn relative_gap(optimal_value: f64, recommended_value: f64) -> f64 {
    (optimal_value - recommended_value) / optimal_value.max(TINY_VALUE)
}

/// General conditional-logit choice probabilities `e^{u_j} / sum_l e^{u_l}`.
pub fn conditional_logit(utilities: &[f64]) -> Vec<f64> {
    let max = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = utilities.iter().map(|u| (u - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub demand: DemandVector,
    pub adopted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdUnit {
    pub unit_id: usize,
    pub budget: f64,
    pub feature_c: Vec<f64>,
    true_demand: DemandVector,
    opt_performance: KpiVector,
    max_impression_value: f64,
    pub adoption_history: Vec<HistoryEntry>,
}

impl AdUnit {
    pub fn new(
        unit_id: usize,
        budget: f64,
        feature_c: Vec<f64>,
        basis: &DemandBasis,
        log: &BidLog,
    ) -> Result<Self> {
        if !(budget.is_finite() && budget > 0.0) {
            return Err(Error::Config(format!("unit budget must be positive, got {budget}")));
        }
        let true_demand = basis.combine(&feature_c)?;
        let opt_performance = simulate_bidding(&true_demand, budget, log)?.performance;
        let max_impression_value = log
            .impressions()
            .iter()
            .map(|imp| impression_utility(&true_demand, imp))
            .fold(0.0, f64::max);
        Ok(Self {
            unit_id,
            budget,
            feature_c,
            true_demand,
            opt_performance,
            max_impression_value,
            adoption_history: Vec::new(),
        })
    }

    /// Latent demand. Hidden from the agent; exposed for oracle baselines and tests.
    pub fn true_demand(&self) -> &DemandVector {
        &self.true_demand
    }

    pub fn opt_performance(&self) -> &KpiVector {
        &self.opt_performance
    }

    pub fn optimal_value(&self) -> f64 {
        self.true_demand.dot(&self.opt_performance)
    }
}

/// What the recommender can see about a unit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitObservation {
    pub unit_id: usize,
    /// Row-major `N_KPI x m` basis.
    pub matrix_a: Vec<f64>,
    pub feature_c: Vec<f64>,
    pub budget: f64,
}

impl UnitObservation {
    pub fn of(unit: &AdUnit, basis: &DemandBasis) -> Self {
        Self {
            unit_id: unit.unit_id,
            matrix_a: basis.flattened(),
            feature_c: unit.feature_c.clone(),
            budget: unit.budget,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvStep {
    pub unit_id: usize,
    pub observed: UnitObservation,
    /// Performance report shown to the advertiser for the recommended demand.
    pub recommended_performance: KpiVector,
    pub adopt_prob_recommended: f64,
    pub adopt_prob_optimal: f64,
    pub reward: bool,
}

/// `k` units with flat-Dirichlet mixing vectors and uniform budgets in `[lo, hi]`.
pub fn generate_units(
    k: usize,
    basis: &DemandBasis,
    budget_range: (f64, f64),
    log: &BidLog,
    seed: u64,
) -> Result<Vec<AdUnit>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_units_with(k, basis, budget_range, |_| Ok(log), &mut rng)
}

pub(crate) fn generate_units_with<'a, F, R>(
    k: usize,
    basis: &DemandBasis,
    budget_range: (f64, f64),
    mut log_for: F,
    rng: &mut R,
) -> Result<Vec<AdUnit>>
where
    F: FnMut(usize) -> Result<&'a BidLog>,
    R: Rng + ?Sized,
{
    let (lo, hi) = budget_range;
    if k == 0 {
        return Err(Error::Config("need at least one ad unit".into()));
    }
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
        return Err(Error::Config(format!(
            "budget range must satisfy 0 < lo <= hi, got ({lo}, {hi})"
        )));
    }
    (0..k)
        .map(|unit_id| {
            let c = sample_simplex(basis.m(), rng);
            let budget = if lo == hi { lo } else { rng.random_range(lo..=hi) };
            AdUnit::new(unit_id, budget, c, basis, log_for(unit_id)?)
        })
        .collect()
}

/// Adoption probability of `recommended_perf` for `unit`.
pub fn adoption_probability(
    unit: &AdUnit,
    recommended_perf: &KpiVector,
    params: &AdoptionModelParams,
) -> f64 {
    let gap = relative_gap(unit.optimal_value(), unit.true_demand.dot(recommended_perf));
    params.probability_for_gap(gap)
}

/// Plays one recommendation against `unit` and records the outcome in its history.
pub fn step<R: Rng + ?Sized>(
    unit: &mut AdUnit,
    basis: &DemandBasis,
    recommended: &DemandVector,
    log: &BidLog,
    params: &AdoptionModelParams,
    rng: &mut R,
) -> Result<EnvStep> {
    let outcome = simulate_bidding(recommended, unit.budget, log)?;
    let recommended_value = unit.true_demand.dot(&outcome.performance);
    // The greedy prefix for w* is within one impression of the LP bound, so no strategy
    // can beat it by more than the best single-impression value.
    let slack = unit.max_impression_value;
    if recommended_value > unit.optimal_value() + slack + 1e-9 {
        return Err(Error::Invariant(format!(
            "unit {}: recommended value {recommended_value} exceeds the LP bound {}",
            unit.unit_id,
            unit.optimal_value() + slack
        )));
    }
    let p_rec = adoption_probability(unit, &outcome.performance, params);
    let p_opt = params.optimal_probability();
    let reward = rng.random::<f64>() < p_rec;
    unit.adoption_history.push(HistoryEntry {
        demand: *recommended,
        adopted: reward,
    });
    Ok(EnvStep {
        unit_id: unit.unit_id,
        observed: UnitObservation::of(unit, basis),
        recommended_performance: outcome.performance,
        adopt_prob_recommended: p_rec,
        adopt_prob_optimal: p_opt,
        reward,
    })
}

/// Uniformly random visiting unit.
pub fn sample_visit<R: Rng + ?Sized>(units: &[AdUnit], rng: &mut R) -> Result<usize> {
    if units.is_empty() {
        return Err(Error::Config("no ad units to visit".into()));
    }
    Ok(units[rng.random_range(0..units.len())].unit_id)
}

/// How ad units share bidding logs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogSharing {
    /// Every unit bids over the same log.
    #[default]
    Shared,
    /// Each unit gets its own log drawn with the same parameters.
    PerUnit,
}

/// A population of ad units with their logs and adoption model.
#[derive(Debug, Clone)]
pub struct Environment {
    basis: DemandBasis,
    logs: Vec<BidLog>,
    unit_log: Vec<usize>,
    units: Vec<AdUnit>,
    params: AdoptionModelParams,
}

impl Environment {
    /// All units share `log`.
    pub fn shared(
        basis: DemandBasis,
        log: BidLog,
        k: usize,
        budget_range: (f64, f64),
        params: AdoptionModelParams,
        seed: u64,
    ) -> Result<Self> {
        params.validate()?;
        let units = generate_units(k, &basis, budget_range, &log, seed)?;
        Ok(Self {
            basis,
            logs: vec![log],
            unit_log: vec![0; k],
            units,
            params,
        })
    }

    /// One log per unit, `logs[i]` for unit `i`.
    pub fn per_unit(
        basis: DemandBasis,
        logs: Vec<BidLog>,
        budget_range: (f64, f64),
        params: AdoptionModelParams,
        seed: u64,
    ) -> Result<Self> {
        params.validate()?;
        let k = logs.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let units = generate_units_with(k, &basis, budget_range, |i| Ok(&logs[i]), &mut rng)?;
        Ok(Self {
            basis,
            unit_log: (0..k).collect(),
            logs,
            units,
            params,
        })
    }

    pub fn basis(&self) -> &DemandBasis {
        &self.basis
    }

    pub fn units(&self) -> &[AdUnit] {
        &self.units
    }

    pub fn unit(&self, unit_id: usize) -> &AdUnit {
        &self.units[unit_id]
    }

    pub fn log_for(&self, unit_id: usize) -> &BidLog {
        &self.logs[self.unit_log[unit_id]]
    }

    pub fn params(&self) -> &AdoptionModelParams {
        &self.params
    }

    pub fn visit<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        sample_visit(&self.units, rng)
    }

    pub fn observe(&self, unit_id: usize) -> UnitObservation {
        UnitObservation::of(&self.units[unit_id], &self.basis)
    }

    pub fn step<R: Rng + ?Sized>(
        &mut self,
        unit_id: usize,
        recommended: &DemandVector,
        rng: &mut R,
    ) -> Result<EnvStep> {
        let log = &self.logs[self.unit_log[unit_id]];
        step(
            &mut self.units[unit_id],
            &self.basis,
            recommended,
            log,
            &self.params,
            rng,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bidlog::{generate_log, LogGenParams};

    fn small_log() -> BidLog {
        generate_log(&LogGenParams::with_impressions(2_000), 21).unwrap()
    }

    #[test]
    fn identity_basis_reproduces_mixing_vector() {
        let log = small_log();
        let units = generate_units(20, &DemandBasis::identity(), (50.0, 100.0), &log, 3).unwrap();
        for u in &units {
            for (w, c) in u.true_demand().weights().iter().zip(&u.feature_c) {
                assert!((w - c).abs() < 1e-12);
            }
            assert!((50.0..=100.0).contains(&u.budget));
        }
    }

    #[test]
    fn mixed_basis_product() {
        let basis = DemandBasis::new(vec![
            DemandVector::unit(0),
            DemandVector::unit(1),
            DemandVector::uniform(),
        ])
        .unwrap();
        let w = basis.combine(&[0.0, 0.0, 1.0]).unwrap();
        for x in w.weights() {
            assert!((x - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!(basis.combine(&[1.0, 0.0]).is_err());
        assert_eq!(basis.flattened()[..3], [1.0, 0.0, 1.0 / 3.0]);
    }

    #[test]
    fn unit_generation_is_deterministic_and_validated() {
        let log = small_log();
        let a = generate_units(50, &DemandBasis::identity(), (10.0, 40.0), &log, 8).unwrap();
        let b = generate_units(50, &DemandBasis::identity(), (10.0, 40.0), &log, 8).unwrap();
        assert_eq!(a, b);
        for bad in [(0.0, 1.0), (5.0, 1.0), (-1.0, 2.0)] {
            assert!(matches!(
                generate_units(3, &DemandBasis::identity(), bad, &log, 0),
                Err(Error::Config(_))
            ));
        }
        assert!(generate_units(0, &DemandBasis::identity(), (1.0, 2.0), &log, 0).is_err());
    }

    #[test]
    fn clamp_path_matches_closed_form() {
        let p = AdoptionModelParams::default();
        let expected = 1.0 - 20.0 * (-50.0f64).exp();
        let got = p.optimal_probability();
        assert!((got - expected).abs() < 1e-15);
        assert!(got < 1.0);
    }

    #[test]
    fn half_gap_probability() {
        // e^2 / (e^2 + 20), evaluated with mpmath at 30 digits.
        let p = AdoptionModelParams::default().probability_for_gap(0.5);
        assert!((p - 0.269_781_334_276_033_73).abs() < 1e-12, "{p}");
    }

    #[test]
    fn probability_is_monotone_in_gap() {
        let p = AdoptionModelParams::default();
        let mut last = p.probability_for_gap(0.0);
        for i in 1..=1000 {
            let cur = p.probability_for_gap(i as f64 / 1000.0);
            assert!(cur <= last);
            last = cur;
        }
    }

    #[test]
    fn single_item_logit_matches_general_form() {
        let params = AdoptionModelParams::default();
        for gap in [0.0f64, 0.02, 0.1, 0.3, 0.7, 1.0] {
            let u = (params.alpha / gap.max(params.eps_gap)).min(params.u_cap);
            let general = conditional_logit(&[u, params.c_null.ln()]);
            let direct = params.probability_for_gap(gap);
            assert!((general[0] - direct).abs() < 1e-12, "gap {gap}");
        }
    }

    #[test]
    fn invalid_params_are_rejected() {
        let bad = [
            AdoptionModelParams { alpha: 0.0, ..Default::default() },
            AdoptionModelParams { c_null: -1.0, ..Default::default() },
            AdoptionModelParams { eps_gap: 1.0, ..Default::default() },
            AdoptionModelParams { u_cap: f64::INFINITY, ..Default::default() },
        ];
        for p in bad {
            assert!(p.validate().is_err());
        }
    }

    #[test]
    fn step_with_true_demand_is_optimal() {
        let log = small_log();
        let basis = DemandBasis::identity();
        let mut units = generate_units(5, &basis, (20.0, 60.0), &log, 1).unwrap();
        let params = AdoptionModelParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for unit in units.iter_mut() {
            let w = *unit.true_demand();
            let s = step(unit, &basis, &w, &log, &params, &mut rng).unwrap();
            assert_eq!(s.adopt_prob_recommended, s.adopt_prob_optimal);
            assert_eq!(unit.adoption_history.len(), 1);
            assert_eq!(unit.adoption_history[0].adopted, s.reward);
        }
    }

    #[test]
    fn step_never_beats_optimum_and_is_reproducible() {
        let log = small_log();
        let basis = DemandBasis::identity();
        let params = AdoptionModelParams::default();
        let run = || {
            let mut units = generate_units(4, &basis, (20.0, 60.0), &log, 2).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            let mut rewards = Vec::new();
            for t in 0..200 {
                let c = sample_simplex(3, &mut rng);
                let w = DemandVector::normalized([c[0], c[1], c[2]]).unwrap();
                let s = step(&mut units[t % 4], &basis, &w, &log, &params, &mut rng).unwrap();
                assert!(s.adopt_prob_recommended <= s.adopt_prob_optimal);
                assert!(s.adopt_prob_recommended > 0.0 && s.adopt_prob_recommended < 1.0);
                rewards.push(s.reward);
            }
            rewards
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn observation_hides_latent_state() {
        let log = small_log();
        let env = Environment::shared(
            DemandBasis::identity(),
            log,
            3,
            (10.0, 20.0),
            AdoptionModelParams::default(),
            4,
        )
        .unwrap();
        let obs = serde_json::to_value(env.observe(1)).unwrap();
        let keys: Vec<&str> = obs.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        assert_eq!(keys.len(), 4);
        for k in keys {
            assert!(["unit_id", "matrix_a", "feature_c", "budget"].contains(&k), "{k}");
        }
    }

    #[test]
    fn visits_are_uniform() {
        let log = small_log();
        let units = generate_units(4, &DemandBasis::identity(), (10.0, 20.0), &log, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut counts = [0usize; 4];
        let n = 100_000;
        for _ in 0..n {
            counts[sample_visit(&units, &mut rng).unwrap()] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() < 0.01, "{counts:?}");
        }
        assert!(sample_visit(&[], &mut rng).is_err());
        assert_eq!(sample_visit(&units[..1], &mut rng).unwrap(), 0);
    }
}
