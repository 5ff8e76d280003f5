//! Budget-constrained optimal bidding over a replayed log.
//!
//! For a demand vector `w` each impression has value `w . kpi_values` and the optimal
//! bid takes the form "win iff value >= lambda * cost". The oracle sorts impressions by
//! value per cost (ties: lower id first), keeps the longest prefix that fits in the
//! budget, and reports the ratio of the last kept impression as `lambda`. This is the
//! LP relaxation of the 0/1 knapsack with its single fractional item dropped.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::bidlog::{BidLog, Impression, N_KPI};
use crate::error::{Error, Result};
use crate::numeric::{dot3, CompensatedSum};

/// Absolute slack allowed on `spend <= budget`.
pub const BUDGET_TOLERANCE: f64 = 1e-9;

/// Largest log accepted by [`brute_force_oracle`].
pub const BRUTE_FORCE_MAX_IMPRESSIONS: usize = 20;

/// Relative KPI preference; a point on the probability simplex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; N_KPI]", into = "[f64; N_KPI]")]
pub struct DemandVector([f64; N_KPI]);

impl DemandVector {
    /// Simplex membership is checked with this tolerance on the component sum.
    pub const SUM_TOLERANCE: f64 = 1e-9;

    pub fn new(weights: [f64; N_KPI]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Contract(format!(
                "demand weights must be finite and nonnegative: {weights:?}"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::Contract(format!(
                "demand weights must sum to 1, got {sum}"
            )));
        }
        Ok(Self(weights))
    }

    /// Rescales a nonnegative vector onto the simplex.
    pub fn normalized(weights: [f64; N_KPI]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Contract(format!(
                "demand weights must be finite and nonnegative: {weights:?}"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::Contract("demand weights are all zero".into()));
        }
        Ok(Self(weights.map(|w| w / sum)))
    }

    /// Pure demand for a single KPI.
    pub fn unit(kpi: usize) -> Self {
        assert!(kpi < N_KPI, "KPI index {kpi} out of range");
        let mut w = [0.0; N_KPI];
        w[kpi] = 1.0;
        Self(w)
    }

    pub fn uniform() -> Self {
        Self([1.0 / N_KPI as f64; N_KPI])
    }

    pub fn weights(&self) -> &[f64; N_KPI] {
        &self.0
    }

    pub fn dot(&self, perf: &KpiVector) -> f64 {
        dot3(&self.0, &perf.0)
    }
}

impl TryFrom<[f64; N_KPI]> for DemandVector {
    type Error = Error;

    fn try_from(value: [f64; N_KPI]) -> Result<Self> {
        Self::new(value)
    }
}

impl From<DemandVector> for [f64; N_KPI] {
    fn from(value: DemandVector) -> Self {
        value.0
    }
}

/// Performance report over the KPIs (page views, expected clicks, expected GMV).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KpiVector(pub [f64; N_KPI]);

impl KpiVector {
    pub fn values(&self) -> &[f64; N_KPI] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiddingOutcome {
    pub performance: KpiVector,
    pub spend: f64,
    /// Value-per-cost threshold of the last won impression (0 when nothing or everything is won).
    pub lambda: f64,
    pub won_count: usize,
    /// Won impression ids in the order they were admitted.
    pub winners: Vec<usize>,
}

impl BiddingOutcome {
    fn empty() -> Self {
        Self {
            performance: KpiVector::default(),
            spend: 0.0,
            lambda: 0.0,
            won_count: 0,
            winners: Vec::new(),
        }
    }
}

/// Value of a single impression to an advertiser with demand `w`.
pub fn impression_utility(w: &DemandVector, imp: &Impression) -> f64 {
    dot3(w.weights(), &imp.kpi_values)
}

fn check_budget(budget: f64) -> Result<()> {
    if budget.is_finite() && budget > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("budget must be positive and finite, got {budget}")))
    }
}

/// Impression indices sorted by value per cost, best first, ties by lower id.
fn ratio_order(weights: &[f64; N_KPI], log: &BidLog) -> (Vec<usize>, Vec<f64>) {
    let ratios: Vec<f64> = log
        .impressions()
        .iter()
        .map(|imp| dot3(weights, &imp.kpi_values) / imp.cost)
        .collect();
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| match ratios[b].total_cmp(&ratios[a]) {
        Ordering::Equal => a.cmp(&b),
        o => o,
    });
    (order, ratios)
}

fn outcome_from_prefix(log: &BidLog, order: &[usize], ratios: &[f64], take: usize) -> BiddingOutcome {
    let imps = log.impressions();
    let mut perf = [CompensatedSum::new(); N_KPI];
    let mut spend = CompensatedSum::new();
    for &i in &order[..take] {
        spend.add(imps[i].cost);
        for (acc, v) in perf.iter_mut().zip(imps[i].kpi_values) {
            acc.add(v);
        }
    }
    let lambda = if take == 0 || take == order.len() {
        0.0
    } else {
        ratios[order[take - 1]]
    };
    BiddingOutcome {
        performance: KpiVector(perf.map(|s| s.value())),
        spend: spend.value(),
        lambda,
        won_count: take,
        winners: order[..take].to_vec(),
    }
}

/// Optimal threshold bidding for `w` under `budget`.
pub fn simulate_bidding(w: &DemandVector, budget: f64, log: &BidLog) -> Result<BiddingOutcome> {
    simulate_bidding_weights(w.weights(), budget, log)
}

/// Same as [`simulate_bidding`] for any nonnegative weight vector; the winning set only
/// depends on the direction of `weights`.
pub fn simulate_bidding_weights(
    weights: &[f64; N_KPI],
    budget: f64,
    log: &BidLog,
) -> Result<BiddingOutcome> {
    check_budget(budget)?;
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::Contract(format!(
            "demand weights must be finite and nonnegative: {weights:?}"
        )));
    }
    if log.is_empty() {
        return Ok(BiddingOutcome::empty());
    }
    let (order, ratios) = ratio_order(weights, log);
    let imps = log.impressions();
    let mut spend = CompensatedSum::new();
    let mut take = 0;
    for &i in &order {
        let mut next = spend;
        next.add(imps[i].cost);
        if next.value() > budget + BUDGET_TOLERANCE {
            break;
        }
        spend = next;
        take += 1;
    }
    Ok(outcome_from_prefix(log, &order, &ratios, take))
}

/// Exact 0/1-knapsack optimum by enumerating every subset. Test oracle for small logs.
pub fn brute_force_oracle(w: &DemandVector, budget: f64, log: &BidLog) -> Result<BiddingOutcome> {
    check_budget(budget)?;
    let n = log.len();
    if n > BRUTE_FORCE_MAX_IMPRESSIONS {
        return Err(Error::Contract(format!(
            "brute-force oracle handles at most {BRUTE_FORCE_MAX_IMPRESSIONS} impressions, got {n}"
        )));
    }
    let imps = log.impressions();
    let utils: Vec<f64> = imps.iter().map(|imp| impression_utility(w, imp)).collect();
    let mut best_mask = 0u32;
    let mut best_value = 0.0;
    for mask in 1u32..(1u32 << n) {
        let (mut cost, mut value) = (0.0, 0.0);
        for i in 0..n {
            if mask & (1 << i) != 0 {
                cost += imps[i].cost;
                value += utils[i];
            }
        }
        if cost <= budget + BUDGET_TOLERANCE && value > best_value {
            best_value = value;
            best_mask = mask;
        }
    }
    let winners: Vec<usize> = (0..n).filter(|i| best_mask & (1 << i) != 0).collect();
    let mut perf = [0.0; N_KPI];
    let mut spend = 0.0;
    for &i in &winners {
        spend += imps[i].cost;
        for (p, v) in perf.iter_mut().zip(imps[i].kpi_values) {
            *p += v;
        }
    }
    Ok(BiddingOutcome {
        performance: KpiVector(perf),
        spend,
        lambda: 0.0,
        won_count: winners.len(),
        winners,
    })
}

/// KPI matrix for the pure demands `e_1..e_n` (rows) with every column divided by its
/// maximum, so the best row for each KPI reads 1.0.
pub fn pure_demand_table(log: &BidLog, budget: f64) -> Result<[[f64; N_KPI]; N_KPI]> {
    let mut table = [[0.0; N_KPI]; N_KPI];
    for (k, row) in table.iter_mut().enumerate() {
        *row = simulate_bidding(&DemandVector::unit(k), budget, log)?.performance.0;
    }
    for col in 0..N_KPI {
        let max = table.iter().map(|r| r[col]).fold(0.0, f64::max);
        if max > 0.0 {
            for row in table.iter_mut() {
                row[col] /= max;
            }
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bidlog::{generate_log, LogGenParams};

    fn hand_log(items: &[(f64, f64)]) -> BidLog {
        // (ctr, cost) with cvr = price = 0 so only PV and clicks matter.
        let imps = items
            .iter()
            .enumerate()
            .map(|(i, &(ctr, cost))| Impression::new(i, ctr, 0.0, 0.0, cost).unwrap())
            .collect();
        BidLog::from_impressions(imps, 0, LogGenParams::default()).unwrap()
    }

    #[test]
    fn utility_examples() {
        let imp = Impression::new(0, 0.05, 0.1, 20.0, 1.0).unwrap();
        assert_eq!(impression_utility(&DemandVector::unit(0), &imp), 1.0);
        assert_eq!(impression_utility(&DemandVector::unit(1), &imp), 0.05);
        let imp = Impression::new(0, 0.04, 0.1, 20.0, 1.0).unwrap();
        let half = DemandVector::new([0.5, 0.5, 0.0]).unwrap();
        assert!((impression_utility(&half, &imp) - 0.52).abs() < 1e-15);
    }

    #[test]
    fn whole_log_won_with_full_budget() {
        let log = generate_log(&LogGenParams::with_impressions(2_000), 9).unwrap();
        let budget = log.total_cost();
        for w in [DemandVector::unit(0), DemandVector::unit(2), DemandVector::uniform()] {
            let out = simulate_bidding(&w, budget, &log).unwrap();
            assert_eq!(out.won_count, log.len());
            assert_eq!(out.performance.0[0], log.len() as f64);
            assert_eq!(out.lambda, 0.0);
        }
    }

    #[test]
    fn nothing_won_below_cheapest_cost() {
        let log = generate_log(&LogGenParams::with_impressions(100), 2).unwrap();
        let cheapest = log.impressions().iter().map(|i| i.cost).fold(f64::INFINITY, f64::min);
        let out = simulate_bidding(&DemandVector::uniform(), cheapest * 0.5, &log).unwrap();
        assert_eq!(out.won_count, 0);
        assert_eq!(out.spend, 0.0);
        assert_eq!(out.lambda, 0.0);
    }

    #[test]
    fn rejects_nonpositive_budget() {
        let log = generate_log(&LogGenParams::with_impressions(10), 2).unwrap();
        for b in [0.0, -1.0, f64::NAN] {
            assert!(matches!(
                simulate_bidding(&DemandVector::uniform(), b, &log),
                Err(Error::Config(_))
            ));
        }
    }

    #[test]
    fn empty_log_gives_empty_outcome() {
        let log = BidLog::from_impressions(Vec::new(), 0, LogGenParams::default()).unwrap();
        let out = simulate_bidding(&DemandVector::uniform(), 10.0, &log).unwrap();
        assert_eq!(out.won_count, 0);
        assert_eq!(out.performance, KpiVector::default());
    }

    #[test]
    fn ties_break_towards_lower_id() {
        let log = hand_log(&[(0.1, 1.0), (0.1, 1.0), (0.1, 1.0)]);
        let out = simulate_bidding(&DemandVector::unit(0), 2.0, &log).unwrap();
        assert_eq!(out.winners, vec![0, 1]);
        assert_eq!(out.lambda, 1.0);
    }

    fn gmv_log(items: &[(f64, f64)]) -> BidLog {
        // (utility, cost) through the GMV slot: ctr = cvr = 1, price = utility.
        let imps = items
            .iter()
            .enumerate()
            .map(|(i, &(u, cost))| Impression::new(i, 1.0, 1.0, u, cost).unwrap())
            .collect();
        BidLog::from_impressions(imps, 0, LogGenParams::default()).unwrap()
    }

    #[test]
    fn oracle_never_below_greedy_on_hand_instances() {
        let gmv = DemandVector::unit(2);
        // Costs {9, 10}, utilities {10, 12}, budget 10: 12/10 > 10/9 so the ratio order
        // already starts with the optimal item.
        let log = gmv_log(&[(10.0, 9.0), (12.0, 10.0)]);
        let greedy = simulate_bidding(&gmv, 10.0, &log).unwrap();
        let exact = brute_force_oracle(&gmv, 10.0, &log).unwrap();
        assert_eq!(greedy.winners, vec![1]);
        assert_eq!(exact.winners, vec![1]);

        // Costs {1, 10}, utilities {2, 12}, budget 10: the cheap item blocks the prefix.
        let log = gmv_log(&[(2.0, 1.0), (12.0, 10.0)]);
        let greedy = simulate_bidding(&gmv, 10.0, &log).unwrap();
        let exact = brute_force_oracle(&gmv, 10.0, &log).unwrap();
        assert_eq!(greedy.winners, vec![0]);
        assert_eq!(exact.winners, vec![1]);
        assert_eq!(gmv.dot(&greedy.performance), 2.0);
        assert_eq!(gmv.dot(&exact.performance), 12.0);
        assert_eq!(greedy.lambda, 2.0);
    }

    #[test]
    fn brute_force_single_and_empty() {
        let log = hand_log(&[(0.2, 3.0)]);
        let out = brute_force_oracle(&DemandVector::unit(1), 3.0, &log).unwrap();
        assert_eq!(out.winners, vec![0]);
        let out = brute_force_oracle(&DemandVector::unit(1), 3.0 - 1e-6, &log).unwrap();
        assert!(out.winners.is_empty());
    }

    #[test]
    fn brute_force_refuses_large_logs() {
        let log = generate_log(&LogGenParams::with_impressions(21), 0).unwrap();
        assert!(matches!(
            brute_force_oracle(&DemandVector::uniform(), 1.0, &log),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn demand_vector_validation() {
        assert!(DemandVector::new([0.5, 0.5, 0.0]).is_ok());
        assert!(DemandVector::new([0.5, 0.6, 0.0]).is_err());
        assert!(DemandVector::new([-0.1, 0.6, 0.5]).is_err());
        let w = DemandVector::normalized([2.0, 1.0, 1.0]).unwrap();
        assert_eq!(w.weights(), &[0.5, 0.25, 0.25]);
        assert!(DemandVector::normalized([0.0; 3]).is_err());
        let json = serde_json::to_string(&w).unwrap();
        assert_eq!(serde_json::from_str::<DemandVector>(&json).unwrap(), w);
        assert!(serde_json::from_str::<DemandVector>("[0.9, 0.9, 0.0]").is_err());
    }

    #[test]
    fn pure_demands_dominate_their_own_kpi() {
        let log = generate_log(&LogGenParams::with_impressions(3_000), 4).unwrap();
        let table = pure_demand_table(&log, 0.1 * log.total_cost()).unwrap();
        for (k, row) in table.iter().enumerate() {
            assert_eq!(row[k], 1.0);
        }
    }
}
