mod common;

use proptest::prelude::*;

use demand_bandit::bidding::{
    brute_force_oracle, impression_utility, simulate_bidding, simulate_bidding_weights, DemandVector,
    BUDGET_TOLERANCE,
};
use demand_bandit::bidlog::{BidLog, Impression, LogGenParams};

use common::{best_feasible_prefix, total_utility};

fn log_strategy(max: usize) -> impl Strategy<Value = BidLog> {
    prop::collection::vec((0.001f64..0.3, 0.001f64..0.5, 1.0f64..500.0, 0.05f64..20.0), 1..=max).prop_map(
        |rows| {
            let imps = rows
                .into_iter()
                .enumerate()
                .map(|(id, (ctr, cvr, price, cost))| Impression::new(id, ctr, cvr, price, cost).unwrap())
                .collect();
            BidLog::from_impressions(imps, 0, LogGenParams::default()).unwrap()
        },
    )
}

fn demand_strategy() -> impl Strategy<Value = DemandVector> {
    (0.0f64..1.0, 0.0f64..1.0, 0.001f64..1.0).prop_map(|(a, b, c)| DemandVector::normalized([a, b, c]).unwrap())
}

fn max_single_utility(w: &DemandVector, log: &BidLog) -> f64 {
    log.impressions().iter().map(|i| impression_utility(w, i)).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn spend_never_exceeds_budget(log in log_strategy(40), w in demand_strategy(), frac in 0.01f64..1.5) {
        let budget = frac * log.total_cost();
        let out = simulate_bidding(&w, budget, &log).unwrap();
        prop_assert!(out.spend <= budget + BUDGET_TOLERANCE);
        let spend: f64 = out.winners.iter().map(|&i| log.impressions()[i].cost).sum();
        prop_assert!((spend - out.spend).abs() <= 1e-9 * spend.max(1.0));
        prop_assert_eq!(out.won_count, out.winners.len());
    }

    #[test]
    fn scaling_the_demand_keeps_the_winning_set(log in log_strategy(40), w in demand_strategy(), k in 0.01f64..100.0, frac in 0.05f64..1.0) {
        let budget = frac * log.total_cost();
        let base = simulate_bidding(&w, budget, &log).unwrap();
        let scaled = simulate_bidding_weights(&w.weights().map(|x| x * k), budget, &log).unwrap();
        prop_assert_eq!(&base.winners, &scaled.winners);
        prop_assert_eq!(base.performance, scaled.performance);
    }

    #[test]
    fn more_budget_never_lowers_the_objective(log in log_strategy(40), w in demand_strategy(), frac in 0.01f64..1.0, extra in 0.0f64..1.0) {
        let b1 = frac * log.total_cost();
        let low = simulate_bidding(&w, b1, &log).unwrap();
        let high = simulate_bidding(&w, b1 * (1.0 + extra), &log).unwrap();
        prop_assert!(w.dot(&high.performance) >= w.dot(&low.performance) - 1e-12);
    }

    #[test]
    fn winners_clear_the_threshold_and_losers_do_not_beat_it(log in log_strategy(40), w in demand_strategy(), frac in 0.05f64..0.9) {
        let budget = frac * log.total_cost();
        let out = simulate_bidding(&w, budget, &log).unwrap();
        if out.won_count == 0 || out.won_count == log.len() {
            prop_assert_eq!(out.lambda, 0.0);
        } else {
            for (i, imp) in log.impressions().iter().enumerate() {
                let ratio = impression_utility(&w, imp) / imp.cost;
                if out.winners.contains(&i) {
                    prop_assert!(ratio >= out.lambda);
                } else {
                    prop_assert!(ratio <= out.lambda);
                }
            }
        }
    }

    #[test]
    fn greedy_is_the_best_prefix_and_within_one_item_of_the_optimum(log in log_strategy(14), w in demand_strategy(), frac in 0.02f64..1.2) {
        let budget = frac * log.total_cost();
        let greedy = simulate_bidding(&w, budget, &log).unwrap();
        let prefix = best_feasible_prefix(&w, budget, &log);
        let g = total_utility(&w, &log, &greedy.winners);
        let p = total_utility(&w, &log, &prefix);
        prop_assert!((g - p).abs() <= 1e-9 * p.max(1.0), "greedy {g} vs best prefix {p}");
        let opt = brute_force_oracle(&w, budget, &log).unwrap();
        let o = w.dot(&opt.performance);
        prop_assert!(o >= g - 1e-9 * o.max(1.0));
        prop_assert!(g >= o - max_single_utility(&w, &log) - 1e-9);
    }
}

#[test]
fn whole_log_budget_wins_everything() {
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(1);
    let log = common::random_log(&mut rng, 30);
    let out = simulate_bidding(&DemandVector::uniform(), log.total_cost() * 1.0001, &log).unwrap();
    assert_eq!(out.won_count, 30);
    assert_eq!(out.lambda, 0.0);
}
