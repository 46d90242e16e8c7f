use lse_rates::cost_model::{group_lambda, group_lambda_of};
use lse_rates::fractional_solver::{
    brute_force_min_lambda, feasibility_test, lambda_curve, solve_min_lambda, DEFAULT_GAMMA,
};
use lse_rates::{CostStats, SelectionVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GAMMA: f64 = DEFAULT_GAMMA;

/// Dinkelbach iteration: lambda <- ratio of the m smallest t - lambda w.
/// Terminates exactly in finitely many steps; an oracle independent of the
/// bisection bracket logic.
fn dinkelbach(t: &[f64], w: &[f64], m: usize) -> f64 {
    let mut lambda = t.iter().zip(w).map(|(t, w)| t / w).fold(f64::INFINITY, f64::min);
    for _ in 0..1000 {
        let mut order: Vec<usize> = (0..t.len()).collect();
        order.sort_by(|&a, &b| (t[a] - lambda * w[a]).partial_cmp(&(t[b] - lambda * w[b])).unwrap());
        let pick = &order[..m];
        let next = pick.iter().map(|&i| t[i]).sum::<f64>() / pick.iter().map(|&i| w[i]).sum::<f64>();
        if (next - lambda).abs() <= 1e-13 * lambda.abs() {
            return next;
        }
        lambda = next;
    }
    panic!("no convergence");
}

fn stats_strategy(max_n: usize) -> impl Strategy<Value = CostStats> {
    (1..=max_n)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(0.5f64..5.0, n),
                prop::collection::vec(0.1f64..100.0, n),
            )
        })
        .prop_map(|(ratio, w)| {
            let t = ratio.iter().zip(&w).map(|(r, w)| r * w).collect();
            CostStats::new(t, w).unwrap()
        })
}

fn with_size(max_n: usize) -> impl Strategy<Value = (CostStats, usize)> {
    stats_strategy(max_n).prop_flat_map(|s| {
        let n = s.len();
        (Just(s), 1..=n)
    })
}

proptest! {
    #[test]
    fn matches_exhaustive_search((stats, m) in with_size(10)) {
        let solved = solve_min_lambda(&stats, m, GAMMA).unwrap();
        let exact = brute_force_min_lambda(&stats, m).unwrap();
        prop_assert!((solved.lambda_star - exact.lambda_star).abs() <= 2.0 * GAMMA);
        prop_assert!(solved.lambda_star >= exact.lambda_star - 1e-12);
        prop_assert_eq!(solved.selection.cardinality(), m);
        prop_assert!(solved.certificate(&stats) <= 0.0);
    }

    #[test]
    fn transition_point((stats, m) in with_size(30)) {
        let solved = solve_min_lambda(&stats, m, GAMMA).unwrap();
        prop_assert!(feasibility_test(&stats, solved.lambda_star + 2.0 * GAMMA, m).unwrap().is_some());
        prop_assert!(feasibility_test(&stats, solved.lambda_star - 2.0 * GAMMA, m).unwrap().is_none());
    }

    #[test]
    fn iteration_bound((stats, m) in with_size(30)) {
        let solved = solve_min_lambda(&stats, m, GAMMA).unwrap();
        let ratios: Vec<f64> = (0..stats.len()).map(|i| stats.ratio(i)).collect();
        let spread = ratios.iter().cloned().fold(f64::MIN, f64::max) - ratios.iter().cloned().fold(f64::MAX, f64::min);
        let bound = if spread > GAMMA { (spread / GAMMA).log2().ceil() as usize + 1 } else { 0 };
        prop_assert!(solved.iterations <= bound, "{} > {}", solved.iterations, bound);
    }

    #[test]
    fn agrees_with_dinkelbach((stats, m) in with_size(200)) {
        let solved = solve_min_lambda(&stats, m, GAMMA).unwrap();
        let exact = dinkelbach(stats.t(), stats.w(), m);
        prop_assert!((solved.lambda_star - exact).abs() <= 2.0 * GAMMA, "{} vs {}", solved.lambda_star, exact);
    }

    #[test]
    fn price_scaling((stats, m) in with_size(40), c in 0.1f64..10.0) {
        let base = solve_min_lambda(&stats, m, GAMMA).unwrap();
        let scaled = solve_min_lambda(&stats.scale_prices(c).unwrap(), m, GAMMA).unwrap();
        // each result is within gamma of its own optimum
        prop_assert!((scaled.lambda_star - c * base.lambda_star).abs() <= GAMMA * (1.0 + c) + 1e-12);
    }

    #[test]
    fn excluded_consumers_are_no_cheaper((stats, m) in with_size(10)) {
        let exact = brute_force_min_lambda(&stats, m).unwrap();
        for j in 0..stats.len() {
            if !exact.selection.contains(j) {
                prop_assert!(stats.ratio(j) >= exact.lambda_star - 1e-12);
            }
        }
    }

    #[test]
    fn curve_is_nondecreasing(stats in stats_strategy(60)) {
        let sizes: Vec<usize> = (1..=stats.len()).collect();
        let curve = lambda_curve(&stats, &sizes, GAMMA).unwrap();
        for pair in curve.windows(2) {
            prop_assert!(pair[1].lambda_star >= pair[0].lambda_star - 2.0 * GAMMA);
        }
    }

    #[test]
    fn group_rate_is_a_weighted_mean(stats in stats_strategy(30), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bits: Vec<bool> = (0..stats.len()).map(|_| rng.random_bool(0.5)).collect();
        prop_assume!(bits.iter().any(|b| *b));
        let u = SelectionVector::new(bits).unwrap();
        let rate = group_lambda(&stats, &u);
        let members = u.indices();
        let lo = members.iter().map(|&i| stats.ratio(i)).fold(f64::INFINITY, f64::min);
        let hi = members.iter().map(|&i| stats.ratio(i)).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(rate >= lo * (1.0 - 1e-12) && rate <= hi * (1.0 + 1e-12));
        prop_assert_eq!(rate, group_lambda_of(&stats, &members));
    }
}

#[test]
fn identical_ratios_take_the_first_members() {
    let stats = CostStats::new(vec![2.0, 4.0, 6.0, 8.0], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let r = solve_min_lambda(&stats, 2, GAMMA).unwrap();
    assert_eq!(r.selection.indices(), vec![0, 1]);
    assert_eq!(r.iterations, 0);
    assert!((r.lambda_star - 2.0).abs() <= GAMMA);
    assert!(r.certificate(&stats) <= 0.0);
}

#[test]
fn endpoints() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let w: Vec<f64> = (0..500).map(|_| rng.random_range(1.0..50.0)).collect();
    let t: Vec<f64> = w.iter().map(|w| w * rng.random_range(2.0..4.0)).collect();
    let stats = CostStats::new(t.clone(), w.clone()).unwrap();
    let min_ratio = (0..500).map(|i| stats.ratio(i)).fold(f64::INFINITY, f64::min);
    let average = t.iter().sum::<f64>() / w.iter().sum::<f64>();
    let one = solve_min_lambda(&stats, 1, GAMMA).unwrap();
    let all = solve_min_lambda(&stats, 500, GAMMA).unwrap();
    assert!((one.lambda_star - min_ratio).abs() <= 2.0 * GAMMA);
    assert!((all.lambda_star - average).abs() <= 2.0 * GAMMA);
    assert_eq!(all.selection.cardinality(), 500);
}

#[test]
fn rejects_bad_sizes() {
    let stats = CostStats::new(vec![1.0, 2.0], vec![1.0, 1.0]).unwrap();
    assert!(solve_min_lambda(&stats, 0, GAMMA).is_err());
    assert!(solve_min_lambda(&stats, 3, GAMMA).is_err());
    assert!(solve_min_lambda(&stats, 1, 0.0).is_err());
    assert!(brute_force_min_lambda(&stats, 3).is_err());
}
