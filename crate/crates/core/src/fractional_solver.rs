//! Minimum-rate subset selection.
//!
//! Minimizes `(u't) / (u'w)` over binary `u` with `|u| = M` by bisection on
//! `lambda`: a given `lambda` is feasible iff the `M` smallest entries of
//! `t - lambda w` sum to at most zero, and feasibility is monotone in `lambda`
//! because every `w_i > 0`.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::{CostStats, SelectionVector};

/// Default bisection tolerance in cents/kWh.
pub const DEFAULT_GAMMA: f64 = 1e-6;

/// Largest number of subsets [`brute_force_min_lambda`] will enumerate.
pub const BRUTE_FORCE_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub lambda_star: f64,
    pub selection: SelectionVector,
    /// Bisection steps taken.
    pub iterations: usize,
    /// Final `(lower, upper)` bracket.
    pub bracket: (f64, f64),
}

impl SolveResult {
    /// `(t - lambda* w)' u`, nonpositive for a valid result.
    pub fn certificate(&self, stats: &CostStats) -> f64 {
        certificate(stats, self.lambda_star, &self.selection.indices())
    }
}

/// A point of the minimum-rate curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub m: usize,
    pub lambda_star: f64,
}

fn check_size(stats: &CostStats, m: usize) -> Result<()> {
    if m == 0 || m > stats.len() {
        return Err(Error::invalid(format!(
            "group size M={m} must be in 1..={}",
            stats.len()
        )));
    }
    Ok(())
}

/// `sum_{i in members} (t_i - lambda w_i)`, summed in the order given.
pub fn certificate(stats: &CostStats, lambda: f64, members: &[usize]) -> f64 {
    members
        .iter()
        .map(|&i| stats.t()[i] - lambda * stats.w()[i])
        .sum()
}

/// Indices of the `m` smallest entries of `t - lambda w` (ties to the lower
/// index), ascending, with their certificate value.
fn greedy_candidate(stats: &CostStats, lambda: f64, m: usize) -> (Vec<usize>, f64) {
    let v: Vec<f64> = stats
        .t()
        .iter()
        .zip(stats.w())
        .map(|(t, w)| t - lambda * w)
        .collect();
    let mut order: Vec<usize> = (0..v.len()).collect();
    let cmp = |a: &usize, b: &usize| v[*a].total_cmp(&v[*b]).then(a.cmp(b));
    if m < order.len() {
        order.select_nth_unstable_by(m - 1, cmp);
        order.truncate(m);
    }
    order.sort_unstable();
    let value = certificate(stats, lambda, &order);
    (order, value)
}

/// Greedy feasibility test at `lambda`: the best `M`-subset for this `lambda`
/// if its certificate is nonpositive, otherwise `None`.
pub fn feasibility_test(stats: &CostStats, lambda: f64, m: usize) -> Result<Option<SelectionVector>> {
    check_size(stats, m)?;
    let (members, value) = greedy_candidate(stats, lambda, m);
    if value <= 0.0 {
        Ok(Some(SelectionVector::from_indices(stats.len(), &members)?))
    } else {
        Ok(None)
    }
}

fn ratio_bounds(stats: &CostStats) -> (f64, f64) {
    (0..stats.len())
        .map(|i| stats.ratio(i))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r), hi.max(r)))
}

/// Smallest `lambda >= start` at which `members` certifies, stepping up by a
/// few ulps to absorb rounding in `t_i - lambda w_i`.
fn certify_upward(stats: &CostStats, start: f64, members: &[usize]) -> f64 {
    let mut lambda = start;
    let mut step = start.abs().max(f64::MIN_POSITIVE) * f64::EPSILON;
    while certificate(stats, lambda, members) > 0.0 {
        lambda += step;
        step *= 2.0;
    }
    lambda
}

/// Minimum group rate for groups of exactly `m` consumers, to within `gamma`.
///
/// Returns the last feasible bisection point together with the selection that
/// certified it. When every consumer has (to within `gamma`) the same ratio,
/// the first `m` consumers are returned at the upper end of the bracket.
pub fn solve_min_lambda(stats: &CostStats, m: usize, gamma: f64) -> Result<SolveResult> {
    check_size(stats, m)?;
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::invalid(format!("gamma must be > 0, got {gamma}")));
    }
    let (mut lo, hi_ratio) = ratio_bounds(stats);

    if hi_ratio - lo <= gamma {
        let members: Vec<usize> = (0..m).collect();
        let hi = certify_upward(stats, hi_ratio, &members);
        return Ok(SolveResult {
            lambda_star: hi,
            selection: SelectionVector::from_indices(stats.len(), &members)?,
            iterations: 0,
            bracket: (lo, hi),
        });
    }

    // Every v_i <= 0 at the largest ratio, so the greedy set certifies there
    // up to rounding.
    let (members, _) = greedy_candidate(stats, hi_ratio, m);
    let mut hi = certify_upward(stats, hi_ratio, &members);
    let mut best = members;

    let mut iterations = 0;
    while hi - lo > gamma {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let (members, value) = greedy_candidate(stats, mid, m);
        if value <= 0.0 {
            hi = mid;
            best = members;
        } else {
            lo = mid;
        }
    }

    Ok(SolveResult {
        lambda_star: hi,
        selection: SelectionVector::from_indices(stats.len(), &best)?,
        iterations,
        bracket: (lo, hi),
    })
}

/// Number of `m`-subsets of `n` items, saturating.
fn binomial(n: usize, m: usize) -> u128 {
    let m = m.min(n - m);
    let mut acc: u128 = 1;
    for k in 0..m {
        acc = acc.saturating_mul((n - k) as u128) / (k as u128 + 1);
    }
    acc
}

/// Exact minimizer by enumerating every `m`-subset in lexicographic order;
/// the first optimal subset wins ties.
pub fn brute_force_min_lambda(stats: &CostStats, m: usize) -> Result<SolveResult> {
    check_size(stats, m)?;
    let n = stats.len();
    let count = binomial(n, m);
    if count > BRUTE_FORCE_LIMIT {
        return Err(Error::invalid(format!(
            "C({n}, {m}) = {count} subsets exceeds the enumeration limit of {BRUTE_FORCE_LIMIT}"
        )));
    }

    let ratio = |idx: &[usize]| {
        let t: f64 = idx.iter().map(|&i| stats.t()[i]).sum();
        let w: f64 = idx.iter().map(|&i| stats.w()[i]).sum();
        t / w
    };
    let mut idx: Vec<usize> = (0..m).collect();
    let mut best = idx.clone();
    let mut best_ratio = ratio(&idx);
    // advance to the next combination
    while let Some(pos) = (0..m).rev().find(|&k| idx[k] < n - m + k) {
        idx[pos] += 1;
        for k in pos + 1..m {
            idx[k] = idx[k - 1] + 1;
        }
        let r = ratio(&idx);
        if r.partial_cmp(&best_ratio) == Some(Ordering::Less) {
            best_ratio = r;
            best.clone_from(&idx);
        }
    }

    Ok(SolveResult {
        lambda_star: best_ratio,
        selection: SelectionVector::from_indices(n, &best)?,
        iterations: 0,
        bracket: (best_ratio, best_ratio),
    })
}

/// Minimum rate for each size in `sizes` (ascending).
pub fn lambda_curve(stats: &CostStats, sizes: &[usize], gamma: f64) -> Result<Vec<CurvePoint>> {
    if sizes.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("sizes must be sorted ascending"));
    }
    sizes
        .par_iter()
        .map(|&m| {
            solve_min_lambda(stats, m, gamma).map(|r| CurvePoint {
                m,
                lambda_star: r.lambda_star,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(t: &[f64], w: &[f64]) -> CostStats {
        CostStats::new(t.to_vec(), w.to_vec()).unwrap()
    }

    #[test]
    fn feasibility_hand_examples() {
        let s = stats(&[2.0, 6.0], &[1.0, 1.0]);
        let u = feasibility_test(&s, 3.0, 1).unwrap().unwrap();
        assert_eq!(u.indices(), vec![0]);
        assert!(feasibility_test(&s, 1.5, 1).unwrap().is_none());
        assert!(feasibility_test(&s, 6.0, 2).unwrap().is_some());
        assert!(feasibility_test(&s, 1.0, 3).is_err());
    }

    #[test]
    fn feasible_at_max_ratio_for_every_size() {
        let s = stats(&[2.0, 6.0, 5.0, 1.0], &[1.0, 1.0, 2.0, 3.0]);
        for m in 1..=4 {
            assert!(feasibility_test(&s, 6.0, m).unwrap().is_some());
        }
    }

    #[test]
    fn ties_go_to_lower_index() {
        let s = stats(&[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0]);
        let u = feasibility_test(&s, 2.0, 2).unwrap().unwrap();
        assert_eq!(u.indices(), vec![0, 1]);
    }

    #[test]
    fn brute_force_hand_enumeration() {
        let s = stats(&[2.0, 6.0, 4.0], &[1.0, 1.0, 2.0]);
        let r = brute_force_min_lambda(&s, 2).unwrap();
        assert_eq!(r.lambda_star, 2.0);
        assert_eq!(r.selection.indices(), vec![0, 2]);
        let all = brute_force_min_lambda(&s, 3).unwrap();
        assert_eq!(all.lambda_star, 12.0 / 4.0);
    }

    #[test]
    fn brute_force_guard() {
        let n = 40;
        let s = stats(&vec![1.0; n], &vec![1.0; n]);
        assert!(brute_force_min_lambda(&s, 20).is_err());
        assert!(brute_force_min_lambda(&s, 2).is_ok());
    }

    #[test]
    fn singleton_and_full_groups() {
        let s = stats(&[5.0, 3.0, 9.0, 3.0], &[2.0, 1.0, 3.0, 1.0]);
        let one = solve_min_lambda(&s, 1, 1e-9).unwrap();
        assert!((one.lambda_star - 2.5).abs() <= 1e-9);
        assert_eq!(one.selection.indices(), vec![0]);
        let all = solve_min_lambda(&s, 4, 1e-9).unwrap();
        assert!((all.lambda_star - 20.0 / 7.0).abs() <= 1e-9);
        assert!(all.certificate(&s) <= 0.0);
    }

    #[test]
    fn equal_ratios_take_first_indices() {
        let s = stats(&[3.0, 6.0, 9.0, 0.3], &[1.0, 2.0, 3.0, 0.1]);
        let r = solve_min_lambda(&s, 2, 1e-6).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.selection.indices(), vec![0, 1]);
        assert!((r.lambda_star - 3.0).abs() < 1e-12);
        assert!(r.certificate(&s) <= 0.0);
    }

    #[test]
    fn rejects_bad_gamma_and_size() {
        let s = stats(&[1.0, 2.0], &[1.0, 1.0]);
        assert!(solve_min_lambda(&s, 1, 0.0).is_err());
        assert!(solve_min_lambda(&s, 1, -1.0).is_err());
        assert!(solve_min_lambda(&s, 3, 1e-6).is_err());
        assert!(solve_min_lambda(&s, 0, 1e-6).is_err());
    }

    #[test]
    fn curve_rejects_unsorted_sizes() {
        let s = stats(&[1.0, 2.0], &[1.0, 1.0]);
        assert!(lambda_curve(&s, &[2, 1], 1e-6).is_err());
        let c = lambda_curve(&s, &[1, 2], 1e-9).unwrap();
        assert!((c[0].lambda_star - 1.0).abs() < 1e-9);
        assert!((c[1].lambda_star - 1.5).abs() < 1e-9);
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(14, 7), 3432);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(5, 5), 1);
    }
}
