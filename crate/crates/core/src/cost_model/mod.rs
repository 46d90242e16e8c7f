//! Cost to serve, settlement costs and newsvendor purchasing.

mod newsvendor;
mod settlement;

pub use newsvendor::{
    expected_penalty, expected_penalty_with, mean_real_time, newsvendor_purchase, optimal_adjustment,
    PurchasePlan, RHO_MIN,
};
pub use settlement::{realized_cost, realized_rate, DailySettlement, SettlementDesign};

use crate::error::Result;
use crate::types::{CostStats, Dataset, SelectionVector, Window};

/// Day-ahead price-weighted usage `t_i` and total usage `w_i` over `window`.
///
/// Fails if a consumer has no usage inside the window.
pub fn consumer_stats(dataset: &Dataset, window: Window) -> Result<CostStats> {
    let days = dataset.window(window);
    let da = dataset.prices().day_ahead();
    let (t, w) = dataset
        .consumers()
        .iter()
        .map(|c| {
            let usage = c.usage();
            let mut t = 0.0;
            let mut w = 0.0;
            for d in days.clone() {
                let (p, u) = (da.row(d), usage.row(d));
                t += p.iter().zip(u).map(|(p, u)| p * u).sum::<f64>();
                w += u.iter().sum::<f64>();
            }
            (t, w)
        })
        .unzip();
    CostStats::new(t, w)
}

/// Cost to serve consumer `i` alone, `t_i / w_i` in cents/kWh.
pub fn individual_lambda(stats: &CostStats, i: usize) -> f64 {
    stats.ratio(i)
}

/// Cost to serve the group `u`, `(u't) / (u'w)`: the kWh-weighted mean of
/// its members' individual rates.
///
/// Panics if `u` is not defined over the same population as `stats`.
pub fn group_lambda(stats: &CostStats, u: &SelectionVector) -> f64 {
    assert_eq!(u.len(), stats.len(), "selection and stats cover different populations");
    let (mut t, mut w) = (0.0, 0.0);
    for i in u.indices() {
        t += stats.t()[i];
        w += stats.w()[i];
    }
    t / w
}

/// Group rate for members given by index.
pub fn group_lambda_of(stats: &CostStats, members: &[usize]) -> f64 {
    let t: f64 = members.iter().map(|&i| stats.t()[i]).sum();
    let w: f64 = members.iter().map(|&i| stats.w()[i]).sum();
    t / w
}
