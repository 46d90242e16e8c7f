use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::DayProfile;

/// How real-time deviations from the day-ahead purchase are settled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SettlementDesign {
    /// Shortfalls are bought and surpluses sold back at the real-time price.
    TwoSided,
    /// Shortfalls are bought at the real-time price; surpluses are forfeited.
    OneSided,
}

/// Outcome of one settled day.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DailySettlement {
    pub day_index: usize,
    pub purchased: DayProfile,
    pub consumed: DayProfile,
    pub cost: f64,
}

/// Cost in cents of buying `purchased` day-ahead at `p` and settling the
/// deviation from `consumed` at `q`.
pub fn realized_cost(
    p: &DayProfile,
    q: &DayProfile,
    purchased: &DayProfile,
    consumed: &DayProfile,
    design: SettlementDesign,
) -> f64 {
    let mut cost = 0.0;
    for h in 0..p.len() {
        let deviation = consumed[h] - purchased[h];
        let settled = match design {
            SettlementDesign::TwoSided => deviation,
            SettlementDesign::OneSided => deviation.max(0.0),
        };
        cost += p[h] * purchased[h] + q[h] * settled;
    }
    cost
}

/// Average per-unit cost `sum(costs) / sum(demands)` in cents/kWh.
pub fn realized_rate(costs: &[f64], demands: &[f64]) -> Result<f64> {
    if costs.len() != demands.len() {
        return Err(Error::invalid(format!(
            "{} costs but {} demands",
            costs.len(),
            demands.len()
        )));
    }
    let total: f64 = demands.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("total demand is zero"));
    }
    Ok(costs.iter().sum::<f64>() / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::HOURS;

    fn one_hour(v: f64) -> DayProfile {
        let mut a = [0.0; HOURS];
        a[12] = v;
        a
    }

    #[test]
    fn perfect_purchase_costs_day_ahead() {
        let p = [3.0; HOURS];
        let q = [5.0; HOURS];
        let d = one_hour(7.0);
        for design in [SettlementDesign::TwoSided, SettlementDesign::OneSided] {
            assert_eq!(realized_cost(&p, &q, &d, &d, design), 21.0);
        }
    }

    #[test]
    fn shortfall_settles_identically() {
        let (p, q) = ([3.0; HOURS], [5.0; HOURS]);
        let (bought, used) = (one_hour(10.0), one_hour(12.0));
        assert_eq!(realized_cost(&p, &q, &bought, &used, SettlementDesign::TwoSided), 40.0);
        assert_eq!(realized_cost(&p, &q, &bought, &used, SettlementDesign::OneSided), 40.0);
    }

    #[test]
    fn surplus_is_forfeited_one_sided() {
        let (p, q) = ([3.0; HOURS], [5.0; HOURS]);
        let (bought, used) = (one_hour(10.0), one_hour(8.0));
        assert_eq!(realized_cost(&p, &q, &bought, &used, SettlementDesign::TwoSided), 20.0);
        assert_eq!(realized_cost(&p, &q, &bought, &used, SettlementDesign::OneSided), 30.0);
    }

    #[test]
    fn rate_of_costs() {
        assert_eq!(realized_rate(&[40.0, 20.0], &[12.0, 8.0]).unwrap(), 3.0);
        assert!(realized_rate(&[1.0], &[0.0]).is_err());
        assert!(realized_rate(&[1.0], &[1.0, 2.0]).is_err());
    }
}
