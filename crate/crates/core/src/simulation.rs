//! Replay of the validate window for one group: forecast, buy day-ahead,
//! settle the deviation at the realized real-time price.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::cost_model::{
    expected_penalty, mean_real_time, newsvendor_purchase, realized_cost, realized_rate, SettlementDesign,
};
use crate::error::{Error, Result};
use crate::forecast::{daily_totals, group_load, GroupForecaster, DEFAULT_AR_ORDER};
use crate::types::{Dataset, DayProfile, ForecastErrorModel, Window};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulatedDay {
    pub day_index: usize,
    pub date: chrono::NaiveDate,
    pub demand_kwh: f64,
    pub purchased_kwh: f64,
    pub cost: f64,
    /// `p'd`, the cost had demand been bought exactly day-ahead.
    pub day_ahead_cost: f64,
    /// Closed-form expected penalty; zero under two-sided settlement.
    pub expected_penalty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub design: SettlementDesign,
    pub group_size: usize,
    pub days: usize,
    /// Realized average cost, cents/kWh.
    pub realized_rate: f64,
    /// Day-ahead cost to serve over the same days.
    pub lambda: f64,
    /// `realized_rate - lambda`.
    pub gap: f64,
    /// Standard error of `gap` across days.
    pub gap_std_error: f64,
    /// `sum(expected_penalty) / sum(demand)`.
    pub expected_gap: f64,
    pub sigma: ForecastErrorModel,
    #[serde(skip)]
    pub daily: Vec<SimulatedDay>,
}

/// Simulates serving `members` over the first `days` validate days (all of
/// them when `None`).
///
/// One-sided settlement buys the newsvendor quantity; two-sided buys the
/// forecast. The error model is estimated from training-window residuals and
/// the expected real-time price is the training-window hourly mean.
pub fn simulate(
    dataset: &Dataset,
    members: &[usize],
    design: SettlementDesign,
    days: Option<usize>,
) -> Result<SimulationReport> {
    if members.is_empty() {
        return Err(Error::invalid("group is empty"));
    }
    if let Some(&i) = members.iter().find(|&&i| i >= dataset.len()) {
        return Err(Error::invalid(format!("consumer index {i} out of range")));
    }
    let mut window = dataset.window(Window::Validate);
    if let Some(k) = days {
        if k == 0 || k > window.len() {
            return Err(Error::invalid(format!(
                "days must be in 1..={}, got {k}",
                window.len()
            )));
        }
        window.end = window.start + k;
    }
    if window.is_empty() {
        return Err(Error::invalid("validate window is empty"));
    }

    let load = group_load(dataset, members);
    let forecaster = GroupForecaster::fit_load(dataset, &load, DEFAULT_AR_ORDER)?;
    let sigma = forecaster.error_model(dataset, &load)?;
    let q_mean = mean_real_time(dataset, Window::Train)?;
    let totals = daily_totals(&load);
    let prices = dataset.prices();

    let mut daily = Vec::with_capacity(window.len());
    for d in window {
        let p = prices.day_ahead().row(d);
        let q = prices.real_time().row(d);
        let forecast = forecaster.predict_day(&totals[..d], dataset.weekday_of(d))?;
        let (purchased, expected): (DayProfile, f64) = match design {
            SettlementDesign::OneSided => (
                newsvendor_purchase(&forecast, &sigma, p, &q_mean)?.purchase,
                expected_penalty(&sigma, p, &q_mean)?,
            ),
            SettlementDesign::TwoSided => (forecast, 0.0),
        };
        let consumed = &load[d];
        daily.push(SimulatedDay {
            day_index: d,
            date: dataset.prices().day_ahead().date_of(d),
            demand_kwh: totals[d],
            purchased_kwh: purchased.iter().sum(),
            cost: realized_cost(p, q, &purchased, consumed, design),
            day_ahead_cost: p.iter().zip(consumed).map(|(p, d)| p * d).sum(),
            expected_penalty: expected,
        });
    }

    let demands: Vec<f64> = daily.iter().map(|d| d.demand_kwh).collect();
    let costs: Vec<f64> = daily.iter().map(|d| d.cost).collect();
    let da_costs: Vec<f64> = daily.iter().map(|d| d.day_ahead_cost).collect();
    let realized = realized_rate(&costs, &demands)?;
    let lambda = realized_rate(&da_costs, &demands)?;
    let total_demand: f64 = demands.iter().sum();
    let gap = realized - lambda;

    // ratio-estimator standard error of sum(penalty) / sum(demand)
    let n = daily.len();
    let gap_std_error = if n > 1 {
        let ss: f64 = daily
            .iter()
            .map(|d| (d.cost - d.day_ahead_cost - gap * d.demand_kwh).powi(2))
            .sum();
        (ss / (n * (n - 1)) as f64).sqrt() * n as f64 / total_demand
    } else {
        f64::NAN
    };

    Ok(SimulationReport {
        design,
        group_size: members.len(),
        days: n,
        realized_rate: realized,
        lambda,
        gap,
        gap_std_error,
        expected_gap: daily.iter().map(|d| d.expected_penalty).sum::<f64>() / total_demand,
        sigma,
        daily,
    })
}

/// `day_index,date,demand_kwh,purchased_kwh,cost_cents,day_ahead_cost_cents,expected_penalty_cents`.
pub fn write_simulation_csv(path: impl AsRef<Path>, report: &SimulationReport) -> Result<()> {
    let mut out =
        String::from("day_index,date,demand_kwh,purchased_kwh,cost_cents,day_ahead_cost_cents,expected_penalty_cents\n");
    for d in &report.daily {
        writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            d.day_index, d.date, d.demand_kwh, d.purchased_kwh, d.cost, d.day_ahead_cost, d.expected_penalty
        )
        .expect("string write");
    }
    crate::ingest::write_atomic(path.as_ref(), out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{synth_population, SynthSpec};

    fn dataset(noise_cv: f64, rt_sd: f64) -> Dataset {
        let mut spec = SynthSpec::new(20, 60, 0.5, 3);
        spec.noise_cv = noise_cv;
        spec.rt_noise_sd = rt_sd;
        synth_population(&spec).unwrap().dataset
    }

    #[test]
    fn perfect_forecast_costs_lambda() {
        let ds = dataset(0.0, 0.5);
        let members: Vec<usize> = (0..ds.len()).collect();
        for design in [SettlementDesign::TwoSided, SettlementDesign::OneSided] {
            let r = simulate(&ds, &members, design, None).unwrap();
            assert!(((r.realized_rate - r.lambda) / r.lambda).abs() < 1e-9, "{design:?} {r:?}");
            assert_eq!(r.days, ds.validate_days());
        }
    }

    #[test]
    fn one_sided_never_beats_lambda_at_flat_real_time() {
        let ds = dataset(0.3, 0.0);
        let r = simulate(&ds, &[0, 1, 2, 3], SettlementDesign::OneSided, None).unwrap();
        assert!(r.gap >= -1e-12, "{}", r.gap);
        for d in &r.daily {
            assert!(d.cost >= d.day_ahead_cost - 1e-9);
        }
    }

    #[test]
    fn day_limit() {
        let ds = dataset(0.3, 0.5);
        let r = simulate(&ds, &[0], SettlementDesign::TwoSided, Some(5)).unwrap();
        assert_eq!(r.daily.len(), 5);
        assert_eq!(r.daily[0].day_index, ds.train_days());
        assert!(simulate(&ds, &[0], SettlementDesign::TwoSided, Some(0)).is_err());
        assert!(simulate(&ds, &[], SettlementDesign::TwoSided, None).is_err());
        assert!(simulate(&ds, &[99], SettlementDesign::TwoSided, None).is_err());
    }
}
