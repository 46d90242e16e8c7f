//! Day-ahead purchase under one-sided settlement.
//!
//! With actual demand `d = forecast - eps`, `eps ~ N(0, sigma^2)` per hour, and
//! purchase `forecast + delta`, the expected one-sided cost is minimized where
//! `P(-eps > delta) = p / E[q]`, i.e. `delta* = sigma * Phi^-1(1 - p / E[q])`.

use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::types::{Dataset, DayProfile, ForecastErrorModel, Window, HOURS};

/// Tail probabilities are clamped to `[RHO_MIN, 1 - RHO_MIN]`.
pub const RHO_MIN: f64 = 1e-6;

/// Forecast, adjustment and the resulting (nonnegative) purchase.
#[derive(Debug, Clone, PartialEq)]
pub struct PurchasePlan {
    pub forecast: DayProfile,
    pub adjustment: DayProfile,
    pub purchase: DayProfile,
}

fn standard_normal() -> Normal {
    Normal::standard()
}

fn check_prices(p: &DayProfile, q_mean: &DayProfile) -> Result<()> {
    if let Some(h) = q_mean.iter().position(|q| !(q.is_finite() && *q > 0.0)) {
        return Err(Error::invalid(format!(
            "expected real-time price at hour {h} is {} (must be > 0)",
            q_mean[h]
        )));
    }
    if let Some(h) = p.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::invalid(format!("day-ahead price at hour {h} is {}", p[h])));
    }
    Ok(())
}

/// Optimal deviation from the forecast for one hour.
pub fn optimal_adjustment(sigma: f64, p: f64, q_mean: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let rho = (p / q_mean).clamp(RHO_MIN, 1.0 - RHO_MIN);
    sigma * standard_normal().inverse_cdf(1.0 - rho)
}

/// Newsvendor-optimal day-ahead purchase, floored at zero.
pub fn newsvendor_purchase(
    forecast: &DayProfile,
    error_model: &ForecastErrorModel,
    p: &DayProfile,
    q_mean: &DayProfile,
) -> Result<PurchasePlan> {
    check_prices(p, q_mean)?;
    let sigma = error_model.sigma();
    let adjustment: DayProfile = std::array::from_fn(|h| optimal_adjustment(sigma[h], p[h], q_mean[h]));
    let purchase = std::array::from_fn(|h| (forecast[h] + adjustment[h]).max(0.0));
    Ok(PurchasePlan {
        forecast: *forecast,
        adjustment,
        purchase,
    })
}

/// `E[(X - a)+]` for `X ~ N(0, sigma^2)`.
fn gaussian_excess(sigma: f64, a: f64) -> f64 {
    if sigma == 0.0 {
        return (-a).max(0.0);
    }
    let n = standard_normal();
    let z = a / sigma;
    sigma * n.pdf(z) - a * (1.0 - n.cdf(z))
}

/// Expected one-sided cost above `p'd` for an arbitrary adjustment:
/// `sum_h p_h delta_h + E[q_h] E[(-eps_h - delta_h)+]`.
pub fn expected_penalty_with(
    error_model: &ForecastErrorModel,
    p: &DayProfile,
    q_mean: &DayProfile,
    adjustment: &DayProfile,
) -> Result<f64> {
    check_prices(p, q_mean)?;
    let sigma = error_model.sigma();
    Ok((0..HOURS)
        .map(|h| p[h] * adjustment[h] + q_mean[h] * gaussian_excess(sigma[h], adjustment[h]))
        .sum())
}

/// Expected daily penalty in cents at the newsvendor adjustment.
///
/// The adjustment term is price weighted (`p' delta*`), which is how it enters
/// the expected one-sided cost.
pub fn expected_penalty(error_model: &ForecastErrorModel, p: &DayProfile, q_mean: &DayProfile) -> Result<f64> {
    check_prices(p, q_mean)?;
    let sigma = error_model.sigma();
    let delta: DayProfile = std::array::from_fn(|h| optimal_adjustment(sigma[h], p[h], q_mean[h]));
    expected_penalty_with(error_model, p, q_mean, &delta)
}

/// Per-hour mean real-time price over `window`.
pub fn mean_real_time(dataset: &Dataset, window: Window) -> Result<DayProfile> {
    let days = dataset.window(window);
    if days.is_empty() {
        return Err(Error::invalid("window has no days"));
    }
    let n = days.len() as f64;
    let rt = dataset.prices().real_time();
    let mut mean = [0.0; HOURS];
    for d in days {
        for (m, v) in mean.iter_mut().zip(rt.row(d)) {
            *m += v;
        }
    }
    Ok(mean.map(|m| m / n))
}
