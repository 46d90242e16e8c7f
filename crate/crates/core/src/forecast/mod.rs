//! Day-ahead group forecasting and forecast-error evaluation.
//!
//! The forecaster multiplies a predicted daily total by a predicted
//! normalized load shape. Daily totals follow an AR(P) model on deviations
//! from the training mean; shapes are per-weekday means of normalized
//! training-day profiles.

mod curve;

pub use curve::{cv_curve, write_cv_curve_csv, CurveKind, CvCurve, CvPoint, GroupEvaluator};
pub(crate) use curve::optimal_point as curve_optimal_point;

use chrono::Weekday;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::types::{Dataset, DayProfile, ForecastErrorModel, SelectionVector, Window, HOURS};

/// Shortest training window accepted by [`GroupForecaster::fit`].
pub const MIN_TRAIN_DAYS: usize = 14;

/// Default autoregressive order on daily totals.
pub const DEFAULT_AR_ORDER: usize = 7;

/// Hourly group consumption over every day of the dataset.
pub fn group_load(dataset: &Dataset, members: &[usize]) -> Vec<DayProfile> {
    let mut load = vec![[0.0; HOURS]; dataset.days()];
    for &i in members {
        for (acc, row) in load.iter_mut().zip(dataset.consumers()[i].usage().rows()) {
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        }
    }
    load
}

pub fn daily_totals(load: &[DayProfile]) -> Vec<f64> {
    load.iter().map(|r| r.iter().sum()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupForecaster {
    mean_total: f64,
    coefficients: Vec<f64>,
    /// Indexed by days from Monday.
    shapes: [DayProfile; 7],
}

impl GroupForecaster {
    /// Fits the forecaster for group `u` on the training window.
    pub fn fit(dataset: &Dataset, u: &SelectionVector) -> Result<Self> {
        let load = group_load(dataset, &u.indices());
        Self::fit_load(dataset, &load, DEFAULT_AR_ORDER)
    }

    /// Fits on an already aggregated hourly load aligned with `dataset`.
    pub fn fit_load(dataset: &Dataset, load: &[DayProfile], order: usize) -> Result<Self> {
        let train = dataset.train_days();
        if train < MIN_TRAIN_DAYS {
            return Err(Error::invalid(format!(
                "training window has {train} days, need at least {MIN_TRAIN_DAYS}"
            )));
        }
        if order == 0 || order >= train {
            return Err(Error::invalid(format!(
                "AR order {order} must be in 1..{train}"
            )));
        }
        let totals = daily_totals(&load[..train]);
        let weekdays: Vec<Weekday> = (0..train).map(|d| dataset.weekday_of(d)).collect();
        Ok(Self {
            mean_total: totals.iter().sum::<f64>() / train as f64,
            coefficients: fit_ar(&totals, order),
            shapes: weekday_shapes(&load[..train], &weekdays),
        })
    }

    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn mean_total(&self) -> f64 {
        self.mean_total
    }

    pub fn shape(&self, day: Weekday) -> &DayProfile {
        &self.shapes[day.num_days_from_monday() as usize]
    }

    /// Predicted next daily total given the totals observed so far, floored at 0.
    pub fn predict_total(&self, history: &[f64]) -> Result<f64> {
        let p = self.order();
        if history.len() < p {
            return Err(Error::invalid(format!(
                "history has {} days, AR order is {p}",
                history.len()
            )));
        }
        let mu = self.mean_total;
        let y = mu
            + self
                .coefficients
                .iter()
                .enumerate()
                .map(|(j, phi)| phi * (history[history.len() - 1 - j] - mu))
                .sum::<f64>();
        Ok(y.max(0.0))
    }

    /// Hourly forecast `y_hat * s_hat` for a day falling on `day`.
    pub fn predict_day(&self, history: &[f64], day: Weekday) -> Result<DayProfile> {
        let y = self.predict_total(history)?;
        Ok(self.shape(day).map(|s| y * s))
    }

    /// One-step-ahead forecasts for each day in `days`, using actual totals of
    /// all earlier days as history.
    pub fn backtest(
        &self,
        dataset: &Dataset,
        load: &[DayProfile],
        days: std::ops::Range<usize>,
    ) -> Result<Vec<DayProfile>> {
        let totals = daily_totals(load);
        days.map(|d| self.predict_day(&totals[..d], dataset.weekday_of(d)))
            .collect()
    }

    /// Per-hour sample standard deviation of in-sample one-step residuals over
    /// the training window (after the AR warm-up).
    pub fn error_model(&self, dataset: &Dataset, load: &[DayProfile]) -> Result<ForecastErrorModel> {
        let range = self.order()..dataset.train_days();
        let predicted = self.backtest(dataset, load, range.clone())?;
        let n = predicted.len();
        if n < 2 {
            return Ok(ForecastErrorModel::zero());
        }
        let mut sigma = [0.0; HOURS];
        for (h, s) in sigma.iter_mut().enumerate() {
            let residuals: Vec<f64> = range
                .clone()
                .zip(&predicted)
                .map(|(d, pred)| pred[h] - load[d][h])
                .collect();
            let mean = residuals.iter().sum::<f64>() / n as f64;
            let var = residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            *s = var.sqrt();
        }
        ForecastErrorModel::new(sigma)
    }
}

/// Least-squares AR(`order`) coefficients on deviations from the mean, with a
/// vanishing ridge term so constant series yield zero coefficients.
fn fit_ar(series: &[f64], order: usize) -> Vec<f64> {
    let mu = series.iter().sum::<f64>() / series.len() as f64;
    let x: Vec<f64> = series.iter().map(|v| v - mu).collect();
    let rows = x.len() - order;
    let design = DMatrix::from_fn(rows, order, |r, j| x[r + order - 1 - j]);
    let target = DVector::from_iterator(rows, x[order..].iter().copied());
    let mut gram = design.transpose() * &design;
    let trace = gram.trace();
    if trace.is_nan() || trace <= 0.0 {
        return vec![0.0; order];
    }
    let ridge = 1e-10 * trace / order as f64;
    for j in 0..order {
        gram[(j, j)] += ridge;
    }
    let rhs = design.transpose() * target;
    match gram.cholesky() {
        Some(ch) => ch.solve(&rhs).iter().copied().collect(),
        None => vec![0.0; order],
    }
}

fn normalized(row: &DayProfile) -> Option<DayProfile> {
    let total: f64 = row.iter().sum();
    (total > 0.0).then(|| row.map(|v| v / total))
}

fn mean_shape<'a>(rows: impl Iterator<Item = &'a DayProfile>) -> Option<DayProfile> {
    let mut acc = [0.0; HOURS];
    let mut n = 0usize;
    for s in rows.filter_map(normalized) {
        for (a, v) in acc.iter_mut().zip(s) {
            *a += v;
        }
        n += 1;
    }
    if n == 0 {
        return None;
    }
    normalized(&acc)
}

fn weekday_shapes(load: &[DayProfile], weekdays: &[Weekday]) -> [DayProfile; 7] {
    let overall = mean_shape(load.iter()).unwrap_or([1.0 / HOURS as f64; HOURS]);
    std::array::from_fn(|k| {
        mean_shape(
            load.iter()
                .zip(weekdays)
                .filter(|(_, w)| w.num_days_from_monday() as usize == k)
                .map(|(r, _)| r),
        )
        .unwrap_or(overall)
    })
}

/// Coefficient of variation of a forecast, `100 * RMSE / mean(actual)`.
pub fn cv(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.len() != predicted.len() {
        return Err(Error::invalid(format!(
            "actual has {} values, predicted has {}",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::invalid("no values to evaluate"));
    }
    let n = actual.len() as f64;
    let mean = actual.iter().sum::<f64>() / n;
    if mean.is_nan() || mean <= 0.0 {
        return Err(Error::invalid("mean actual consumption is zero"));
    }
    let mse = actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - p).powi(2))
        .sum::<f64>()
        / n;
    Ok(100.0 * mse.sqrt() / mean)
}

/// Fits on train, forecasts the validate window and returns its CV.
pub fn validate_cv(dataset: &Dataset, load: &[DayProfile], order: usize) -> Result<f64> {
    let range = dataset.window(Window::Validate);
    if range.is_empty() {
        return Err(Error::invalid("validate window is empty"));
    }
    let model = GroupForecaster::fit_load(dataset, load, order)?;
    let predicted = model.backtest(dataset, load, range.clone())?;
    let actual: Vec<f64> = load[range].iter().flatten().copied().collect();
    let predicted: Vec<f64> = predicted.iter().flatten().copied().collect();
    cv(&actual, &predicted)
}

#[cfg(test)]
mod tests {
    use chrono::NaiveDate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    use super::*;
    use crate::types::{ConsumerSeries, HourlyMatrix, PriceSeries};

    fn dataset_from_rows(rows: Vec<DayProfile>, train: usize) -> Dataset {
        let start = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
        let n = rows.len();
        let p = HourlyMatrix::new(vec![[3.0; HOURS]; n], start).unwrap();
        let c = ConsumerSeries::new("g", HourlyMatrix::new(rows, start).unwrap()).unwrap();
        Dataset::new(vec![c], PriceSeries::new(p.clone(), p).unwrap(), train).unwrap()
    }

    #[test]
    fn constant_consumption_is_predicted_exactly() {
        let profile: DayProfile = std::array::from_fn(|h| 1.0 + (h % 5) as f64 * 0.25);
        let ds = dataset_from_rows(vec![profile; 30], 21);
        let u = SelectionVector::from_indices(1, &[0]).unwrap();
        let model = GroupForecaster::fit(&ds, &u).unwrap();
        let total: f64 = profile.iter().sum();
        let pred = model.predict_day(&[total; 10], Weekday::Wed).unwrap();
        for h in 0..HOURS {
            assert!((pred[h] - profile[h]).abs() < 1e-9 * total);
        }
        assert!(model.coefficients().iter().all(|c| c.abs() < 1e-9));
    }

    #[test]
    fn short_training_window_rejected() {
        let ds = dataset_from_rows(vec![[1.0; HOURS]; 20], 13);
        let u = SelectionVector::from_indices(1, &[0]).unwrap();
        assert!(GroupForecaster::fit(&ds, &u).is_err());
    }

    #[test]
    fn uniform_shape_times_total() {
        let model = GroupForecaster {
            mean_total: 24.0,
            coefficients: vec![0.0],
            shapes: [[1.0 / 24.0; HOURS]; 7],
        };
        let d = model.predict_day(&[10.0], Weekday::Mon).unwrap();
        assert!(d.iter().all(|v| (v - 1.0).abs() < 1e-15));
        assert!(model.predict_day(&[], Weekday::Mon).is_err());
    }

    #[test]
    fn forecast_sums_to_predicted_total() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::<f64>::new(1.0, 0.3).unwrap();
        let rows: Vec<DayProfile> = (0..60)
            .map(|_| std::array::from_fn(|h| (1.0 + (h as f64 / 4.0).sin().abs()) * noise.sample(&mut rng).abs()))
            .collect();
        let ds = dataset_from_rows(rows.clone(), 45);
        let model = GroupForecaster::fit_load(&ds, &rows, DEFAULT_AR_ORDER).unwrap();
        let totals = daily_totals(&rows);
        for day in [Weekday::Mon, Weekday::Sat, Weekday::Sun] {
            assert!((model.shape(day).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let y = model.predict_total(&totals).unwrap();
            let d = model.predict_day(&totals, day).unwrap();
            assert!((d.iter().sum::<f64>() - y).abs() <= 1e-12 * y);
        }
    }

    #[test]
    fn recovers_ar1_coefficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let eps = Normal::new(0.0, 1.0).unwrap();
        let mut x = 0.0;
        let series: Vec<f64> = (0..200)
            .map(|_| {
                x = 0.6 * x + eps.sample(&mut rng);
                100.0 + x
            })
            .collect();
        let phi1 = fit_ar(&series, 1);
        assert!((phi1[0] - 0.6).abs() < 0.1, "{phi1:?}");
        let phi7 = fit_ar(&series, 7);
        assert!((phi7[0] - 0.6).abs() < 0.1, "{phi7:?}");
    }

    #[test]
    fn cv_examples() {
        assert_eq!(cv(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        let got = cv(&[10.0; 48], &[11.0; 48]).unwrap();
        assert!((got - 10.0).abs() < 1e-12);
        assert!(cv(&[0.0, 0.0], &[1.0, 1.0]).is_err());
        assert!(cv(&[1.0], &[1.0, 2.0]).is_err());
    }
}
