//! Archetype-based synthetic populations.
//!
//! Two load shapes: "peaky" consumers concentrate usage around hour 18, at
//! the synthetic day-ahead price peak; "off-peak" consumers around hour 3.
//! Each hourly reading is multiplied by an independent mean-one log-normal
//! factor whose coefficient of variation is `noise_cv`.

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use super::quantize;
use crate::error::{Error, Result};
use crate::rng;
use crate::types::{ConsumerSeries, Dataset, DayProfile, HourlyMatrix, PriceSeries, HOURS};

const PRICE_STREAM: u64 = 0;
const LABEL_STREAM: u64 = 1;
const CONSUMER_STREAM_BASE: u64 = 2;

/// Parameters of a synthetic population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n_consumers: usize,
    pub n_days: usize,
    pub fraction_peaky: f64,
    #[serde(default = "defaults::base_kwh_per_day")]
    pub base_kwh_per_day: f64,
    #[serde(default = "defaults::noise_cv")]
    pub noise_cv: f64,
    #[serde(default)]
    pub seed: u64,
    /// Standard deviation of real-time minus day-ahead price, cents/kWh.
    #[serde(default = "defaults::rt_noise_sd")]
    pub rt_noise_sd: f64,
    /// Log-normal sigma of the per-consumer consumption scale.
    #[serde(default = "defaults::scale_spread")]
    pub scale_spread: f64,
    /// Upper bound of the per-consumer weight blending the archetype shape
    /// toward a flat profile; 0 gives every consumer its exact archetype shape.
    #[serde(default)]
    pub shape_spread: f64,
    #[serde(default = "defaults::train_fraction")]
    pub train_fraction: f64,
    #[serde(default = "defaults::start_date")]
    pub start_date: NaiveDate,
}

mod defaults {
    use chrono::NaiveDate;

    pub fn base_kwh_per_day() -> f64 {
        20.0
    }
    pub fn noise_cv() -> f64 {
        0.3
    }
    pub fn rt_noise_sd() -> f64 {
        0.5
    }
    pub fn scale_spread() -> f64 {
        0.3
    }
    pub fn train_fraction() -> f64 {
        0.75
    }
    pub fn start_date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date")
    }
}

impl SynthSpec {
    pub fn new(n_consumers: usize, n_days: usize, fraction_peaky: f64, seed: u64) -> Self {
        Self {
            n_consumers,
            n_days,
            fraction_peaky,
            base_kwh_per_day: defaults::base_kwh_per_day(),
            noise_cv: defaults::noise_cv(),
            seed,
            rt_noise_sd: defaults::rt_noise_sd(),
            scale_spread: defaults::scale_spread(),
            shape_spread: 0.0,
            train_fraction: defaults::train_fraction(),
            start_date: defaults::start_date(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(Error::invalid(msg)) };
        check(self.n_consumers >= 1, "n_consumers must be ≥ 1")?;
        check(self.n_days >= 2, "n_days must be ≥ 2")?;
        check((0.0..=1.0).contains(&self.fraction_peaky), "fraction_peaky must be in [0, 1]")?;
        check(
            self.base_kwh_per_day.is_finite() && self.base_kwh_per_day > 0.0,
            "base_kwh_per_day must be > 0",
        )?;
        check(self.noise_cv.is_finite() && self.noise_cv >= 0.0, "noise_cv must be ≥ 0")?;
        check(self.rt_noise_sd.is_finite() && self.rt_noise_sd >= 0.0, "rt_noise_sd must be ≥ 0")?;
        check(self.scale_spread.is_finite() && self.scale_spread >= 0.0, "scale_spread must be ≥ 0")?;
        check((0.0..1.0).contains(&self.shape_spread), "shape_spread must be in [0, 1)")?;
        check((0.0..=1.0).contains(&self.train_fraction), "train_fraction must be in [0, 1]")?;
        check(
            (self.train_fraction * self.n_days as f64).round() >= 1.0,
            "train_fraction leaves no training days",
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Archetype {
    Peaky,
    OffPeak,
}

impl Archetype {
    fn peak_hour(self) -> f64 {
        match self {
            Archetype::Peaky => 18.0,
            Archetype::OffPeak => 3.0,
        }
    }

    /// Normalized load shape (sums to one).
    pub fn shape(self) -> DayProfile {
        let center = self.peak_hour();
        let mut s = [0.0; HOURS];
        for (h, v) in s.iter_mut().enumerate() {
            let x = h as f64 - center;
            *v = 0.2 + (-x * x / (2.0 * 1.5 * 1.5)).exp();
        }
        let total: f64 = s.iter().sum();
        s.map(|v| v / total)
    }

    pub fn label(self) -> &'static str {
        match self {
            Archetype::Peaky => "peaky",
            Archetype::OffPeak => "off_peak",
        }
    }
}

/// Baseline synthetic day-ahead price `2 + 4 exp(-(h-18)^2 / 8)` cents/kWh.
pub fn baseline_day_ahead() -> DayProfile {
    let mut p = [0.0; HOURS];
    for (h, v) in p.iter_mut().enumerate() {
        let x = h as f64 - 18.0;
        *v = 2.0 + 4.0 * (-x * x / 8.0).exp();
    }
    p
}

/// A generated dataset together with each consumer's archetype.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPopulation {
    pub dataset: Dataset,
    pub archetypes: Vec<Archetype>,
}

/// Generates a deterministic population for `spec`.
///
/// All values are quantized to the CSV precision so that a write/read cycle
/// reproduces the in-memory dataset exactly.
pub fn synth_population(spec: &SynthSpec) -> Result<SyntheticPopulation> {
    spec.validate()?;
    let days = spec.n_days;

    let mut price_rng = rng::stream(spec.seed, PRICE_STREAM);
    let da_day = baseline_day_ahead().map(quantize);
    let rt_noise = Normal::new(0.0, spec.rt_noise_sd).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rt_rows = Vec::with_capacity(days);
    for _ in 0..days {
        let mut row = [0.0; HOURS];
        for (h, v) in row.iter_mut().enumerate() {
            let noise = if spec.rt_noise_sd > 0.0 { rt_noise.sample(&mut price_rng) } else { 0.0 };
            *v = quantize((da_day[h] + noise).max(0.0));
        }
        rt_rows.push(row);
    }
    let prices = PriceSeries::new(
        HourlyMatrix::new(vec![da_day; days], spec.start_date)?,
        HourlyMatrix::new(rt_rows, spec.start_date)?,
    )?;

    let n = spec.n_consumers;
    let n_peaky = (spec.fraction_peaky * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(spec.seed, LABEL_STREAM));
    let mut archetypes = vec![Archetype::OffPeak; n];
    for &i in &order[..n_peaky] {
        archetypes[i] = Archetype::Peaky;
    }

    let ln_sigma2 = (1.0 + spec.noise_cv * spec.noise_cv).ln();
    let reading_noise = LogNormal::new(-ln_sigma2 / 2.0, ln_sigma2.sqrt())
        .map_err(|e| Error::invalid(e.to_string()))?;
    let scale_dist = LogNormal::new(-spec.scale_spread * spec.scale_spread / 2.0, spec.scale_spread)
        .map_err(|e| Error::invalid(e.to_string()))?;
    let width = (n.max(2) - 1).to_string().len();

    let consumers = archetypes
        .iter()
        .enumerate()
        .map(|(i, archetype)| {
            let mut rng = rng::stream(spec.seed, CONSUMER_STREAM_BASE + i as u64);
            let scale = if spec.scale_spread > 0.0 { scale_dist.sample(&mut rng) } else { 1.0 };
            let blend = if spec.shape_spread > 0.0 { rng.random_range(0.0..spec.shape_spread) } else { 0.0 };
            let shape = archetype.shape().map(|s| (1.0 - blend) * s + blend / HOURS as f64);
            let mean = shape.map(|s| spec.base_kwh_per_day * scale * s);
            let rows = (0..days)
                .map(|_| {
                    let mut row = [0.0; HOURS];
                    for (h, v) in row.iter_mut().enumerate() {
                        let factor = if spec.noise_cv > 0.0 { reading_noise.sample(&mut rng) } else { 1.0 };
                        *v = quantize(mean[h] * factor);
                    }
                    row
                })
                .collect();
            ConsumerSeries::new(format!("c{i:0width$}"), HourlyMatrix::new(rows, spec.start_date)?)
        })
        .collect::<Result<Vec<_>>>()?;

    let train_days = (spec.train_fraction * days as f64).round() as usize;
    Ok(SyntheticPopulation {
        dataset: Dataset::new(consumers, prices, train_days)?,
        archetypes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_gives_identical_repeating_profiles() {
        let mut spec = SynthSpec::new(2, 2, 0.0, 1);
        spec.noise_cv = 0.0;
        spec.scale_spread = 0.0;
        let pop = synth_population(&spec).unwrap();
        let cs = pop.dataset.consumers();
        assert_eq!(cs[0].usage().rows(), cs[1].usage().rows());
        assert_eq!(cs[0].usage().row(0), cs[0].usage().row(1));
        assert!(pop.archetypes.iter().all(|a| *a == Archetype::OffPeak));
    }

    #[test]
    fn zero_noise_keeps_normalized_shapes_equal_across_scales() {
        let mut spec = SynthSpec::new(5, 3, 0.0, 9);
        spec.noise_cv = 0.0;
        let pop = synth_population(&spec).unwrap();
        let shape = |c: &ConsumerSeries| {
            let row = c.usage().row(0);
            let t: f64 = row.iter().sum();
            row.map(|v| v / t)
        };
        let first = shape(&pop.dataset.consumers()[0]);
        for c in pop.dataset.consumers() {
            for (a, b) in shape(c).iter().zip(first.iter()) {
                assert!((a - b).abs() < 1e-4);
            }
            // no day-to-day variation
            for d in 1..3 {
                assert_eq!(c.usage().row(d), c.usage().row(0));
            }
        }
    }

    #[test]
    fn seeded_determinism() {
        let spec = SynthSpec::new(20, 10, 0.5, 7);
        assert_eq!(synth_population(&spec).unwrap(), synth_population(&spec).unwrap());
        let other = SynthSpec { seed: 8, ..spec.clone() };
        assert_ne!(synth_population(&spec).unwrap(), synth_population(&other).unwrap());
    }

    #[test]
    fn peaky_fraction_is_exact() {
        let pop = synth_population(&SynthSpec::new(10, 2, 0.3, 3)).unwrap();
        assert_eq!(pop.archetypes.iter().filter(|a| **a == Archetype::Peaky).count(), 3);
    }

    #[test]
    fn price_peak_is_in_the_afternoon() {
        let p = baseline_day_ahead();
        let argmax = (0..HOURS).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
        assert_eq!(argmax, 18);
        assert!((p[18] - 6.0).abs() < 1e-12);
        assert!(p[3] < 2.0001);
    }

    #[test]
    fn rejects_bad_specs() {
        let base = SynthSpec::new(2, 2, 0.5, 0);
        let err = synth_population(&SynthSpec { noise_cv: -1.0, ..base.clone() }).unwrap_err();
        assert!(err.to_string().contains("noise_cv must be ≥ 0"));
        assert!(synth_population(&SynthSpec { n_days: 1, ..base.clone() }).is_err());
        assert!(synth_population(&SynthSpec { n_consumers: 0, ..base.clone() }).is_err());
        assert!(synth_population(&SynthSpec { fraction_peaky: 1.5, ..base }).is_err());
    }

    #[test]
    fn spec_json_defaults() {
        let spec: SynthSpec =
            serde_json::from_str(r#"{"n_consumers": 3, "n_days": 4, "fraction_peaky": 0.5, "seed": 2}"#).unwrap();
        assert_eq!(spec.noise_cv, 0.3);
        assert_eq!(spec.start_date, NaiveDate::from_ymd_opt(2024, 1, 1).unwrap());
    }
}
