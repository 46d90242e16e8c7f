//! Shared domain types.
//!
//! Every constructor validates its invariants and returns [`Error::Invalid`]
//! on violation; values are immutable afterwards.

use std::ops::Range;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of hourly slots in a market day.
pub const HOURS: usize = 24;

/// One day of hourly values.
pub type DayProfile = [f64; HOURS];

/// A days x 24 matrix of nonnegative values starting on a calendar date.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlyMatrix {
    rows: Vec<DayProfile>,
    start_date: NaiveDate,
}

impl HourlyMatrix {
    pub fn new(rows: Vec<DayProfile>, start_date: NaiveDate) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("hourly matrix needs at least one day"));
        }
        for (d, row) in rows.iter().enumerate() {
            if let Some(h) = row.iter().position(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::invalid(format!(
                    "entry at day {d}, hour {h} is {} (must be finite and >= 0)",
                    row[h]
                )));
            }
        }
        Ok(Self { rows, start_date })
    }

    pub fn days(&self) -> usize {
        self.rows.len()
    }

    pub fn start_date(&self) -> NaiveDate {
        self.start_date
    }

    /// Date of the last row.
    pub fn end_date(&self) -> NaiveDate {
        self.date_of(self.rows.len() - 1)
    }

    pub fn date_of(&self, day: usize) -> NaiveDate {
        self.start_date + Days::new(day as u64)
    }

    pub fn row(&self, day: usize) -> &DayProfile {
        &self.rows[day]
    }

    pub fn rows(&self) -> &[DayProfile] {
        &self.rows
    }

    pub fn total(&self) -> f64 {
        self.rows.iter().flatten().sum()
    }

    /// Restricts to the inclusive date range `[from, to]`.
    pub fn between(&self, from: NaiveDate, to: NaiveDate) -> Result<Self> {
        if from < self.start_date || to > self.end_date() || from > to {
            return Err(Error::invalid(format!(
                "range {from}..={to} is outside {}..={}",
                self.start_date,
                self.end_date()
            )));
        }
        let lo = (from - self.start_date).num_days() as usize;
        let hi = (to - self.start_date).num_days() as usize;
        Ok(Self {
            rows: self.rows[lo..=hi].to_vec(),
            start_date: from,
        })
    }
}

/// One consumer's hourly kWh usage.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsumerSeries {
    id: String,
    usage: HourlyMatrix,
}

impl ConsumerSeries {
    pub fn new(id: impl Into<String>, usage: HourlyMatrix) -> Result<Self> {
        let id = id.into();
        if usage.total() <= 0.0 {
            return Err(Error::invalid(format!("consumer {id} has zero total usage")));
        }
        Ok(Self { id, usage })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn usage(&self) -> &HourlyMatrix {
        &self.usage
    }
}

/// Aligned day-ahead and real-time prices in cents/kWh.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    day_ahead: HourlyMatrix,
    real_time: HourlyMatrix,
}

impl PriceSeries {
    pub fn new(day_ahead: HourlyMatrix, real_time: HourlyMatrix) -> Result<Self> {
        if day_ahead.days() != real_time.days() || day_ahead.start_date() != real_time.start_date()
        {
            return Err(Error::invalid("market date ranges differ"));
        }
        Ok(Self {
            day_ahead,
            real_time,
        })
    }

    pub fn day_ahead(&self) -> &HourlyMatrix {
        &self.day_ahead
    }

    pub fn real_time(&self) -> &HourlyMatrix {
        &self.real_time
    }

    pub fn days(&self) -> usize {
        self.day_ahead.days()
    }

    pub fn start_date(&self) -> NaiveDate {
        self.day_ahead.start_date()
    }

    pub fn end_date(&self) -> NaiveDate {
        self.day_ahead.end_date()
    }
}

/// Which block of days an operation looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Train,
    Validate,
    All,
}

/// Consumers and prices over one common date range, split chronologically
/// into a leading train block and a trailing validate block.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    consumers: Vec<ConsumerSeries>,
    prices: PriceSeries,
    train_days: usize,
    validate_days: usize,
}

impl Dataset {
    pub fn new(consumers: Vec<ConsumerSeries>, prices: PriceSeries, train_days: usize) -> Result<Self> {
        if consumers.is_empty() {
            return Err(Error::invalid("dataset needs at least one consumer"));
        }
        let days = prices.days();
        for c in &consumers {
            let u = c.usage();
            if u.days() != days || u.start_date() != prices.start_date() {
                return Err(Error::invalid(format!(
                    "consumer {} covers {}..={} but prices cover {}..={}",
                    c.id(),
                    u.start_date(),
                    u.end_date(),
                    prices.start_date(),
                    prices.end_date()
                )));
            }
        }
        if train_days < 1 || train_days > days {
            return Err(Error::invalid(format!(
                "train_days must be in 1..={days}, got {train_days}"
            )));
        }
        Ok(Self {
            consumers,
            prices,
            train_days,
            validate_days: days - train_days,
        })
    }

    pub fn consumers(&self) -> &[ConsumerSeries] {
        &self.consumers
    }

    pub fn prices(&self) -> &PriceSeries {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.consumers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.consumers.is_empty()
    }

    pub fn days(&self) -> usize {
        self.prices.days()
    }

    pub fn train_days(&self) -> usize {
        self.train_days
    }

    pub fn validate_days(&self) -> usize {
        self.validate_days
    }

    pub fn start_date(&self) -> NaiveDate {
        self.prices.start_date()
    }

    pub fn weekday_of(&self, day: usize) -> Weekday {
        self.prices.day_ahead().date_of(day).weekday()
    }

    /// Day indices covered by `window`.
    pub fn window(&self, window: Window) -> Range<usize> {
        match window {
            Window::Train => 0..self.train_days,
            Window::Validate => self.train_days..self.days(),
            Window::All => 0..self.days(),
        }
    }

    /// Position of a consumer id, if present.
    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.consumers.iter().position(|c| c.id() == id)
    }
}

/// Binary membership vector over a population.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SelectionVector {
    bits: Vec<bool>,
    cardinality: usize,
}

impl SelectionVector {
    pub fn new(bits: Vec<bool>) -> Result<Self> {
        let cardinality = bits.iter().filter(|b| **b).count();
        if cardinality == 0 {
            return Err(Error::invalid("selection must contain at least one member"));
        }
        Ok(Self { bits, cardinality })
    }

    /// Builds a selection of length `n` from member indices.
    pub fn from_indices(n: usize, members: &[usize]) -> Result<Self> {
        let mut bits = vec![false; n];
        for &i in members {
            if i >= n {
                return Err(Error::invalid(format!("member index {i} out of range for N={n}")));
            }
            if bits[i] {
                return Err(Error::invalid(format!("member index {i} listed twice")));
            }
            bits[i] = true;
        }
        Self::new(bits)
    }

    /// Population size N.
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Number of members M.
    pub fn cardinality(&self) -> usize {
        self.cardinality
    }

    pub fn contains(&self, i: usize) -> bool {
        self.bits.get(i).copied().unwrap_or(false)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Member indices in ascending order.
    pub fn indices(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.then_some(i))
            .collect()
    }
}

/// Per-consumer price-weighted usage `t` (cents) and total usage `w` (kWh).
#[derive(Debug, Clone, PartialEq)]
pub struct CostStats {
    t: Vec<f64>,
    w: Vec<f64>,
}

impl CostStats {
    pub fn new(t: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        if t.len() != w.len() {
            return Err(Error::invalid(format!(
                "t has {} entries but w has {}",
                t.len(),
                w.len()
            )));
        }
        if t.is_empty() {
            return Err(Error::invalid("cost stats need at least one consumer"));
        }
        if let Some(i) = w.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid(format!("w[{i}] = {} must be > 0", w[i])));
        }
        if let Some(i) = t.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid(format!("t[{i}] = {} must be >= 0", t[i])));
        }
        Ok(Self { t, w })
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Individual cost to serve `t_i / w_i`.
    pub fn ratio(&self, i: usize) -> f64 {
        self.t[i] / self.w[i]
    }

    /// Stats restricted to `indices`, in the order given.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(
            indices.iter().map(|&i| self.t[i]).collect(),
            indices.iter().map(|&i| self.w[i]).collect(),
        )
    }

    /// Multiplies every `t_i` by `c` (a uniform price rescaling).
    pub fn scale_prices(&self, c: f64) -> Result<Self> {
        Self::new(self.t.iter().map(|v| v * c).collect(), self.w.clone())
    }
}

/// Zero-mean Gaussian forecast errors, one standard deviation per hour (kWh).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastErrorModel {
    sigma: DayProfile,
}

impl ForecastErrorModel {
    pub fn new(sigma: DayProfile) -> Result<Self> {
        if let Some(h) = sigma.iter().position(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::invalid(format!("sigma[{h}] = {} must be >= 0", sigma[h])));
        }
        Ok(Self { sigma })
    }

    pub fn zero() -> Self {
        Self { sigma: [0.0; HOURS] }
    }

    pub fn sigma(&self) -> &DayProfile {
        &self.sigma
    }
}
