//! Meter and price file IO, date alignment and synthetic populations.

mod meter;
mod price;
mod synth;

use std::io::Write;
use std::path::Path;

pub use meter::{load_meter_csv, write_meter_csv};
pub use price::{load_price_csv, write_price_csv, PriceUnit};
pub use synth::{synth_population, Archetype, SynthSpec, SyntheticPopulation};

use crate::error::{Error, Result};
use crate::types::{ConsumerSeries, Dataset, PriceSeries, HOURS};

/// Fractional digits used for every decimal written to CSV.
pub const DECIMALS: usize = 4;

/// Rounds `v` to [`DECIMALS`] places exactly as a write/read cycle would.
pub fn quantize(v: f64) -> f64 {
    format!("{v:.DECIMALS$}").parse().expect("formatted float parses")
}

pub(crate) fn hour_header() -> String {
    (0..HOURS).map(|h| format!("h{h:02}")).collect::<Vec<_>>().join(",")
}

pub(crate) fn format_row(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:.DECIMALS$}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// Writes `contents` to `path` via a temporary file in the same directory and
/// a rename, so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Truncates all series to their common date range and splits it into
/// leading train days (`round(split * total)`) and trailing validate days.
pub fn align(consumers: Vec<ConsumerSeries>, prices: PriceSeries, split: f64) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&split) {
        return Err(Error::invalid(format!("train split must be in [0, 1], got {split}")));
    }
    if consumers.is_empty() {
        return Err(Error::invalid("no consumers to align"));
    }
    let from = consumers
        .iter()
        .map(|c| c.usage().start_date())
        .chain([prices.start_date()])
        .max()
        .expect("nonempty");
    let to = consumers
        .iter()
        .map(|c| c.usage().end_date())
        .chain([prices.end_date()])
        .min()
        .expect("nonempty");
    if from > to {
        return Err(Error::invalid("no overlapping dates"));
    }
    let prices = PriceSeries::new(
        prices.day_ahead().between(from, to)?,
        prices.real_time().between(from, to)?,
    )?;
    let consumers = consumers
        .iter()
        .map(|c| ConsumerSeries::new(c.id(), c.usage().between(from, to)?))
        .collect::<Result<Vec<_>>>()?;
    let total = prices.days();
    let train_days = (split * total as f64).round() as usize;
    if train_days == 0 {
        return Err(Error::invalid(format!(
            "train split {split} leaves no training days out of {total}"
        )));
    }
    Dataset::new(consumers, prices, train_days)
}
