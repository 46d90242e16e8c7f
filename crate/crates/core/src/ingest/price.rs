use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;

use super::{format_row, hour_header, write_atomic};
use crate::error::{Error, Result};
use crate::types::{DayProfile, HourlyMatrix, PriceSeries, HOURS};

/// Unit declared on the first line of a price file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriceUnit {
    CentsPerKwh,
    UsdPerMwh,
}

impl PriceUnit {
    fn parse(line: &str) -> Option<Self> {
        match line.trim().strip_prefix("#unit=")?.trim() {
            "cents_per_kwh" => Some(Self::CentsPerKwh),
            "usd_per_mwh" => Some(Self::UsdPerMwh),
            _ => None,
        }
    }

    /// Factor converting this unit into cents/kWh (1 $/MWh = 0.1 cents/kWh).
    fn to_cents_per_kwh(self) -> f64 {
        match self {
            Self::CentsPerKwh => 1.0,
            Self::UsdPerMwh => 0.1,
        }
    }
}

/// Reads a price file: `#unit=...`, then `date,market,h00,...,h23` rows with
/// `market` in `{DA, RT}`. Values are returned in cents/kWh.
pub fn load_price_csv(path: impl AsRef<Path>) -> Result<PriceSeries> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (first, rest) = text.split_once('\n').unwrap_or((&text, ""));
    let unit = PriceUnit::parse(first)
        .ok_or_else(|| Error::parse(path, format!("unknown unit line {:?}", first.trim())))?;

    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(rest.as_bytes());
    let expected = format!("date,market,{}", hour_header());
    let header = reader.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != expected {
        return Err(Error::parse(path, format!("bad header {header:?}, expected {expected:?}")));
    }

    let scale = unit.to_cents_per_kwh();
    let mut da: BTreeMap<NaiveDate, DayProfile> = BTreeMap::new();
    let mut rt: BTreeMap<NaiveDate, DayProfile> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        // +1 for the unit line consumed before the csv reader.
        let line = record.position().map(|p| p.line() + 1).unwrap_or(0);
        if record.len() != HOURS + 2 {
            return Err(Error::parse(path, format!("row {line}: expected {} fields", HOURS + 2)));
        }
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
            .map_err(|e| Error::parse(path, format!("row {line}: bad date {:?}: {e}", &record[0])))?;
        let target = match &record[1] {
            "DA" => &mut da,
            "RT" => &mut rt,
            other => return Err(Error::parse(path, format!("row {line}: unknown market {other:?}"))),
        };
        let mut profile = [0.0; HOURS];
        for (h, slot) in profile.iter_mut().enumerate() {
            let raw = &record[h + 2];
            let v: f64 = raw
                .parse()
                .map_err(|_| Error::parse(path, format!("row {line}: bad price {raw:?}")))?;
            if !v.is_finite() || v < 0.0 {
                return Err(Error::parse(path, format!("row {line}: price {v} must be >= 0")));
            }
            *slot = v * scale;
        }
        if target.insert(date, profile).is_some() {
            return Err(Error::parse(path, format!("row {line}: duplicate {} date {date}", &record[1])));
        }
    }

    if da.is_empty() || rt.is_empty() {
        return Err(Error::parse(path, "both DA and RT rows are required"));
    }
    if !da.keys().eq(rt.keys()) {
        return Err(Error::parse(path, "market date ranges differ"));
    }
    let dates: Vec<NaiveDate> = da.keys().copied().collect();
    for pair in dates.windows(2) {
        if let Some(expected) = pair[0].succ_opt().filter(|e| *e != pair[1]) {
            return Err(Error::parse(path, format!("gap at {expected}")));
        }
    }
    let start = dates[0];
    PriceSeries::new(
        HourlyMatrix::new(da.into_values().collect(), start)?,
        HourlyMatrix::new(rt.into_values().collect(), start)?,
    )
}

/// Writes prices in cents/kWh, DA rows before RT rows.
pub fn write_price_csv(path: impl AsRef<Path>, prices: &PriceSeries) -> Result<()> {
    let mut out = format!("#unit=cents_per_kwh\ndate,market,{}\n", hour_header());
    for (market, m) in [("DA", prices.day_ahead()), ("RT", prices.real_time())] {
        for (d, row) in m.rows().iter().enumerate() {
            out.push_str(&format!("{},{market},{}\n", m.date_of(d), format_row(row)));
        }
    }
    write_atomic(path.as_ref(), out.as_bytes())
}
