use std::collections::HashMap;
use std::path::Path;

use chrono::NaiveDate;

use super::{format_row, hour_header, write_atomic};
use crate::error::{Error, Result};
use crate::types::{ConsumerSeries, DayProfile, HourlyMatrix, HOURS};

/// Reads a meter file with header `consumer_id,date,h00,...,h23`.
///
/// Consumers are returned in order of first appearance. Rows of one consumer
/// may appear in any order but must cover consecutive dates.
pub fn load_meter_csv(path: impl AsRef<Path>) -> Result<Vec<ConsumerSeries>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::parse(path, e.to_string()))?;

    let expected = format!("consumer_id,date,{}", hour_header());
    let header = reader.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != expected {
        return Err(Error::parse(path, format!("bad header {header:?}, expected {expected:?}")));
    }

    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<(NaiveDate, DayProfile, u64)>> = HashMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != HOURS + 2 {
            return Err(Error::parse(path, format!("row {line}: expected {} fields", HOURS + 2)));
        }
        let id = record[0].to_string();
        let date = NaiveDate::parse_from_str(&record[1], "%Y-%m-%d")
            .map_err(|e| Error::parse(path, format!("row {line}: bad date {:?}: {e}", &record[1])))?;
        let mut profile = [0.0; HOURS];
        for (h, slot) in profile.iter_mut().enumerate() {
            let raw = &record[h + 2];
            let v: f64 = raw
                .parse()
                .map_err(|_| Error::parse(path, format!("row {line}: bad reading {raw:?}")))?;
            if !v.is_finite() {
                return Err(Error::parse(path, format!("row {line}: non-finite reading")));
            }
            if v < 0.0 {
                return Err(Error::parse(path, format!("negative reading at row {line}")));
            }
            *slot = v;
        }
        let entry = rows.entry(id.clone()).or_insert_with(|| {
            order.push(id);
            Vec::new()
        });
        entry.push((date, profile, line));
    }

    order
        .into_iter()
        .map(|id| {
            let mut days = rows.remove(&id).expect("id recorded");
            days.sort_by_key(|(d, _, _)| *d);
            for pair in days.windows(2) {
                let (prev, next) = (pair[0].0, pair[1].0);
                if next == prev {
                    return Err(Error::parse(
                        path,
                        format!("consumer {id}: duplicate date {next} at row {}", pair[1].2),
                    ));
                }
                if let Some(expected) = prev.succ_opt().filter(|e| *e != next) {
                    return Err(Error::parse(path, format!("consumer {id}: gap at {expected}")));
                }
            }
            let start = days[0].0;
            let usage = HourlyMatrix::new(days.into_iter().map(|(_, p, _)| p).collect(), start)?;
            ConsumerSeries::new(id, usage).map_err(|e| Error::parse(path, e.to_string()))
        })
        .collect()
}

/// Writes consumers in the meter format, four fractional digits per reading.
pub fn write_meter_csv(path: impl AsRef<Path>, consumers: &[ConsumerSeries]) -> Result<()> {
    let mut out = format!("consumer_id,date,{}\n", hour_header());
    for c in consumers {
        let usage = c.usage();
        for (d, row) in usage.rows().iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", c.id(), usage.date_of(d), format_row(row)));
        }
    }
    write_atomic(path.as_ref(), out.as_bytes())
}
