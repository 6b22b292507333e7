use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Duration, NaiveDateTime, Utc};

use super::{ForecastHour, HourlySeries, HourlyWeather, OfficialForecast, RawSensorRecord};
use crate::error::{Error, Result};

pub const SENSOR_HEADER: [&str; 6] = [
    "timestamp",
    "wind_speed",
    "wind_direction",
    "solar_irradiance",
    "temperature",
    "pluviometry",
];

pub const FORECAST_HEADER: [&str; 7] = [
    "issue_time",
    "valid_time",
    "wind_speed",
    "wind_direction",
    "pluviometry",
    "solar_irradiance",
    "temperature",
];

pub const HOURLY_HEADER: [&str; 7] = [
    "timestamp",
    "wind_speed",
    "wind_direction",
    "solar_irradiance",
    "temperature",
    "pluviometry",
    "imputed",
];

const TIME_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseOptions {
    /// How far a row may step back in time before the file is rejected.
    /// Rows within the tolerance are re-sorted.
    pub reorder_tolerance: Duration,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            reorder_tolerance: Duration::minutes(5),
        }
    }
}

pub(crate) fn format_time(t: DateTime<Utc>) -> String {
    t.format(TIME_FORMAT).to_string()
}

pub(crate) fn parse_time(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s.trim_end_matches('Z'), fmt) {
            return Some(t.and_utc());
        }
    }
    None
}

fn parse_cell(cell: Option<&str>) -> Option<f64> {
    let v: f64 = cell?.trim().parse().ok()?;
    v.is_finite().then_some(v)
}

fn nonnegative(v: Option<f64>) -> Option<f64> {
    v.filter(|v| *v >= 0.0)
}

fn direction(v: Option<f64>) -> Option<f64> {
    match v {
        Some(d) if d == 360.0 => Some(0.0),
        Some(d) if (0.0..360.0).contains(&d) => Some(d),
        _ => None,
    }
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

/// Parses the sensor CSV format. Malformed numeric cells become missing
/// values; the result is sorted by timestamp with duplicates collapsed
/// (last row wins).
pub fn parse_sensor_csv<R: Read>(reader: R, options: ParseOptions) -> Result<Vec<RawSensorRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let idx: Vec<usize> = SENSOR_HEADER
        .iter()
        .map(|name| column_index(&headers, name))
        .collect::<Result<_>>()?;

    let mut records = Vec::new();
    let mut latest: Option<DateTime<Utc>> = None;
    for row in rdr.records() {
        let row = row?;
        let line = line_of(&row);
        let ts_cell = row.get(idx[0]).unwrap_or("");
        let timestamp = parse_time(ts_cell).ok_or_else(|| Error::Parse {
            line,
            message: format!("unparseable timestamp `{ts_cell}`"),
        })?;
        if let Some(max) = latest {
            if timestamp < max - options.reorder_tolerance {
                return Err(Error::NonMonotone {
                    line,
                    timestamp: ts_cell.to_string(),
                });
            }
        }
        latest = Some(latest.map_or(timestamp, |m| m.max(timestamp)));
        records.push(RawSensorRecord {
            timestamp,
            wind_speed: nonnegative(parse_cell(row.get(idx[1]))),
            wind_direction: direction(parse_cell(row.get(idx[2]))),
            solar_irradiance: nonnegative(parse_cell(row.get(idx[3]))),
            temperature: parse_cell(row.get(idx[4])),
            pluviometry: nonnegative(parse_cell(row.get(idx[5]))),
        });
    }
    // stable sort keeps file order among equal timestamps, so the last of a
    // run is the last row in the file
    records.sort_by_key(|r| r.timestamp);
    let mut out: Vec<RawSensorRecord> = Vec::with_capacity(records.len());
    for r in records {
        match out.last_mut() {
            Some(prev) if prev.timestamp == r.timestamp => *prev = r,
            _ => out.push(r),
        }
    }
    Ok(out)
}

pub fn read_sensor_csv(path: impl AsRef<Path>, options: ParseOptions) -> Result<Vec<RawSensorRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_sensor_csv(std::io::BufReader::new(file), options)
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_sensor_csv<W: Write>(writer: W, records: &[RawSensorRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SENSOR_HEADER)?;
    for r in records {
        w.write_record([
            format_time(r.timestamp),
            cell(r.wind_speed),
            cell(r.wind_direction),
            cell(r.solar_irradiance),
            cell(r.temperature),
            cell(r.pluviometry),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<sensor csv>", e))?;
    Ok(())
}

/// Parses the official forecast CSV; rows are grouped by `issue_time` and
/// each issuance must carry exactly 48 hourly rows.
pub fn parse_forecast_csv<R: Read>(reader: R) -> Result<Vec<OfficialForecast>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let idx: Vec<usize> = FORECAST_HEADER
        .iter()
        .map(|name| column_index(&headers, name))
        .collect::<Result<_>>()?;

    let mut groups: BTreeMap<DateTime<Utc>, Vec<ForecastHour>> = BTreeMap::new();
    for row in rdr.records() {
        let row = row?;
        let line = line_of(&row);
        let time = |i: usize| {
            let c = row.get(idx[i]).unwrap_or("");
            parse_time(c).ok_or_else(|| Error::Parse {
                line,
                message: format!("unparseable time `{c}`"),
            })
        };
        let num = |i: usize| {
            parse_cell(row.get(idx[i])).ok_or_else(|| Error::Parse {
                line,
                message: format!("missing or malformed `{}`", FORECAST_HEADER[i]),
            })
        };
        let issue = time(0)?;
        let dir = num(3)?;
        groups.entry(issue).or_default().push(ForecastHour {
            valid_time: time(1)?,
            wind_speed: num(2)?.max(0.0),
            wind_direction: dir.rem_euclid(360.0) % 360.0,
            pluviometry: num(4)?,
            solar_irradiance: num(5)?,
            temperature: num(6)?,
        });
    }
    groups
        .into_iter()
        .map(|(issue, mut hours)| {
            hours.sort_by_key(|h| h.valid_time);
            OfficialForecast::new(issue, hours)
        })
        .collect()
}

pub fn read_forecast_csv(path: impl AsRef<Path>) -> Result<Vec<OfficialForecast>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_forecast_csv(std::io::BufReader::new(file))
}

pub fn write_forecast_csv<W: Write>(writer: W, forecasts: &[OfficialForecast]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(FORECAST_HEADER)?;
    for f in forecasts {
        let issue = format_time(f.issue_time);
        for h in &f.hours {
            w.write_record([
                issue.clone(),
                format_time(h.valid_time),
                h.wind_speed.to_string(),
                h.wind_direction.to_string(),
                h.pluviometry.to_string(),
                h.solar_irradiance.to_string(),
                h.temperature.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<forecast csv>", e))?;
    Ok(())
}

pub fn write_hourly_csv<W: Write>(writer: W, series: &HourlySeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HOURLY_HEADER)?;
    for (i, slot) in series.slots().iter().enumerate() {
        let ts = format_time(series.time_at(i));
        match slot {
            Some(h) => w.write_record([
                ts,
                h.wind_speed.to_string(),
                h.wind_direction.to_string(),
                h.solar_irradiance.to_string(),
                h.temperature.to_string(),
                h.pluviometry.to_string(),
                if h.imputed { "1" } else { "0" }.to_string(),
            ])?,
            None => w.write_record([ts.as_str(), "", "", "", "", "", ""])?,
        }
    }
    w.flush().map_err(|e| Error::io("<hourly csv>", e))?;
    Ok(())
}

pub fn read_hourly_csv(path: impl AsRef<Path>) -> Result<HourlySeries> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(std::io::BufReader::new(file));
    let headers = rdr.headers()?.clone();
    let idx: Vec<usize> = HOURLY_HEADER
        .iter()
        .map(|name| column_index(&headers, name))
        .collect::<Result<_>>()?;
    let mut start = None;
    let mut hours = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = line_of(&row);
        let c = row.get(idx[0]).unwrap_or("");
        let timestamp = parse_time(c).ok_or_else(|| Error::Parse {
            line,
            message: format!("unparseable timestamp `{c}`"),
        })?;
        let start = *start.get_or_insert(timestamp);
        if timestamp != start + Duration::hours(hours.len() as i64) {
            return Err(Error::Parse {
                line,
                message: "hourly file must list every hour in order".into(),
            });
        }
        let v: Vec<Option<f64>> = (1..6).map(|i| parse_cell(row.get(idx[i]))).collect();
        hours.push(match v.as_slice() {
            [Some(s), Some(d), Some(irr), Some(t), Some(r)] => Some(HourlyWeather {
                timestamp,
                wind_speed: *s,
                wind_direction: *d,
                solar_irradiance: *irr,
                temperature: *t,
                pluviometry: *r,
                imputed: row.get(idx[6]) == Some("1"),
            }),
            _ => None,
        });
    }
    HourlySeries::new(start.ok_or(Error::Empty("hourly csv"))?, hours)
}
