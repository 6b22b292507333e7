//! Sensor and official-forecast ingestion.
//!
//! Minute-level sensor records are regularized onto a minute grid, short
//! gaps are filled by linear interpolation, and each clock hour is reduced to
//! one [`HourlyWeather`]. Wind is averaged as a vector so opposing winds
//! cancel; the other quantities use the arithmetic mean.

mod io;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use chrono::{DateTime, Duration, DurationRound, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) use io::format_time;
pub use io::{
    parse_forecast_csv, parse_sensor_csv, read_forecast_csv, read_hourly_csv, read_sensor_csv,
    write_forecast_csv, write_hourly_csv, write_sensor_csv, ParseOptions,
};

/// Resultant speeds below this are treated as calm and get direction 0.
pub const CALM_EPSILON: f64 = 1e-9;
/// Pairs closer than this to the origin carry no direction.
pub const DIRECTION_EPSILON: f64 = 1e-12;

/// Default interpolation cap for minute series (in samples).
pub const DEFAULT_MAX_GAP_MINUTES: usize = 120;
/// Default interpolation cap for hourly series (in samples).
pub const DEFAULT_MAX_GAP_HOURS: usize = 6;

pub const FORECAST_HOURS: usize = 48;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSensorRecord {
    pub timestamp: DateTime<Utc>,
    pub wind_speed: Option<f64>,
    pub wind_direction: Option<f64>,
    pub solar_irradiance: Option<f64>,
    pub temperature: Option<f64>,
    pub pluviometry: Option<f64>,
}

impl RawSensorRecord {
    pub fn empty(timestamp: DateTime<Utc>) -> Self {
        RawSensorRecord {
            timestamp,
            wind_speed: None,
            wind_direction: None,
            solar_irradiance: None,
            temperature: None,
            pluviometry: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastHour {
    pub valid_time: DateTime<Utc>,
    pub wind_speed: f64,
    pub wind_direction: f64,
    pub pluviometry: f64,
    pub solar_irradiance: f64,
    pub temperature: f64,
}

/// One issuance of the official forecast: 48 hourly values after `issue_time`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfficialForecast {
    pub issue_time: DateTime<Utc>,
    pub hours: Vec<ForecastHour>,
}

impl OfficialForecast {
    pub fn new(issue_time: DateTime<Utc>, hours: Vec<ForecastHour>) -> Result<Self> {
        if hours.len() != FORECAST_HOURS {
            return Err(Error::invalid(format!(
                "issuance {issue_time} has {} hourly entries, expected {FORECAST_HOURS}",
                hours.len()
            )));
        }
        for (k, h) in hours.iter().enumerate() {
            if h.valid_time != issue_time + Duration::hours(k as i64 + 1) {
                return Err(Error::invalid(format!(
                    "issuance {issue_time}: entry {k} is valid at {}, expected hourly steps",
                    h.valid_time
                )));
            }
        }
        Ok(OfficialForecast { issue_time, hours })
    }

    /// Entry valid at `valid_time`, if within this issuance's 48 hours.
    pub fn at(&self, valid_time: DateTime<Utc>) -> Option<&ForecastHour> {
        let h = (valid_time - self.issue_time).num_hours();
        if (valid_time - self.issue_time) != Duration::hours(h) || !(1..=48).contains(&h) {
            return None;
        }
        self.hours.get(h as usize - 1)
    }
}

/// Issuances ordered by issue time, with "latest available at t" lookups.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ForecastArchive {
    issuances: Vec<OfficialForecast>,
}

impl ForecastArchive {
    pub fn new(mut issuances: Vec<OfficialForecast>) -> Self {
        issuances.sort_by_key(|f| f.issue_time);
        issuances.dedup_by(|later, earlier| {
            if later.issue_time == earlier.issue_time {
                std::mem::swap(later, earlier);
                true
            } else {
                false
            }
        });
        ForecastArchive { issuances }
    }

    pub fn issuances(&self) -> &[OfficialForecast] {
        &self.issuances
    }

    pub fn len(&self) -> usize {
        self.issuances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.issuances.is_empty()
    }

    pub fn push(&mut self, forecast: OfficialForecast) {
        match self
            .issuances
            .binary_search_by_key(&forecast.issue_time, |f| f.issue_time)
        {
            Ok(i) => self.issuances[i] = forecast,
            Err(i) => self.issuances.insert(i, forecast),
        }
    }

    /// Freshest issuance with `issue_time <= t`.
    pub fn latest_at(&self, t: DateTime<Utc>) -> Option<&OfficialForecast> {
        let idx = self.issuances.partition_point(|f| f.issue_time <= t);
        idx.checked_sub(1).map(|i| &self.issuances[i])
    }

    /// Value for `valid_time` from the freshest issuance available at `t`.
    pub fn lookup(
        &self,
        t: DateTime<Utc>,
        valid_time: DateTime<Utc>,
    ) -> Option<(&OfficialForecast, &ForecastHour)> {
        let issuance = self.latest_at(t)?;
        issuance.at(valid_time).map(|h| (issuance, h))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HourlyWeather {
    pub timestamp: DateTime<Utc>,
    pub wind_speed: f64,
    pub wind_direction: f64,
    pub solar_irradiance: f64,
    pub temperature: f64,
    pub pluviometry: f64,
    pub imputed: bool,
}

/// An aggregated clock hour before hourly gap filling; `None` fields had no
/// contributing minutes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HourlyObservation {
    pub timestamp: DateTime<Utc>,
    pub wind_speed: Option<f64>,
    pub wind_direction: Option<f64>,
    pub solar_irradiance: Option<f64>,
    pub temperature: Option<f64>,
    pub pluviometry: Option<f64>,
}

/// Regular hourly grid starting at `start`. `None` slots are gaps that were
/// too long to interpolate.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlySeries {
    start: DateTime<Utc>,
    hours: Vec<Option<HourlyWeather>>,
}

impl HourlySeries {
    pub fn new(start: DateTime<Utc>, hours: Vec<Option<HourlyWeather>>) -> Result<Self> {
        if truncate_hour(start) != start {
            return Err(Error::invalid(format!("series start {start} is not on the hour")));
        }
        for (i, h) in hours.iter().enumerate() {
            if let Some(w) = h {
                if w.timestamp != start + Duration::hours(i as i64) {
                    return Err(Error::invalid(format!(
                        "hour {i} carries timestamp {}, expected {}",
                        w.timestamp,
                        start + Duration::hours(i as i64)
                    )));
                }
            }
        }
        Ok(HourlySeries { start, hours })
    }

    /// Builds a gap-free series from contiguous hourly records.
    pub fn from_contiguous(records: Vec<HourlyWeather>) -> Result<Self> {
        let start = records
            .first()
            .ok_or(Error::Empty("hourly records"))?
            .timestamp;
        HourlySeries::new(start, records.into_iter().map(Some).collect())
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.start
    }

    pub fn len(&self) -> usize {
        self.hours.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hours.is_empty()
    }

    pub fn slots(&self) -> &[Option<HourlyWeather>] {
        &self.hours
    }

    pub fn time_at(&self, index: usize) -> DateTime<Utc> {
        self.start + Duration::hours(index as i64)
    }

    pub fn index_of(&self, t: DateTime<Utc>) -> Option<usize> {
        let d = t - self.start;
        let h = d.num_hours();
        if d != Duration::hours(h) || h < 0 || h as usize >= self.hours.len() {
            None
        } else {
            Some(h as usize)
        }
    }

    pub fn get(&self, t: DateTime<Utc>) -> Option<&HourlyWeather> {
        self.index_of(t).and_then(|i| self.hours[i].as_ref())
    }

    pub fn missing_hours(&self) -> usize {
        self.hours.iter().filter(|h| h.is_none()).count()
    }

    pub fn present(&self) -> impl Iterator<Item = &HourlyWeather> {
        self.hours.iter().flatten()
    }

    pub fn slice(&self, from: usize, to: usize) -> HourlySeries {
        HourlySeries {
            start: self.time_at(from),
            hours: self.hours[from..to].to_vec(),
        }
    }
}

pub fn truncate_hour(t: DateTime<Utc>) -> DateTime<Utc> {
    t.duration_trunc(Duration::hours(1)).expect("hour truncation")
}

pub fn truncate_minute(t: DateTime<Utc>) -> DateTime<Utc> {
    t.duration_trunc(Duration::minutes(1))
        .expect("minute truncation")
}

// ---------------------------------------------------------------------------
// circular helpers
// ---------------------------------------------------------------------------

/// Cartesian wind components `(u, v) = (s·sin θ, s·cos θ)`.
pub fn wind_components(speed: f64, direction_deg: f64) -> (f64, f64) {
    let rad = direction_deg * PI / 180.0;
    (speed * rad.sin(), speed * rad.cos())
}

fn wrap_degrees(deg: f64) -> f64 {
    let d = deg.rem_euclid(360.0);
    if d >= 360.0 {
        0.0
    } else {
        d
    }
}

/// Mean wind of a set of `(speed, direction)` samples by component averaging.
pub fn vector_average(samples: &[(f64, f64)]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::Empty("vector_average samples"));
    }
    let n = samples.len() as f64;
    let (su, sv) = samples.iter().fold((0.0, 0.0), |(su, sv), &(s, d)| {
        let (u, v) = wind_components(s, d);
        (su + u, sv + v)
    });
    let (u, v) = (su / n, sv / n);
    let speed = u.hypot(v);
    if speed < CALM_EPSILON {
        return Ok((0.0, 0.0));
    }
    Ok((speed, wrap_degrees(u.atan2(v).to_degrees())))
}

/// `(cos(2π·value/period), sin(2π·value/period))`.
pub fn encode_cyclical(value: f64, period: f64) -> (f64, f64) {
    debug_assert!(period > 0.0);
    let phase = 2.0 * PI * value / period;
    (phase.cos(), phase.sin())
}

/// Direction in `[0, 360)` from a (possibly unnormalized) cos/sin pair.
pub fn decode_direction(cos: f64, sin: f64) -> Result<f64> {
    if !cos.is_finite() || !sin.is_finite() {
        return Err(Error::NonFinite("direction components"));
    }
    if cos.abs() < DIRECTION_EPSILON && sin.abs() < DIRECTION_EPSILON {
        return Err(Error::DirectionUndefined);
    }
    Ok(wrap_degrees(sin.atan2(cos).to_degrees()))
}

// ---------------------------------------------------------------------------
// imputation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImputedPoint {
    pub timestamp: DateTime<Utc>,
    pub value: Option<f64>,
    pub imputed: bool,
}

/// A run of missing samples that was left unfilled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Gap {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    pub len: usize,
    /// Gap touches the start or end of the series (no anchor on one side).
    pub boundary: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Imputation {
    pub points: Vec<ImputedPoint>,
    pub unfilled: Vec<Gap>,
}

/// Fills interior runs of at most `max_gap` missing samples by linear
/// interpolation in time between the nearest present neighbours.
pub fn impute_linear(
    series: &[(DateTime<Utc>, Option<f64>)],
    max_gap: usize,
) -> Result<Imputation> {
    if !series.iter().any(|(_, v)| v.is_some()) {
        return Err(Error::NothingToAnchor);
    }
    let mut points: Vec<ImputedPoint> = series
        .iter()
        .map(|&(timestamp, value)| ImputedPoint {
            timestamp,
            value,
            imputed: false,
        })
        .collect();
    let mut unfilled = Vec::new();

    let mut i = 0;
    while i < points.len() {
        if points[i].value.is_some() {
            i += 1;
            continue;
        }
        let run_start = i;
        while i < points.len() && points[i].value.is_none() {
            i += 1;
        }
        let run_end = i; // exclusive
        let len = run_end - run_start;
        let boundary = run_start == 0 || run_end == points.len();
        if boundary || len > max_gap {
            unfilled.push(Gap {
                start: points[run_start].timestamp,
                end: points[run_end - 1].timestamp,
                len,
                boundary,
            });
            continue;
        }
        let (t0, v0) = (
            points[run_start - 1].timestamp,
            points[run_start - 1].value.unwrap(),
        );
        let (t1, v1) = (points[run_end].timestamp, points[run_end].value.unwrap());
        let span = (t1 - t0).num_milliseconds() as f64;
        for p in &mut points[run_start..run_end] {
            let w = (p.timestamp - t0).num_milliseconds() as f64 / span;
            p.value = Some(v0 + (v1 - v0) * w);
            p.imputed = true;
        }
    }
    Ok(Imputation { points, unfilled })
}

/// Imputes a direction series through its unit-vector components so that
/// interpolation follows the short arc.
fn impute_direction(
    series: &[(DateTime<Utc>, Option<f64>)],
    max_gap: usize,
) -> Result<Vec<(Option<f64>, bool)>> {
    let cos: Vec<_> = series
        .iter()
        .map(|&(t, d)| (t, d.map(|d| d.to_radians().cos())))
        .collect();
    let sin: Vec<_> = series
        .iter()
        .map(|&(t, d)| (t, d.map(|d| d.to_radians().sin())))
        .collect();
    let cos = impute_linear(&cos, max_gap)?;
    let sin = impute_linear(&sin, max_gap)?;
    Ok(series
        .iter()
        .zip(cos.points.iter().zip(&sin.points))
        .map(|(&(_, orig), (c, s))| match orig {
            Some(d) => (Some(d), false),
            None => match (c.value, s.value) {
                (Some(c), Some(s)) => (Some(decode_direction(c, s).unwrap_or(0.0)), true),
                _ => (None, false),
            },
        })
        .collect())
}

fn impute_field(
    series: &[(DateTime<Utc>, Option<f64>)],
    max_gap: usize,
) -> Vec<(Option<f64>, bool)> {
    match impute_linear(series, max_gap) {
        Ok(imp) => imp.points.into_iter().map(|p| (p.value, p.imputed)).collect(),
        Err(_) => series.iter().map(|_| (None, false)).collect(),
    }
}

fn impute_direction_field(
    series: &[(DateTime<Utc>, Option<f64>)],
    max_gap: usize,
) -> Vec<(Option<f64>, bool)> {
    impute_direction(series, max_gap).unwrap_or_else(|_| series.iter().map(|_| (None, false)).collect())
}

// ---------------------------------------------------------------------------
// minute -> hour
// ---------------------------------------------------------------------------

/// Places records on a complete minute grid (first to last minute) and fills
/// short gaps in every field. Records sharing a minute keep the last one.
pub fn regularize_minutes(records: &[RawSensorRecord], max_gap: usize) -> Vec<RawSensorRecord> {
    let Some(first) = records.first() else {
        return Vec::new();
    };
    let start = truncate_minute(first.timestamp);
    let end = records
        .iter()
        .map(|r| truncate_minute(r.timestamp))
        .max()
        .unwrap();
    let n = ((end - start).num_minutes() + 1) as usize;
    let mut grid: Vec<RawSensorRecord> = (0..n)
        .map(|i| RawSensorRecord::empty(start + Duration::minutes(i as i64)))
        .collect();
    for r in records {
        let i = (truncate_minute(r.timestamp) - start).num_minutes();
        if i >= 0 {
            let ts = grid[i as usize].timestamp;
            grid[i as usize] = RawSensorRecord {
                timestamp: ts,
                ..r.clone()
            };
        }
    }
    impute_records(&mut grid, max_gap);
    grid
}

fn impute_records(grid: &mut [RawSensorRecord], max_gap: usize) {
    fn column(
        grid: &[RawSensorRecord],
        f: impl Fn(&RawSensorRecord) -> Option<f64>,
    ) -> Vec<(DateTime<Utc>, Option<f64>)> {
        grid.iter().map(|r| (r.timestamp, f(r))).collect()
    }
    let speed = impute_field(&column(grid, |r| r.wind_speed), max_gap);
    let dir = impute_direction_field(&column(grid, |r| r.wind_direction), max_gap);
    let irr = impute_field(&column(grid, |r| r.solar_irradiance), max_gap);
    let temp = impute_field(&column(grid, |r| r.temperature), max_gap);
    let rain = impute_field(&column(grid, |r| r.pluviometry), max_gap);
    for (i, r) in grid.iter_mut().enumerate() {
        r.wind_speed = speed[i].0;
        r.wind_direction = dir[i].0;
        r.solar_irradiance = irr[i].0;
        r.temperature = temp[i].0;
        r.pluviometry = rain[i].0;
    }
}

/// Reduces records to one observation per clock hour, covering every hour
/// from the first record's hour to the last record's hour.
pub fn aggregate_hourly(records: &[RawSensorRecord]) -> Vec<HourlyObservation> {
    #[derive(Default)]
    struct Acc {
        wind: Vec<(f64, f64)>,
        irr: (f64, usize),
        temp: (f64, usize),
        rain: (f64, usize),
    }
    fn add(acc: &mut (f64, usize), v: Option<f64>) {
        if let Some(v) = v {
            acc.0 += v;
            acc.1 += 1;
        }
    }
    fn mean(acc: (f64, usize)) -> Option<f64> {
        (acc.1 > 0).then(|| acc.0 / acc.1 as f64)
    }

    let Some(first) = records.iter().map(|r| r.timestamp).min() else {
        return Vec::new();
    };
    let last = records.iter().map(|r| r.timestamp).max().unwrap();
    let (h0, h1) = (truncate_hour(first), truncate_hour(last));

    let mut buckets: BTreeMap<DateTime<Utc>, Acc> = BTreeMap::new();
    for r in records {
        let acc = buckets.entry(truncate_hour(r.timestamp)).or_default();
        match (r.wind_speed, r.wind_direction) {
            (Some(s), Some(d)) => acc.wind.push((s, d)),
            (Some(s), None) if s == 0.0 => acc.wind.push((0.0, 0.0)),
            _ => {}
        }
        add(&mut acc.irr, r.solar_irradiance);
        add(&mut acc.temp, r.temperature);
        add(&mut acc.rain, r.pluviometry);
    }

    let n = ((h1 - h0).num_hours() + 1) as usize;
    (0..n)
        .map(|i| {
            let timestamp = h0 + Duration::hours(i as i64);
            match buckets.remove(&timestamp) {
                None => HourlyObservation {
                    timestamp,
                    wind_speed: None,
                    wind_direction: None,
                    solar_irradiance: None,
                    temperature: None,
                    pluviometry: None,
                },
                Some(acc) => {
                    let wind = vector_average(&acc.wind).ok();
                    HourlyObservation {
                        timestamp,
                        wind_speed: wind.map(|w| w.0),
                        wind_direction: wind.map(|w| w.1),
                        solar_irradiance: mean(acc.irr),
                        temperature: mean(acc.temp),
                        pluviometry: mean(acc.rain),
                    }
                }
            }
        })
        .collect()
}

/// Fills short hourly gaps and returns the regular hourly grid. An hour is
/// usable only when all five quantities are available after imputation.
pub fn fill_hourly(observations: &[HourlyObservation], max_gap_hours: usize) -> Result<HourlySeries> {
    let first = observations.first().ok_or(Error::Empty("hourly observations"))?;
    fn column(
        obs: &[HourlyObservation],
        f: impl Fn(&HourlyObservation) -> Option<f64>,
    ) -> Vec<(DateTime<Utc>, Option<f64>)> {
        obs.iter().map(|o| (o.timestamp, f(o))).collect()
    }
    let speed = impute_field(&column(observations, |o| o.wind_speed), max_gap_hours);
    let dir = impute_direction_field(&column(observations, |o| o.wind_direction), max_gap_hours);
    let irr = impute_field(&column(observations, |o| o.solar_irradiance), max_gap_hours);
    let temp = impute_field(&column(observations, |o| o.temperature), max_gap_hours);
    let rain = impute_field(&column(observations, |o| o.pluviometry), max_gap_hours);

    let hours = observations
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let (s, si) = speed[i];
            let (d, di) = dir[i];
            let (irr_v, ii) = irr[i];
            let (t, ti) = temp[i];
            let (r, ri) = rain[i];
            let (s, d, irr_v, t, r) = (s?, d?, irr_v?, t?, r?);
            let calm = s < CALM_EPSILON;
            Some(HourlyWeather {
                timestamp: o.timestamp,
                wind_speed: if calm { 0.0 } else { s.max(0.0) },
                wind_direction: if calm { 0.0 } else { wrap_degrees(d) },
                solar_irradiance: irr_v.max(0.0),
                temperature: t,
                pluviometry: r.max(0.0),
                imputed: si || di || ii || ti || ri,
            })
        })
        .collect();
    HourlySeries::new(truncate_hour(first.timestamp), hours)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestOptions {
    pub max_gap_minutes: usize,
    pub max_gap_hours: usize,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            max_gap_minutes: DEFAULT_MAX_GAP_MINUTES,
            max_gap_hours: DEFAULT_MAX_GAP_HOURS,
        }
    }
}

/// Minute records to a gap-annotated hourly series.
pub fn ingest_minutes(records: &[RawSensorRecord], options: IngestOptions) -> Result<HourlySeries> {
    if records.is_empty() {
        return Err(Error::Empty("sensor records"));
    }
    let grid = regularize_minutes(records, options.max_gap_minutes);
    let hourly = aggregate_hourly(&grid);
    fill_hourly(&hourly, options.max_gap_hours)
}
