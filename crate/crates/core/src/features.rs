//! Tabular training rows.
//!
//! A row at base time `t` for lead `h` concatenates the present and the past
//! 48 hourly measurements, calendar phases of `t`, and the freshest official
//! forecast (issued at or before `t`) for the hour `t + h`. Targets are the
//! measured wind at `t + h`.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::OnceLock;

use chrono::{DateTime, Datelike, Duration, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{encode_cyclical, ForecastArchive, HourlySeries};
use crate::regress::Matrix;

/// Present hour plus 48 past hours.
pub const LAGS: usize = 49;
pub const FEATURE_COUNT: usize = 304;

pub const SPEED_LAGS: usize = 0;
pub const DIR_COS_LAGS: usize = LAGS;
pub const DIR_SIN_LAGS: usize = 2 * LAGS;
pub const IRRADIANCE_LAGS: usize = 3 * LAGS;
pub const TEMPERATURE_LAGS: usize = 4 * LAGS;
pub const PLUVIOMETRY_LAGS: usize = 5 * LAGS;
pub const DAY_COS: usize = 6 * LAGS;
pub const DAY_SIN: usize = DAY_COS + 1;
pub const HOUR_COS: usize = DAY_COS + 2;
pub const HOUR_SIN: usize = DAY_COS + 3;
pub const OFFICIAL_SPEED: usize = DAY_COS + 4;
pub const OFFICIAL_DIR_COS: usize = OFFICIAL_SPEED + 1;
pub const OFFICIAL_DIR_SIN: usize = OFFICIAL_SPEED + 2;
pub const OFFICIAL_PLUVIOMETRY: usize = OFFICIAL_SPEED + 3;
pub const OFFICIAL_IRRADIANCE: usize = OFFICIAL_SPEED + 4;
pub const OFFICIAL_TEMPERATURE: usize = OFFICIAL_SPEED + 5;

const DAY_PERIOD: f64 = 365.0;
const HOUR_PERIOD: f64 = 24.0;

/// The three regression targets; direction is learned as its cos/sin pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Speed,
    DirCos,
    DirSin,
}

impl Target {
    pub const ALL: [Target; 3] = [Target::Speed, Target::DirCos, Target::DirSin];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Target::Speed => "speed",
            Target::DirCos => "dir_cos",
            Target::DirSin => "dir_sin",
        }
    }
}

/// Stable, ordered feature names.
pub fn feature_names() -> &'static [String] {
    static NAMES: OnceLock<Vec<String>> = OnceLock::new();
    NAMES.get_or_init(|| {
        let mut names = Vec::with_capacity(FEATURE_COUNT);
        for block in [
            "wind_speed",
            "wind_dir_cos",
            "wind_dir_sin",
            "solar_irradiance",
            "temperature",
            "pluviometry",
        ] {
            for lag in (0..LAGS).rev() {
                names.push(format!("{block}_lag{lag}"));
            }
        }
        for n in [
            "day_of_year_cos",
            "day_of_year_sin",
            "hour_of_day_cos",
            "hour_of_day_sin",
            "official_wind_speed",
            "official_wind_dir_cos",
            "official_wind_dir_sin",
            "official_pluviometry",
            "official_solar_irradiance",
            "official_temperature",
        ] {
            names.push(n.to_string());
        }
        debug_assert_eq!(names.len(), FEATURE_COUNT);
        names
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(Vec<f64>);

impl From<Vec<f64>> for FeatureVector {
    fn from(v: Vec<f64>) -> Self {
        FeatureVector(v)
    }
}

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRow {
    pub base_time: DateTime<Utc>,
    pub lead_time: u32,
    pub features: FeatureVector,
    /// speed, dir_cos, dir_sin at `base_time + lead_time`
    pub targets: [f64; 3],
    pub forecast_issue: DateTime<Utc>,
}

impl LabeledRow {
    pub fn target(&self, target: Target) -> f64 {
        self.targets[target.index()]
    }

    pub fn valid_time(&self) -> DateTime<Utc> {
        self.base_time + Duration::hours(self.lead_time as i64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTag {
    Full,
    Train,
    Validation,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub lead_time: u32,
    pub split: SplitTag,
    pub rows: Vec<LabeledRow>,
    /// Base times that could not be turned into a row.
    pub skipped: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn matrix(&self) -> Matrix {
        let width = self.rows.first().map_or(FEATURE_COUNT, |r| r.features.len());
        let mut data = Vec::with_capacity(self.rows.len() * width);
        for r in &self.rows {
            data.extend_from_slice(r.features.as_slice());
        }
        Matrix::new(self.rows.len(), width, data).expect("rows have a common width")
    }

    pub fn targets(&self, target: Target) -> Vec<f64> {
        self.rows.iter().map(|r| r.target(target)).collect()
    }

    /// Columnar CSV: base_time, lead_time, the feature columns, then targets.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["base_time".to_string(), "lead_time".to_string()];
        header.extend(feature_names().iter().cloned());
        header.extend(Target::ALL.iter().map(|t| format!("target_{}", t.name())));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                crate::ingest::format_time(r.base_time),
                r.lead_time.to_string(),
            ];
            rec.extend(r.features.as_slice().iter().map(|v| v.to_string()));
            rec.extend(r.targets.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<dataset csv>", e))?;
        Ok(())
    }
}

fn not_constructible(t: DateTime<Utc>, reason: impl Into<String>) -> Error {
    Error::RowNotConstructible {
        time: t.to_rfc3339(),
        reason: reason.into(),
    }
}

/// Day-of-year phase; the leap day shares day 365's phase.
pub fn calendar_features(t: DateTime<Utc>) -> [f64; 4] {
    let day = t.ordinal().min(365) as f64;
    let (dc, ds) = encode_cyclical(day, DAY_PERIOD);
    let (hc, hs) = encode_cyclical(t.hour() as f64, HOUR_PERIOD);
    [dc, ds, hc, hs]
}

/// Builds the feature vector for base time `t` and lead `h`. Returns the
/// vector and the issue time of the forecast it used.
pub fn build_feature_vector(
    series: &HourlySeries,
    archive: &ForecastArchive,
    t: DateTime<Utc>,
    lead: u32,
) -> Result<(FeatureVector, DateTime<Utc>)> {
    let end = series
        .index_of(t)
        .ok_or_else(|| not_constructible(t, "base time outside the hourly series"))?;
    if end + 1 < LAGS {
        return Err(not_constructible(t, "fewer than 49 hours of history"));
    }
    let window = &series.slots()[end + 1 - LAGS..=end];
    if window.iter().any(Option::is_none) {
        return Err(not_constructible(t, "history window overlaps an unfilled gap"));
    }
    let (issuance, fc) = archive
        .lookup(t, t + Duration::hours(lead as i64))
        .ok_or_else(|| not_constructible(t, format!("no official forecast covering t+{lead}")))?;

    let mut v = vec![0.0; FEATURE_COUNT];
    for (k, w) in window.iter().flatten().enumerate() {
        let (c, s) = encode_cyclical(w.wind_direction, 360.0);
        v[SPEED_LAGS + k] = w.wind_speed;
        v[DIR_COS_LAGS + k] = c;
        v[DIR_SIN_LAGS + k] = s;
        v[IRRADIANCE_LAGS + k] = w.solar_irradiance;
        v[TEMPERATURE_LAGS + k] = w.temperature;
        v[PLUVIOMETRY_LAGS + k] = w.pluviometry;
    }
    v[DAY_COS..DAY_COS + 4].copy_from_slice(&calendar_features(t));
    let (c, s) = encode_cyclical(fc.wind_direction, 360.0);
    v[OFFICIAL_SPEED] = fc.wind_speed;
    v[OFFICIAL_DIR_COS] = c;
    v[OFFICIAL_DIR_SIN] = s;
    v[OFFICIAL_PLUVIOMETRY] = fc.pluviometry;
    v[OFFICIAL_IRRADIANCE] = fc.solar_irradiance;
    v[OFFICIAL_TEMPERATURE] = fc.temperature;
    Ok((FeatureVector(v), issuance.issue_time))
}

fn build_one(series: &HourlySeries, archive: &ForecastArchive, lead: u32) -> Dataset {
    let slots = series.slots();
    let n = slots.len();
    // prefix count of missing slots for O(1) window checks
    let mut missing = vec![0usize; n + 1];
    for (i, s) in slots.iter().enumerate() {
        missing[i + 1] = missing[i] + s.is_none() as usize;
    }
    let h = lead as usize;
    let mut rows = Vec::new();
    let mut skipped = 0;
    if n >= LAGS + h {
        for end in LAGS - 1..n - h {
            let start = end + 1 - LAGS;
            let target = &slots[end + h];
            if missing[end + 1] - missing[start] > 0 || target.is_none() {
                skipped += 1;
                continue;
            }
            let t = series.time_at(end);
            match build_feature_vector(series, archive, t, lead) {
                Ok((features, forecast_issue)) => {
                    let y = target.as_ref().unwrap();
                    let (c, s) = encode_cyclical(y.wind_direction, 360.0);
                    rows.push(LabeledRow {
                        base_time: t,
                        lead_time: lead,
                        features,
                        targets: [y.wind_speed, c, s],
                        forecast_issue,
                    });
                }
                Err(_) => skipped += 1,
            }
        }
    }
    if rows.is_empty() {
        log::warn!("lead {lead}: no constructible rows");
    }
    Dataset {
        lead_time: lead,
        split: SplitTag::Full,
        rows,
        skipped,
    }
}

/// One time-ordered dataset per lead time.
pub fn build_dataset(
    series: &HourlySeries,
    archive: &ForecastArchive,
    lead_times: &[u32],
) -> Result<BTreeMap<u32, Dataset>> {
    let mut out = BTreeMap::new();
    for &lead in lead_times {
        if lead == 0 {
            return Err(Error::invalid("lead time must be >= 1"));
        }
        out.insert(lead, build_one(series, archive, lead));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.6,
            validation: 0.2,
            test: 0.2,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let all = [self.train, self.validation, self.test];
        if all.iter().any(|f| !(*f > 0.0)) || ((all.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "split fractions must be positive and sum to 1, got {all:?}"
            )));
        }
        Ok(())
    }

    /// Train and validation cut indices for `n` rows (floor at both cuts).
    pub fn cuts(&self, n: usize) -> (usize, usize) {
        let nf = n as f64;
        let a = (self.train * nf + 1e-9).floor() as usize;
        let b = ((self.train + self.validation) * nf + 1e-9).floor() as usize;
        (a.min(n), b.min(n))
    }
}

/// Time-ordered split into (train, validation, test).
pub fn chronological_split(
    dataset: &Dataset,
    fractions: SplitFractions,
) -> Result<(Dataset, Dataset, Dataset)> {
    fractions.validate()?;
    if dataset.rows.len() < 5 {
        return Err(Error::invalid(format!(
            "lead {}: {} rows is too few to split",
            dataset.lead_time,
            dataset.rows.len()
        )));
    }
    let mut rows = dataset.rows.clone();
    rows.sort_by_key(|r| r.base_time);
    let (a, b) = fractions.cuts(rows.len());
    let test = rows.split_off(b);
    let validation = rows.split_off(a);
    let mk = |rows, split| Dataset {
        lead_time: dataset.lead_time,
        split,
        rows,
        skipped: 0,
    };
    Ok((
        mk(rows, SplitTag::Train),
        mk(validation, SplitTag::Validation),
        mk(test, SplitTag::Test),
    ))
}

/// Train/validation/test partition of one lead time's dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
}

/// Splits every lead time's dataset with the same fractions.
pub fn split_all(
    datasets: &BTreeMap<u32, Dataset>,
    fractions: SplitFractions,
) -> Result<BTreeMap<u32, Splits>> {
    datasets
        .iter()
        .map(|(&lead, ds)| {
            let (train, validation, test) = chronological_split(ds, fractions)?;
            Ok((
                lead,
                Splits {
                    train,
                    validation,
                    test,
                },
            ))
        })
        .collect()
}
