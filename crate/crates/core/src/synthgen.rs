//! Synthetic sensor world and lagged, noisy official forecasts.
//!
//! The hourly latent weather is a two-regime process. In the prevailing
//! regime wind blows from the favorable sector; the "southerly" regime pulls
//! the direction toward south and the speed toward calm, which produces
//! clustered dangerous spells. The regime entry probability is tuned by
//! bisection so the dangerous-hour fraction lands near the target.
//!
//! Draw order (one ChaCha8 generator per stream, seeded with `seed`):
//! * stream 0, per hour: regime uniform, speed normal, direction normal,
//!   cloud normal, temperature normal, rain-state uniform, rain amount
//!   exponential. Every hour draws all seven regardless of state.
//! * stream 1, per minute: gap uniform, gap length uniform, speed normal,
//!   direction normal, temperature normal.
//! * stream 2, per issuance and valid hour: speed, direction, temperature,
//!   irradiance, rain normals.

use std::f64::consts::PI;

use chrono::{DateTime, Datelike, Duration, TimeZone, Timelike, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ingest::{ForecastHour, HourlyWeather, OfficialForecast, RawSensorRecord, FORECAST_HOURS};
use crate::scenario::classify_scenario;
use crate::{Error, Result};

const TUNING_STEPS: usize = 40;
const MIN_ENTRY: f64 = 1e-6;
const MAX_ENTRY: f64 = 0.5;
const DWELL_STEP: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecastNoise {
    pub issue_lag_hours: u32,
    /// UTC hours at which issuances are published.
    pub issue_hours: Vec<u32>,
    pub speed_bias: f64,
    /// Noise sd at forecast horizons 1 and 48; linear in between and beyond.
    pub speed_sd_h1: f64,
    pub speed_sd_h48: f64,
    pub direction_bias: f64,
    pub direction_sd_h1: f64,
    pub direction_sd_h48: f64,
    pub temperature_sd: f64,
    /// Relative sd for irradiance and rain.
    pub relative_sd: f64,
    /// Correlation of successive valid hours' noise within one issuance.
    pub correlation: f64,
}

impl Default for ForecastNoise {
    fn default() -> Self {
        ForecastNoise {
            issue_lag_hours: 6,
            issue_hours: vec![6, 18],
            speed_bias: 0.4,
            speed_sd_h1: 1.0,
            speed_sd_h48: 2.0,
            direction_bias: 10.0,
            direction_sd_h1: 35.0,
            direction_sd_h48: 60.0,
            temperature_sd: 1.5,
            relative_sd: 0.2,
            correlation: 0.6,
        }
    }
}

impl ForecastNoise {
    /// Exact copy of the truth.
    pub fn none() -> Self {
        ForecastNoise {
            issue_lag_hours: 0,
            speed_bias: 0.0,
            speed_sd_h1: 0.0,
            speed_sd_h48: 0.0,
            direction_bias: 0.0,
            direction_sd_h1: 0.0,
            direction_sd_h48: 0.0,
            temperature_sd: 0.0,
            relative_sd: 0.0,
            ..ForecastNoise::default()
        }
    }

    fn sd(h1: f64, h48: f64, horizon: f64) -> f64 {
        (h1 + (h48 - h1) * (horizon - 1.0) / 47.0).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub hours: usize,
    pub start: DateTime<Utc>,
    pub dangerous_rate: f64,
    pub speed_mean: f64,
    pub speed_ar: f64,
    pub speed_noise: f64,
    pub diurnal_amplitude: f64,
    /// Speed mean while the southerly regime holds.
    pub calm_speed_mean: f64,
    pub prevailing_direction: f64,
    pub southerly_direction: f64,
    /// Per-hour pull of the direction toward the regime's mean (0..1).
    pub direction_reversion: f64,
    pub direction_step_sd: f64,
    /// Mean length of a southerly spell (hours).
    pub regime_dwell_hours: f64,
    /// Fixed entry probability; `None` tunes it to `dangerous_rate`.
    pub regime_entry_probability: Option<f64>,
    pub minute_speed_noise: f64,
    pub minute_direction_noise: f64,
    pub gap_probability: f64,
    pub max_gap_minutes: usize,
    pub forecast: ForecastNoise,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 0,
            hours: 2000,
            start: Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).unwrap(),
            dangerous_rate: 0.02,
            speed_mean: 3.5,
            speed_ar: 0.85,
            speed_noise: 0.6,
            diurnal_amplitude: 1.0,
            calm_speed_mean: 1.2,
            prevailing_direction: 20.0,
            southerly_direction: 180.0,
            direction_reversion: 0.35,
            direction_step_sd: 12.0,
            regime_dwell_hours: 8.0,
            regime_entry_probability: None,
            minute_speed_noise: 0.08,
            minute_direction_noise: 6.0,
            gap_probability: 2e-4,
            max_gap_minutes: 180,
            forecast: ForecastNoise::default(),
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dangerous_rate > 0.0 && self.dangerous_rate < 0.1) {
            return Err(Error::invalid(format!(
                "dangerous_rate must lie in (0, 0.1), got {}",
                self.dangerous_rate
            )));
        }
        if self.hours < 200 {
            return Err(Error::invalid(format!("duration must be ≥ 200 hours, got {}", self.hours)));
        }
        if self.start.minute() != 0 || self.start.second() != 0 || self.start.nanosecond() != 0 {
            return Err(Error::invalid("start must be on the hour"));
        }
        if !(0.0..1.0).contains(&self.speed_ar) || !(0.0..=1.0).contains(&self.direction_reversion) {
            return Err(Error::invalid("AR coefficients must lie in [0, 1)"));
        }
        if self.regime_dwell_hours < 1.0 {
            return Err(Error::invalid("regime_dwell_hours must be ≥ 1"));
        }
        if let Some(p) = self.regime_entry_probability {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("regime_entry_probability {p} outside [0, 1]")));
            }
        }
        if self.forecast.issue_hours.iter().any(|&h| h > 23) {
            return Err(Error::invalid("issue hours must lie in 0..=23"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWorld {
    pub minutes: Vec<RawSensorRecord>,
    /// Latent hourly truth, one entry per generated hour.
    pub truth: Vec<HourlyWeather>,
    pub southerly: Vec<bool>,
    pub regime_entry_probability: f64,
    pub regime_dwell_hours: f64,
    /// Dangerous-hour fraction of the latent truth.
    pub dangerous_rate: f64,
}

fn wrap(deg: f64) -> f64 {
    let d = deg.rem_euclid(360.0);
    if d >= 360.0 {
        0.0
    } else {
        d
    }
}

/// Signed shortest rotation from `from` to `to`, in (−180, 180].
fn angle_diff(to: f64, from: f64) -> f64 {
    let d = (to - from).rem_euclid(360.0);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

fn seasonal(t: DateTime<Utc>, peak_day: f64) -> f64 {
    (2.0 * PI * (t.ordinal() as f64 - peak_day) / 365.0).cos()
}

fn diurnal(t: DateTime<Utc>, peak_hour: f64) -> f64 {
    (2.0 * PI * (t.hour() as f64 - peak_hour) / 24.0).cos()
}

/// Daylight factor: positive strictly between 06:00 and 18:00, else 0.
fn daylight(t: DateTime<Utc>) -> f64 {
    let h = t.hour() as f64;
    if h > 6.0 && h < 18.0 {
        (PI * (h - 6.0) / 12.0).sin()
    } else {
        0.0
    }
}

fn latent(config: &GeneratorConfig, entry: f64, dwell: f64) -> (Vec<HourlyWeather>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(0);
    let exit = 1.0 / dwell;
    let mut southerly = false;
    let mut speed_dev = 0.0;
    let mut dir = config.prevailing_direction;
    let mut cloud = 0.0;
    let mut temp_dev = 0.0;
    let mut raining = false;
    let mut truth = Vec::with_capacity(config.hours);
    let mut regimes = Vec::with_capacity(config.hours);
    for i in 0..config.hours {
        let t = config.start + Duration::hours(i as i64);
        let u_regime: f64 = rng.random();
        let e_speed: f64 = rng.sample(StandardNormal);
        let e_dir: f64 = rng.sample(StandardNormal);
        let e_cloud: f64 = rng.sample(StandardNormal);
        let e_temp: f64 = rng.sample(StandardNormal);
        let u_rain: f64 = rng.random();
        let rain_amount: f64 = rng.sample(Exp1);

        southerly = if southerly { u_regime >= exit } else { u_regime < entry };
        let (mean, target) = if southerly {
            (config.calm_speed_mean, config.southerly_direction)
        } else {
            (config.speed_mean, config.prevailing_direction)
        };
        speed_dev = config.speed_ar * speed_dev + config.speed_noise * e_speed;
        let diurnal_term = if southerly { 0.0 } else { config.diurnal_amplitude * diurnal(t, 15.0) };
        let speed = (mean + diurnal_term + speed_dev).max(0.0);
        dir = wrap(dir + config.direction_reversion * angle_diff(target, dir) + config.direction_step_sd * e_dir);

        cloud = 0.8 * cloud + 0.35 * e_cloud;
        let clear = (0.85 - 0.25 * cloud.abs()).clamp(0.2, 1.0);
        let irradiance = 1000.0 * (0.75 + 0.25 * seasonal(t, 172.0)) * clear * daylight(t);
        temp_dev = 0.9 * temp_dev + 0.5 * e_temp;
        let temperature = 18.0 + 6.0 * seasonal(t, 200.0) + 4.0 * diurnal(t, 15.0) + temp_dev;
        raining = if raining { u_rain >= 0.25 } else { u_rain < 0.01 };
        let pluviometry = if raining { 1.5 * rain_amount } else { 0.0 };

        truth.push(HourlyWeather {
            timestamp: t,
            wind_speed: speed,
            wind_direction: dir,
            solar_irradiance: irradiance,
            temperature,
            pluviometry,
            imputed: false,
        });
        regimes.push(southerly);
    }
    (truth, regimes)
}

pub fn dangerous_fraction(truth: &[HourlyWeather]) -> f64 {
    let n = truth
        .iter()
        .filter(|h| {
            classify_scenario(h.wind_speed, h.wind_direction)
                .map(|s| s.is_dangerous())
                .unwrap_or(false)
        })
        .count();
    n as f64 / truth.len().max(1) as f64
}

/// Tuned regime parameters and the resulting latent truth.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentWeather {
    pub truth: Vec<HourlyWeather>,
    pub southerly: Vec<bool>,
    pub regime_entry_probability: f64,
    pub regime_dwell_hours: f64,
}

fn tune_entry(config: &GeneratorConfig, dwell: f64) -> (f64, f64) {
    let target = config.dangerous_rate;
    let (mut lo, mut hi) = (MIN_ENTRY.ln(), MAX_ENTRY.ln());
    let mut best: Option<(f64, f64)> = None;
    for _ in 0..TUNING_STEPS {
        let mid = 0.5 * (lo + hi);
        let rate = dangerous_fraction(&latent(config, mid.exp(), dwell).0);
        if best.is_none_or(|(_, r)| (rate - target).abs() < (r - target).abs()) {
            best = Some((mid.exp(), rate));
        }
        if rate < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    best.expect("tuning ran")
}

/// Latent truth with the regime entry probability tuned to the target rate
/// (or fixed). When no entry probability lands within ±50% of the target,
/// spells are shortened step by step, down to one hour.
pub fn generate_hourly(config: &GeneratorConfig) -> Result<LatentWeather> {
    config.validate()?;
    let mut dwell = config.regime_dwell_hours;
    if let Some(p) = config.regime_entry_probability {
        let (truth, southerly) = latent(config, p, dwell);
        return Ok(LatentWeather {
            truth,
            southerly,
            regime_entry_probability: p,
            regime_dwell_hours: dwell,
        });
    }
    let target = config.dangerous_rate;
    let mut best: Option<(f64, f64, f64)> = None;
    loop {
        let (p, rate) = tune_entry(config, dwell);
        if best.is_none_or(|(_, _, r)| (rate - target).abs() < (r - target).abs()) {
            best = Some((p, dwell, rate));
        }
        if (rate - target).abs() <= 0.5 * target || dwell <= 1.0 {
            break;
        }
        dwell = (dwell / DWELL_STEP).max(1.0);
    }
    let (p, dwell, rate) = best.expect("tuning ran");
    if (rate - target).abs() > 0.5 * target {
        return Err(Error::UnattainableRate {
            target,
            achieved: rate,
        });
    }
    let (truth, southerly) = latent(config, p, dwell);
    Ok(LatentWeather {
        truth,
        southerly,
        regime_entry_probability: p,
        regime_dwell_hours: dwell,
    })
}

/// Minute-level sensor records over the configured duration.
pub fn generate_weather(config: &GeneratorConfig) -> Result<SyntheticWorld> {
    let LatentWeather {
        truth,
        southerly,
        regime_entry_probability,
        regime_dwell_hours,
    } = generate_hourly(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut minutes = Vec::with_capacity(truth.len() * 60);
    let mut gap_left = 0usize;
    for h in &truth {
        for m in 0..60 {
            let u_gap: f64 = rng.random();
            let u_len: f64 = rng.random();
            let e_speed: f64 = rng.sample(StandardNormal);
            let e_dir: f64 = rng.sample(StandardNormal);
            let e_temp: f64 = rng.sample(StandardNormal);
            if gap_left == 0 && u_gap < config.gap_probability {
                gap_left = 1 + (u_len * config.max_gap_minutes as f64) as usize;
            }
            if gap_left > 0 {
                gap_left -= 1;
                continue;
            }
            let speed = (h.wind_speed * (1.0 + config.minute_speed_noise * e_speed)).max(0.0);
            minutes.push(RawSensorRecord {
                timestamp: h.timestamp + Duration::minutes(m),
                wind_speed: Some(speed),
                wind_direction: Some(wrap(h.wind_direction + config.minute_direction_noise * e_dir)),
                solar_irradiance: Some(h.solar_irradiance),
                temperature: Some(h.temperature + 0.1 * e_temp),
                pluviometry: Some(h.pluviometry),
            });
        }
    }
    Ok(SyntheticWorld {
        dangerous_rate: dangerous_fraction(&truth),
        minutes,
        truth,
        southerly,
        regime_entry_probability,
        regime_dwell_hours,
    })
}

/// Issuances at the configured hours, each with 48 hourly entries. Only
/// issuances fully covered by the truth are emitted.
pub fn generate_official_forecast(truth: &[HourlyWeather], config: &GeneratorConfig) -> Result<Vec<OfficialForecast>> {
    let noise = &config.forecast;
    if !(0.0..1.0).contains(&noise.correlation) {
        return Err(Error::invalid("forecast noise correlation must lie in [0, 1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(2);
    let innovation = (1.0 - noise.correlation * noise.correlation).sqrt();
    let mut out = Vec::new();
    for (i, issue) in truth.iter().enumerate() {
        if !noise.issue_hours.contains(&issue.timestamp.hour()) || i + FORECAST_HOURS >= truth.len() {
            continue;
        }
        let mut e = [0.0f64; 5];
        let mut hours = Vec::with_capacity(FORECAST_HOURS);
        for k in 1..=FORECAST_HOURS {
            let v = &truth[i + k];
            for ej in e.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *ej = if k == 1 {
                    z
                } else {
                    noise.correlation * *ej + innovation * z
                };
            }
            let horizon = (k as u32 + noise.issue_lag_hours) as f64;
            let s_sd = ForecastNoise::sd(noise.speed_sd_h1, noise.speed_sd_h48, horizon);
            let d_sd = ForecastNoise::sd(noise.direction_sd_h1, noise.direction_sd_h48, horizon);
            hours.push(ForecastHour {
                valid_time: v.timestamp,
                wind_speed: (v.wind_speed + noise.speed_bias + s_sd * e[0]).max(0.0),
                wind_direction: wrap(v.wind_direction + noise.direction_bias + d_sd * e[1]),
                temperature: v.temperature + noise.temperature_sd * e[2],
                solar_irradiance: (v.solar_irradiance * (1.0 + noise.relative_sd * e[3])).max(0.0),
                pluviometry: (v.pluviometry * (1.0 + noise.relative_sd * e[4])).max(0.0),
            });
        }
        out.push(OfficialForecast::new(issue.timestamp, hours)?);
    }
    Ok(out)
}
