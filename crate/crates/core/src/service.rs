//! JSON-over-HTTP service for the operator console.
//!
//! One writer (sensor posts, overrides, new official issuances) and many
//! readers. The writer rebuilds an immutable [`Snapshot`] whenever an hour
//! completes and swaps it in; handlers only clone the current `Arc`.
//!
//! | method | path | body / query | answer |
//! |---|---|---|---|
//! | GET | `/api/status` | | artifact and buffer state |
//! | GET | `/api/forecast` | `leads=1,2,3` | ensemble and official forecast per lead |
//! | GET | `/api/recommendation` | `health_cost=H` | action, tree path, current mode |
//! | GET | `/api/whatif` | `health_cost=H` | same, under an alternative H |
//! | GET | `/api/history` | `hours=n` | recent actuals and the forecasts made for them |
//! | GET | `/api/ledger` | | hourly costs and operator overrides |
//! | POST | `/api/sensor` | JSON array of minute records | acknowledgement |
//! | POST | `/api/official-forecast` | one issuance | acknowledgement |
//! | POST | `/api/override` | `{"action": "reduce"}` | acknowledgement |
//!
//! Errors are `{"error": "..."}` with 400 for malformed input, 409 for sensor
//! timestamps that step back beyond the tolerance and 503 until artifacts
//! (and enough history) are available. Resent records identical to ones
//! already held are counted as unchanged, so retries are safe.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock, RwLock};

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::evalsim::{step, Mode, LOOKAHEAD};
use crate::features::{build_feature_vector, LAGS};
use crate::ingest::{
    format_time, ingest_minutes, read_forecast_csv, read_sensor_csv, truncate_hour,
    ForecastArchive, HourlySeries, OfficialForecast, RawSensorRecord,
};
use crate::pipeline::{
    baseline_wind, PipelineConfig, PolicySet, TrainedModels, FORECASTS_FILE, POLICIES_FILE,
    SENSORS_FILE,
};
use crate::policy::{false_negative_cost, PathStep, Prescription, REDUCE_COST};
use crate::scenario::{scenario_forecast, Scenario};
use crate::{Error, Result};

/// Hours of minute records kept for re-aggregation.
pub const RETAINED_HOURS: i64 = 120;
/// Hours of actuals, past forecasts and ledger kept for display.
pub const HISTORY_HOURS: usize = 168;
pub const DEFAULT_HISTORY_HOURS: usize = 48;

pub struct Artifacts {
    pub models: TrainedModels,
    pub policies: PolicySet,
}

impl Artifacts {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        Ok(Artifacts {
            models: TrainedModels::load(dir)?,
            policies: PolicySet::load(dir.join(POLICIES_FILE))?,
        })
    }

    pub fn new(models: TrainedModels, policies: PolicySet) -> Result<Self> {
        models.ensemble.lead(policies.lead_time)?;
        Ok(Artifacts { models, policies })
    }

    fn lead_times(&self) -> Vec<u32> {
        self.models.ensemble.stacks.keys().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindForecast {
    pub speed: f64,
    pub direction: f64,
    pub scenario: Scenario,
    pub dangerous: bool,
}

impl WindForecast {
    fn new(speed: f64, direction: f64) -> Result<Self> {
        let scenario = scenario_forecast(speed, direction)?;
        Ok(WindForecast {
            speed,
            direction,
            scenario,
            dangerous: scenario.is_dangerous(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeadEntry {
    pub lead_time: u32,
    pub valid_time: String,
    pub ensemble: WindForecast,
    pub official: WindForecast,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActualHour {
    pub time: String,
    pub speed: f64,
    pub direction: f64,
    pub scenario: Scenario,
    pub dangerous: bool,
    pub imputed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PastForecast {
    pub base_time: String,
    pub lead_time: u32,
    pub valid_time: String,
    pub speed: f64,
    pub direction: f64,
    pub scenario: Scenario,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LedgerKind {
    Hour,
    Override,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiveLedgerEntry {
    pub time: String,
    pub kind: LedgerKind,
    pub mode: Mode,
    pub actual: Option<Scenario>,
    pub pollution_event: bool,
    pub cost: f64,
}

/// Everything the read endpoints serve, frozen at one point in time.
#[derive(Debug, Clone, Default)]
pub struct Snapshot {
    pub version: u64,
    pub base_time: Option<DateTime<Utc>>,
    pub forecasts: Vec<LeadEntry>,
    /// Lead times that could not be forecast at `base_time`, with the reason.
    pub unavailable: Vec<(u32, String)>,
    pub policy_features: Option<Vec<f64>>,
    pub mode: Option<Mode>,
    pub override_active: bool,
    pub actuals: Vec<ActualHour>,
    pub past_forecasts: Vec<PastForecast>,
    pub ledger: Vec<LiveLedgerEntry>,
}

struct Writer {
    records: BTreeMap<DateTime<Utc>, RawSensorRecord>,
    latest: Option<DateTime<Utc>>,
    /// Every hour before this one has been processed.
    processed_until: Option<DateTime<Utc>>,
    archive: ForecastArchive,
    /// Mode entering the next hour.
    incoming: Mode,
    current: Snapshot,
}

pub struct AppState {
    config: PipelineConfig,
    artifacts: OnceLock<Arc<Artifacts>>,
    snapshot: RwLock<Arc<Snapshot>>,
    writer: Mutex<Writer>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensorAck {
    pub accepted: usize,
    pub unchanged: usize,
    pub completed_hours: Vec<String>,
    pub base_time: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recommendation {
    pub health_cost: f64,
    pub tree_health_cost: f64,
    pub what_if: bool,
    pub base_time: String,
    pub lead_time: u32,
    pub action: Prescription,
    pub tree_path: Vec<PathStep>,
    pub current_mode: Mode,
    pub override_active: bool,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn unavailable(message: impl Into<String>) -> Self {
        Self::new(StatusCode::SERVICE_UNAVAILABLE, message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::NonMonotone { .. } => StatusCode::CONFLICT,
            Error::Parse { .. }
            | Error::InvalidArgument(_)
            | Error::Json(_)
            | Error::NonFinite(_)
            | Error::DirectionUndefined
            | Error::Empty(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = std::result::Result<Json<T>, ApiError>;

impl AppState {
    pub fn new(config: PipelineConfig, archive: ForecastArchive) -> Self {
        AppState {
            config,
            artifacts: OnceLock::new(),
            snapshot: RwLock::new(Arc::new(Snapshot::default())),
            writer: Mutex::new(Writer {
                records: BTreeMap::new(),
                latest: None,
                processed_until: None,
                archive,
                incoming: Mode::Normal,
                current: Snapshot::default(),
            }),
        }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    /// Installs the trained artifacts; only the first call has an effect.
    pub fn install(&self, artifacts: Artifacts) -> bool {
        self.artifacts.set(Arc::new(artifacts)).is_ok()
    }

    pub fn artifacts(&self) -> Option<Arc<Artifacts>> {
        self.artifacts.get().cloned()
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    fn require_artifacts(&self) -> std::result::Result<Arc<Artifacts>, ApiError> {
        self.artifacts()
            .ok_or_else(|| ApiError::unavailable("model artifacts are not loaded yet"))
    }

    fn publish(&self, w: &mut Writer) {
        w.current.version += 1;
        *self.snapshot.write().expect("snapshot lock") = Arc::new(w.current.clone());
    }

    pub fn add_official_forecast(&self, forecast: OfficialForecast) -> Result<()> {
        let forecast = OfficialForecast::new(forecast.issue_time, forecast.hours)?;
        self.writer.lock().expect("writer lock").archive.push(forecast);
        Ok(())
    }

    /// Appends minute records and processes every hour they complete. An hour
    /// is complete once its last minute, or anything later, has arrived.
    pub fn ingest_records(&self, records: Vec<RawSensorRecord>) -> std::result::Result<SensorAck, ApiError> {
        let artifacts = self.require_artifacts()?;
        let tolerance = Duration::minutes(self.config.reorder_tolerance_minutes);
        let mut w = self.writer.lock().expect("writer lock");

        let mut latest = w.latest;
        for (i, r) in records.iter().enumerate() {
            // resending a retained record is a harmless retry, not a step back
            if w.records.get(&r.timestamp) == Some(r) {
                continue;
            }
            if let Some(l) = latest {
                if r.timestamp < l - tolerance {
                    return Err(Error::NonMonotone {
                        line: i as u64 + 1,
                        timestamp: format_time(r.timestamp),
                    }
                    .into());
                }
            }
            latest = Some(latest.map_or(r.timestamp, |l| l.max(r.timestamp)));
        }
        let mut accepted = 0;
        let mut unchanged = 0;
        for r in records {
            if w.records.get(&r.timestamp) == Some(&r) {
                unchanged += 1;
            } else {
                w.records.insert(r.timestamp, r);
                accepted += 1;
            }
        }
        w.latest = latest;
        let Some(latest) = latest else {
            return Ok(SensorAck {
                accepted,
                unchanged,
                completed_hours: vec![],
                base_time: w.current.base_time.map(format_time),
            });
        };

        let complete_until = truncate_hour(latest + Duration::minutes(1));
        let first_open = *w.records.keys().next().expect("non-empty");
        let from = w.processed_until.unwrap_or_else(|| truncate_hour(first_open));
        let mut completed = Vec::new();
        if complete_until > from {
            let closed: Vec<RawSensorRecord> = w
                .records
                .range(..complete_until)
                .map(|(_, r)| r.clone())
                .collect();
            let series = ingest_minutes(&closed, self.config.ingest_options())?;
            let mut h = from;
            while h < complete_until {
                if series.get(h).is_some() {
                    self.process_hour(&mut w, &artifacts, &series, h)?;
                    completed.push(format_time(h));
                }
                h += Duration::hours(1);
            }
            w.processed_until = Some(complete_until);
            let keep_from = complete_until - Duration::hours(RETAINED_HOURS);
            w.records = w.records.split_off(&keep_from);
            self.publish(&mut w);
        }
        Ok(SensorAck {
            accepted,
            unchanged,
            completed_hours: completed,
            base_time: w.current.base_time.map(format_time),
        })
    }

    fn process_hour(
        &self,
        w: &mut Writer,
        artifacts: &Artifacts,
        series: &HourlySeries,
        t: DateTime<Utc>,
    ) -> Result<()> {
        let now = series.get(t).expect("present hour");
        let actual = scenario_forecast(now.wind_speed, now.wind_direction)?;
        let snap = &mut w.current;
        snap.actuals.push(ActualHour {
            time: format_time(t),
            speed: now.wind_speed,
            direction: now.wind_direction,
            scenario: actual,
            dangerous: actual.is_dangerous(),
            imputed: now.imputed,
        });

        let mut forecasts = Vec::new();
        let mut unavailable = Vec::new();
        let mut policy_features = None;
        for lead in artifacts.lead_times() {
            match forecast_at(artifacts, series, &w.archive, t, lead) {
                Ok((entry, features)) => {
                    if lead == artifacts.policies.lead_time {
                        policy_features = Some(features);
                    }
                    snap.past_forecasts.push(PastForecast {
                        base_time: format_time(t),
                        lead_time: lead,
                        valid_time: entry.valid_time.clone(),
                        speed: entry.ensemble.speed,
                        direction: entry.ensemble.direction,
                        scenario: entry.ensemble.scenario,
                    });
                    forecasts.push(entry);
                }
                Err(e) => unavailable.push((lead, e.to_string())),
            }
        }

        let ahead: Vec<Scenario> = (1..=LOOKAHEAD as u32)
            .filter_map(|l| forecasts.iter().find(|f| f.lead_time == l))
            .map(|f| f.ensemble.scenario)
            .collect();
        if ahead.len() == LOOKAHEAD {
            let s = step(w.incoming, &ahead, actual);
            let cost = match (s.mode, s.pollution_event) {
                (Mode::Reduced, _) => REDUCE_COST,
                (Mode::Normal, true) => false_negative_cost(self.config.health_cost),
                (Mode::Normal, false) => 0.0,
            };
            snap.ledger.push(LiveLedgerEntry {
                time: format_time(t),
                kind: LedgerKind::Hour,
                mode: s.mode,
                actual: Some(actual),
                pollution_event: s.pollution_event,
                cost,
            });
            snap.mode = Some(s.mode);
            snap.override_active = false;
            w.incoming = s.next;
        } else {
            log::warn!("{}: fewer than {LOOKAHEAD} forecasts, mode unchanged", format_time(t));
        }

        snap.base_time = Some(t);
        snap.forecasts = forecasts;
        snap.unavailable = unavailable;
        snap.policy_features = policy_features;
        trim(&mut snap.actuals, HISTORY_HOURS);
        trim(&mut snap.past_forecasts, HISTORY_HOURS * artifacts.lead_times().len());
        trim(&mut snap.ledger, 4 * HISTORY_HOURS);
        Ok(())
    }

    /// Records an operator decision; it sets the current mode but is never
    /// fed back into training.
    pub fn record_override(&self, action: Prescription) -> std::result::Result<LiveLedgerEntry, ApiError> {
        self.require_artifacts()?;
        let mut w = self.writer.lock().expect("writer lock");
        let mode = match action {
            Prescription::Reduce => Mode::Reduced,
            Prescription::Maintain => Mode::Normal,
        };
        let time = w
            .latest
            .map(format_time)
            .unwrap_or_else(|| "unknown".to_string());
        let entry = LiveLedgerEntry {
            time,
            kind: LedgerKind::Override,
            mode,
            actual: None,
            pollution_event: false,
            cost: 0.0,
        };
        w.incoming = mode;
        w.current.mode = Some(mode);
        w.current.override_active = true;
        w.current.ledger.push(entry.clone());
        self.publish(&mut w);
        Ok(entry)
    }

    pub fn recommend(&self, health_cost: f64, what_if: bool) -> std::result::Result<Recommendation, ApiError> {
        let artifacts = self.require_artifacts()?;
        if !health_cost.is_finite() || health_cost <= 0.0 {
            return Err(ApiError::bad_request(format!(
                "health_cost must be a positive number, got {health_cost}"
            )));
        }
        let snap = self.snapshot();
        let (Some(t), Some(x)) = (snap.base_time, snap.policy_features.as_ref()) else {
            return Err(ApiError::unavailable("not enough history for a recommendation yet"));
        };
        let policy = artifacts.policies.nearest(health_cost)?;
        let (action, tree_path) = policy.tree.path(x, &artifacts.policies.feature_names)?;
        Ok(Recommendation {
            health_cost,
            tree_health_cost: policy.health_cost,
            what_if,
            base_time: format_time(t),
            lead_time: artifacts.policies.lead_time,
            action,
            tree_path,
            current_mode: snap.mode.unwrap_or(Mode::Normal),
            override_active: snap.override_active,
        })
    }
}

fn trim<T>(v: &mut Vec<T>, max: usize) {
    if v.len() > max {
        v.drain(..v.len() - max);
    }
}

/// The forecast the offline pipeline would make for base time `t`, plus the
/// policy features (member predictions).
pub fn forecast_at(
    artifacts: &Artifacts,
    series: &HourlySeries,
    archive: &ForecastArchive,
    t: DateTime<Utc>,
    lead: u32,
) -> Result<(LeadEntry, Vec<f64>)> {
    let (fv, _) = build_feature_vector(series, archive, t, lead)?;
    let x = fv.as_slice();
    let lf = artifacts.models.forecast(lead, x)?;
    let (s, d) = lf.ensemble_wind()?;
    let (bs, bd) = baseline_wind(x)?;
    Ok((
        LeadEntry {
            lead_time: lead,
            valid_time: format_time(t + Duration::hours(lead as i64)),
            ensemble: WindForecast::new(s, d)?,
            official: WindForecast::new(bs, bd)?,
        },
        lf.policy_features(),
    ))
}

fn param<T: std::str::FromStr>(q: &HashMap<String, String>, key: &str) -> std::result::Result<Option<T>, ApiError> {
    q.get(key)
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| ApiError::bad_request(format!("invalid `{key}`: {v}")))
        })
        .transpose()
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &Bytes) -> std::result::Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed JSON body: {e}")))
}

#[derive(Serialize)]
struct StatusBody {
    artifacts_loaded: bool,
    snapshot_version: u64,
    base_time: Option<String>,
    current_mode: Option<Mode>,
    lead_times: Vec<u32>,
    health_costs: Vec<f64>,
}

async fn status(State(app): State<Arc<AppState>>) -> Json<StatusBody> {
    let snap = app.snapshot();
    let artifacts = app.artifacts();
    Json(StatusBody {
        artifacts_loaded: artifacts.is_some(),
        snapshot_version: snap.version,
        base_time: snap.base_time.map(format_time),
        current_mode: snap.mode,
        lead_times: artifacts.as_ref().map(|a| a.lead_times()).unwrap_or_default(),
        health_costs: artifacts.map(|a| a.policies.health_costs()).unwrap_or_default(),
    })
}

#[derive(Serialize)]
struct ForecastBody {
    base_time: String,
    forecasts: Vec<LeadEntry>,
}

async fn forecast(
    State(app): State<Arc<AppState>>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<ForecastBody> {
    let artifacts = app.require_artifacts()?;
    let leads: Vec<u32> = match q.get("leads") {
        None => artifacts.lead_times(),
        Some(v) => v
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<u32>()
                    .map_err(|_| ApiError::bad_request(format!("invalid lead time `{s}`")))
            })
            .collect::<std::result::Result<_, _>>()?,
    };
    let known = artifacts.lead_times();
    if let Some(l) = leads.iter().find(|l| !known.contains(l)) {
        return Err(ApiError::bad_request(format!(
            "lead time {l} is not served; available: {known:?}"
        )));
    }
    let snap = app.snapshot();
    let Some(t) = snap.base_time else {
        return Err(ApiError::unavailable("no complete hour received yet"));
    };
    let mut forecasts = Vec::with_capacity(leads.len());
    for l in leads {
        match snap.forecasts.iter().find(|f| f.lead_time == l) {
            Some(f) => forecasts.push(f.clone()),
            None => {
                let reason = snap
                    .unavailable
                    .iter()
                    .find(|(u, _)| *u == l)
                    .map_or("unavailable", |(_, r)| r.as_str());
                return Err(ApiError::unavailable(format!("lead {l}: {reason}")));
            }
        }
    }
    Ok(Json(ForecastBody {
        base_time: format_time(t),
        forecasts,
    }))
}

fn health_cost_param(app: &AppState, q: &HashMap<String, String>) -> std::result::Result<f64, ApiError> {
    Ok(param(q, "health_cost")?.unwrap_or(app.config.health_cost))
}

async fn recommendation(
    State(app): State<Arc<AppState>>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Recommendation> {
    let h = health_cost_param(&app, &q)?;
    Ok(Json(app.recommend(h, false)?))
}

async fn whatif(
    State(app): State<Arc<AppState>>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Recommendation> {
    let h: f64 = param(&q, "health_cost")?
        .ok_or_else(|| ApiError::bad_request("missing `health_cost`"))?;
    Ok(Json(app.recommend(h, true)?))
}

#[derive(Serialize)]
struct HistoryBody {
    hours: usize,
    actuals: Vec<ActualHour>,
    forecasts: Vec<PastForecast>,
}

async fn history(
    State(app): State<Arc<AppState>>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<HistoryBody> {
    app.require_artifacts()?;
    let n: usize = param(&q, "hours")?.unwrap_or(DEFAULT_HISTORY_HOURS);
    if n == 0 || n > HISTORY_HOURS {
        return Err(ApiError::bad_request(format!("hours must lie in 1..={HISTORY_HOURS}")));
    }
    let snap = app.snapshot();
    let actuals = snap.actuals[snap.actuals.len().saturating_sub(n)..].to_vec();
    let window: Vec<&str> = actuals.iter().map(|a| a.time.as_str()).collect();
    let forecasts = snap
        .past_forecasts
        .iter()
        .filter(|f| window.contains(&f.valid_time.as_str()))
        .cloned()
        .collect();
    Ok(Json(HistoryBody {
        hours: n,
        actuals,
        forecasts,
    }))
}

#[derive(Serialize)]
struct LedgerBody {
    current_mode: Option<Mode>,
    entries: Vec<LiveLedgerEntry>,
}

async fn ledger(State(app): State<Arc<AppState>>) -> ApiResult<LedgerBody> {
    app.require_artifacts()?;
    let snap = app.snapshot();
    Ok(Json(LedgerBody {
        current_mode: snap.mode,
        entries: snap.ledger.clone(),
    }))
}

async fn sensor(State(app): State<Arc<AppState>>, body: Bytes) -> ApiResult<SensorAck> {
    let records: Vec<RawSensorRecord> = parse_body(&body)?;
    let worker = app.clone();
    tokio::task::spawn_blocking(move || worker.ingest_records(records))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map(Json)
}

async fn official_forecast(State(app): State<Arc<AppState>>, body: Bytes) -> ApiResult<serde_json::Value> {
    let f: OfficialForecast = parse_body(&body)?;
    let issue = format_time(f.issue_time);
    app.add_official_forecast(f)?;
    Ok(Json(serde_json::json!({ "issue_time": issue })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OverrideBody {
    action: Prescription,
}

async fn override_mode(State(app): State<Arc<AppState>>, body: Bytes) -> ApiResult<LiveLedgerEntry> {
    let b: OverrideBody = parse_body(&body)?;
    Ok(Json(app.record_override(b.action)?))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/status", get(status))
        .route("/api/forecast", get(forecast))
        .route("/api/recommendation", get(recommendation))
        .route("/api/whatif", get(whatif))
        .route("/api/history", get(history))
        .route("/api/ledger", get(ledger))
        .route("/api/sensor", post(sensor))
        .route("/api/official-forecast", post(official_forecast))
        .route("/api/override", post(override_mode))
        .with_state(state)
}

/// Loads artifacts and replays the tail of the sensor file so forecasts are
/// available immediately.
pub fn warm_up(state: &AppState) -> Result<()> {
    let config = &state.config;
    let artifacts = Artifacts::load(&config.artifacts_dir)?;
    state.install(artifacts);
    let sensors = config.data_dir.join(SENSORS_FILE);
    if sensors.exists() {
        let records = read_sensor_csv(&sensors, config.parse_options())?;
        if let Some(last) = records.last().map(|r| r.timestamp) {
            let from = truncate_hour(last) - Duration::hours((LAGS + 2 * LOOKAHEAD) as i64 + 24);
            let tail: Vec<RawSensorRecord> = records.into_iter().filter(|r| r.timestamp >= from).collect();
            state.ingest_records(tail).map_err(|e| Error::invalid(e.message))?;
        }
    }
    Ok(())
}

/// Archive from the configured data directory, empty when the file is absent.
pub fn initial_archive(config: &PipelineConfig) -> Result<ForecastArchive> {
    let path = config.data_dir.join(FORECASTS_FILE);
    if path.exists() {
        Ok(ForecastArchive::new(read_forecast_csv(path)?))
    } else {
        Ok(ForecastArchive::default())
    }
}

/// Runs the service until the process is stopped. Artifacts load in the
/// background; until then data endpoints answer 503.
pub async fn serve(config: PipelineConfig) -> Result<()> {
    let archive = initial_archive(&config)?;
    let port = config.port;
    let state = Arc::new(AppState::new(config, archive));
    let loader = state.clone();
    tokio::task::spawn_blocking(move || loop {
        match warm_up(&loader) {
            Ok(()) => {
                log::info!("artifacts loaded");
                break;
            }
            Err(e) => {
                log::warn!("artifacts not ready: {e}");
                if loader.artifacts().is_some() {
                    break;
                }
                std::thread::sleep(std::time::Duration::from_secs(10));
            }
        }
    });
    let addr = std::net::SocketAddr::from(([0, 0, 0, 0], port));
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::io(format!("0.0.0.0:{port}"), e))?;
    log::info!("listening on {addr}");
    axum::serve(listener, router(state))
        .await
        .map_err(|e| Error::io("http server", e))
}
