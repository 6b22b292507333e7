//! Batch orchestration behind the CLI: configuration, artifact files and the
//! synth / ingest / train / evaluate / policy / backtest stages.
//!
//! Every stage is a pure function of its inputs and the configured seed, so
//! two runs over the same files write byte-identical artifacts.
//!
//! # Configuration file
//!
//! A flat TOML key-value file. Every key is optional:
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `data_dir` | `"data"` | holds `sensors.csv`, `forecasts.csv`, `hourly.csv` |
//! | `artifacts_dir` | `"artifacts"` | model, policy and report outputs |
//! | `lead_times` | `[1, 2, 3, 6, 12, 24, 36, 48]` | forecast horizons in hours |
//! | `families` | all five | `elastic_net`, `decision_tree`, `random_forest`, `gbt_leafwise`, `gbt_depthwise` |
//! | `include_baseline` | `true` | official forecast as a stacking and policy member |
//! | `train_fraction`, `validation_fraction`, `test_fraction` | `0.6`, `0.2`, `0.2` | chronological split |
//! | `health_cost` | `8000` | health cost H of a pollution event |
//! | `health_cost_grid` | `[2000, 4000, 8000, 13000, 18000]` | policy trees kept for what-if queries |
//! | `seed` | `0` | seeds every random draw |
//! | `port` | `8080` | HTTP port, overridden by `WINDOPS_PORT` |
//! | `metric` | `"mae"` | grid-search selection metric (`mae` or `mse`) |
//! | `grid` | `"table"` | `table` for the full search grids, `reduced` for every fourth point |
//! | `max_bins` | `255` | histogram bins per feature for tree models |
//! | `ensemble_folds` | `5` | CV folds of the stacking combiner |
//! | `policy_lead` | `1` | lead time whose member forecasts feed the policy tree |
//! | `policy_depths` | `[2, 3, 4, 5]` | policy-tree depth grid |
//! | `policy_min_leaf` | `[20]` | policy-tree minimum leaf size grid |
//! | `policy_folds` | `5` | CV folds for policy tuning |
//! | `max_gap_minutes`, `max_gap_hours` | `120`, `6` | longest interpolated gaps |
//! | `reorder_tolerance_minutes` | `5` | tolerated backwards step in sensor files |

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::ensemble::{
    collect_member_predictions, member_feature_names, train_stacker_with_grid, ensemble_grid,
    LeadStack, Member, MemberPredictions, StackedEnsemble,
};
use crate::evalsim::{
    confusion_counts, forecast_error_row, simulate_operations, trade_off_metrics, Confusion,
    DecisionReport, ForecastErrorReport, LedgerEntry, TradeOff, LOOKAHEAD,
};
use crate::features::{
    build_dataset, chronological_split, Dataset, SplitFractions, Splits, DIR_COS_LAGS,
    DIR_SIN_LAGS, LAGS, OFFICIAL_DIR_COS, OFFICIAL_DIR_SIN, OFFICIAL_SPEED, SPEED_LAGS,
};
use crate::ingest::{
    decode_direction, format_time, ingest_minutes, read_forecast_csv, read_hourly_csv,
    read_sensor_csv, write_forecast_csv, write_hourly_csv, write_sensor_csv, ForecastArchive,
    HourlySeries, IngestOptions, ParseOptions,
};
use crate::policy::{
    build_reward_matrix, nearest_health_cost, prescribe, tune_policy_tree, PolicyTree,
    Prescription, TuningScore, DEFAULT_DEPTH_GRID, DEFAULT_MIN_LEAF, HEALTH_COST_GRID,
    REDUCE_COST,
};
use crate::regress::{
    table_grid, train_bank, BankConfig, Family, Hyperparameters, LeadTimeModelBank, Metric,
    DEFAULT_MAX_BINS,
};
use crate::scenario::{scenario_forecast, Scenario};
use crate::synthgen::{generate_official_forecast, generate_weather, GeneratorConfig};
use crate::{Error, Result};

pub const ARTIFACT_VERSION: u32 = 1;
pub const PORT_ENV: &str = "WINDOPS_PORT";

pub const SENSORS_FILE: &str = "sensors.csv";
pub const FORECASTS_FILE: &str = "forecasts.csv";
pub const HOURLY_FILE: &str = "hourly.csv";
pub const TRUTH_FILE: &str = "truth.csv";
pub const SYNTH_SUMMARY_FILE: &str = "synth.json";
pub const BANKS_FILE: &str = "banks.json";
pub const ENSEMBLE_FILE: &str = "ensemble.json";
pub const POLICIES_FILE: &str = "policies.json";
pub const ERRORS_CSV_FILE: &str = "forecast_errors.csv";
pub const ERRORS_JSON_FILE: &str = "forecast_errors.json";
pub const DECISION_REPORT_FILE: &str = "decision_report.json";
pub const LEDGER_FILE: &str = "ledger.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridChoice {
    #[default]
    Table,
    Reduced,
}

impl GridChoice {
    pub fn grid(self, family: Family) -> Vec<Hyperparameters> {
        match self {
            GridChoice::Table => table_grid(family),
            GridChoice::Reduced => table_grid(family).into_iter().step_by(4).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub data_dir: PathBuf,
    pub artifacts_dir: PathBuf,
    pub lead_times: Vec<u32>,
    pub families: Vec<Family>,
    pub include_baseline: bool,
    pub train_fraction: f64,
    pub validation_fraction: f64,
    pub test_fraction: f64,
    pub health_cost: f64,
    pub health_cost_grid: Vec<f64>,
    pub seed: u64,
    pub port: u16,
    pub metric: Metric,
    pub grid: GridChoice,
    pub max_bins: usize,
    pub ensemble_folds: usize,
    pub policy_lead: u32,
    pub policy_depths: Vec<usize>,
    pub policy_min_leaf: Vec<usize>,
    pub policy_folds: usize,
    pub max_gap_minutes: usize,
    pub max_gap_hours: usize,
    pub reorder_tolerance_minutes: i64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            data_dir: PathBuf::from("data"),
            artifacts_dir: PathBuf::from("artifacts"),
            lead_times: vec![1, 2, 3, 6, 12, 24, 36, 48],
            families: Family::ALL.to_vec(),
            include_baseline: true,
            train_fraction: 0.6,
            validation_fraction: 0.2,
            test_fraction: 0.2,
            health_cost: 8000.0,
            health_cost_grid: HEALTH_COST_GRID.to_vec(),
            seed: 0,
            port: 8080,
            metric: Metric::Mae,
            grid: GridChoice::Table,
            max_bins: DEFAULT_MAX_BINS,
            ensemble_folds: crate::ensemble::DEFAULT_FOLDS,
            policy_lead: 1,
            policy_depths: DEFAULT_DEPTH_GRID.to_vec(),
            policy_min_leaf: vec![DEFAULT_MIN_LEAF],
            policy_folds: 5,
            max_gap_minutes: crate::ingest::DEFAULT_MAX_GAP_MINUTES,
            max_gap_hours: crate::ingest::DEFAULT_MAX_GAP_HOURS,
            reorder_tolerance_minutes: 5,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads and validates a config file, then applies the port override.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml_str(&text)?;
        config.apply_env()?;
        Ok(config)
    }

    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(PORT_ENV) {
            self.port = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{PORT_ENV}={v} is not a port number")))?;
        }
        Ok(())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn split(&self) -> SplitFractions {
        SplitFractions {
            train: self.train_fraction,
            validation: self.validation_fraction,
            test: self.test_fraction,
        }
    }

    pub fn ingest_options(&self) -> IngestOptions {
        IngestOptions {
            max_gap_minutes: self.max_gap_minutes,
            max_gap_hours: self.max_gap_hours,
        }
    }

    pub fn parse_options(&self) -> ParseOptions {
        ParseOptions {
            reorder_tolerance: Duration::minutes(self.reorder_tolerance_minutes),
        }
    }

    /// Sorted, deduplicated lead times.
    pub fn leads(&self) -> Vec<u32> {
        let mut v = self.lead_times.clone();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Trained health costs: the grid plus the live value.
    pub fn policy_health_costs(&self) -> Vec<f64> {
        let mut v = self.health_cost_grid.clone();
        v.push(self.health_cost);
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.lead_times.is_empty() || self.lead_times.contains(&0) {
            return bad("lead_times must be a non-empty list of positive hours".into());
        }
        if self.families.is_empty() {
            return bad("families must not be empty".into());
        }
        self.split().validate().map_err(|e| Error::Config(e.to_string()))?;
        crate::policy::check_health_cost(self.health_cost).map_err(|e| Error::Config(e.to_string()))?;
        if self.health_cost_grid.is_empty() {
            return bad("health_cost_grid must not be empty".into());
        }
        for &h in &self.health_cost_grid {
            crate::policy::check_health_cost(h).map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.max_bins < 2 || self.max_bins > 256 {
            return bad(format!("max_bins must lie in 2..=256, got {}", self.max_bins));
        }
        if self.ensemble_folds < 2 || self.policy_folds < 2 {
            return bad("fold counts must be ≥ 2".into());
        }
        if !self.lead_times.contains(&self.policy_lead) {
            return bad(format!("policy_lead {} is not a configured lead time", self.policy_lead));
        }
        if self.policy_depths.is_empty() || self.policy_depths.contains(&0) {
            return bad("policy_depths must be non-empty and ≥ 1".into());
        }
        if self.policy_min_leaf.is_empty() || self.policy_min_leaf.contains(&0) {
            return bad("policy_min_leaf must be non-empty and ≥ 1".into());
        }
        if self.reorder_tolerance_minutes < 0 {
            return bad("reorder_tolerance_minutes must be ≥ 0".into());
        }
        Ok(())
    }

    fn bank_config(&self, family: Family) -> BankConfig {
        BankConfig {
            metric: self.metric,
            seed: self.seed,
            grid: Some(self.grid.grid(family)),
            max_bins: self.max_bins,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Envelope<T> {
    kind: String,
    version: u32,
    payload: T,
}

/// Writes `payload` as compact versioned JSON.
pub fn save_artifact<T: Serialize>(path: impl AsRef<Path>, kind: &str, payload: &T) -> Result<()> {
    write_envelope(path.as_ref(), kind, payload, false)
}

/// Indented variant for human-read reports.
pub fn save_report<T: Serialize>(path: impl AsRef<Path>, kind: &str, payload: &T) -> Result<()> {
    write_envelope(path.as_ref(), kind, payload, true)
}

fn write_envelope<T: Serialize>(path: &Path, kind: &str, payload: &T, pretty: bool) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let env = Envelope {
        kind: kind.to_string(),
        version: ARTIFACT_VERSION,
        payload,
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    if pretty {
        serde_json::to_writer_pretty(&mut w, &env)?;
    } else {
        serde_json::to_writer(&mut w, &env)?;
    }
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_artifact<T: DeserializeOwned>(path: impl AsRef<Path>, kind: &str) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let env: Envelope<serde_json::Value> = serde_json::from_str(&text)?;
    if env.kind != kind {
        return Err(Error::invalid(format!(
            "{}: expected a `{kind}` artifact, found `{}`",
            path.display(),
            env.kind
        )));
    }
    if env.version != ARTIFACT_VERSION {
        return Err(Error::ArtifactVersion {
            found: env.version,
            expected: ARTIFACT_VERSION,
        });
    }
    Ok(serde_json::from_value(env.payload)?)
}

fn create_writer(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSummary {
    pub seed: u64,
    pub hours: usize,
    pub minute_records: usize,
    pub issuances: usize,
    pub regime_entry_probability: f64,
    pub regime_dwell_hours: f64,
    pub dangerous_rate: f64,
}

/// Writes a synthetic world (sensors, official forecasts, latent hourly truth).
///
/// The weather runs 48 hours past `config.hours` so that every issuance
/// published inside the span is complete; sensors and truth stop at the span,
/// which leaves the last hours with official forecasts reaching ahead, as a
/// live feed would.
pub fn synth(config: &GeneratorConfig, out_dir: impl AsRef<Path>) -> Result<SynthSummary> {
    let out = out_dir.as_ref();
    let extended = GeneratorConfig {
        hours: config.hours + crate::ingest::FORECAST_HOURS,
        ..config.clone()
    };
    let mut world = generate_weather(&extended)?;
    let end = config.start + Duration::hours(config.hours as i64);
    let forecasts: Vec<_> = generate_official_forecast(&world.truth, &extended)?
        .into_iter()
        .filter(|f| f.issue_time < end)
        .collect();
    world.truth.truncate(config.hours);
    world.minutes.retain(|r| r.timestamp < end);
    world.dangerous_rate = crate::synthgen::dangerous_fraction(&world.truth);
    write_sensor_csv(create_writer(&out.join(SENSORS_FILE))?, &world.minutes)?;
    write_forecast_csv(create_writer(&out.join(FORECASTS_FILE))?, &forecasts)?;
    let truth = HourlySeries::from_contiguous(world.truth.clone())?;
    write_hourly_csv(create_writer(&out.join(TRUTH_FILE))?, &truth)?;
    let summary = SynthSummary {
        seed: config.seed,
        hours: config.hours,
        minute_records: world.minutes.len(),
        issuances: forecasts.len(),
        regime_entry_probability: world.regime_entry_probability,
        regime_dwell_hours: world.regime_dwell_hours,
        dangerous_rate: world.dangerous_rate,
    };
    save_report(out.join(SYNTH_SUMMARY_FILE), "synth_summary", &summary)?;
    Ok(summary)
}

/// Minute sensor file to an hourly file.
pub fn ingest_file(
    sensors: impl AsRef<Path>,
    hourly_out: impl AsRef<Path>,
    config: &PipelineConfig,
) -> Result<HourlySeries> {
    let records = read_sensor_csv(sensors, config.parse_options())?;
    let series = ingest_minutes(&records, config.ingest_options())?;
    write_hourly_csv(create_writer(hourly_out.as_ref())?, &series)?;
    Ok(series)
}

/// Hourly series (from `hourly.csv`, else ingested from `sensors.csv`) and
/// the official forecast archive.
pub fn load_inputs(config: &PipelineConfig) -> Result<(HourlySeries, ForecastArchive)> {
    let hourly = config.data_dir.join(HOURLY_FILE);
    let series = if hourly.exists() {
        read_hourly_csv(&hourly)?
    } else {
        let records = read_sensor_csv(config.data_dir.join(SENSORS_FILE), config.parse_options())?;
        ingest_minutes(&records, config.ingest_options())?
    };
    let archive = ForecastArchive::new(read_forecast_csv(config.data_dir.join(FORECASTS_FILE))?);
    Ok((series, archive))
}

/// Builds and splits one lead time's dataset.
pub fn lead_splits(
    series: &HourlySeries,
    archive: &ForecastArchive,
    lead: u32,
    config: &PipelineConfig,
) -> Result<Splits> {
    let ds = build_dataset(series, archive, &[lead])?
        .remove(&lead)
        .expect("requested lead present");
    log::info!("lead {lead}: {} rows, {} skipped", ds.len(), ds.skipped);
    let (train, validation, test) = chronological_split(&ds, config.split())?;
    Ok(Splits {
        train,
        validation,
        test,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModels {
    pub banks: Vec<LeadTimeModelBank>,
    pub ensemble: StackedEnsemble,
    pub include_baseline: bool,
}

impl TrainedModels {
    pub fn bank_refs(&self) -> Vec<&LeadTimeModelBank> {
        self.banks.iter().collect()
    }

    pub fn member_predictions(&self, dataset: &Dataset) -> Result<MemberPredictions> {
        collect_member_predictions(&self.bank_refs(), self.include_baseline, dataset)
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        save_artifact(dir.join(BANKS_FILE), "model_banks", &self.banks)?;
        save_artifact(
            dir.join(ENSEMBLE_FILE),
            "stacked_ensemble",
            &(self.include_baseline, &self.ensemble),
        )
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let banks = load_artifact(dir.join(BANKS_FILE), "model_banks")?;
        let (include_baseline, ensemble) = load_artifact(dir.join(ENSEMBLE_FILE), "stacked_ensemble")?;
        Ok(TrainedModels {
            banks,
            ensemble,
            include_baseline,
        })
    }

    /// Member (speed, cos, sin) triples and the ensemble forecast for one
    /// feature row.
    pub fn forecast(&self, lead: u32, x: &[f64]) -> Result<LeadForecast> {
        let stack = self.ensemble.lead(lead)?;
        let mut members = Vec::with_capacity(stack.members.len());
        for bank in &self.banks {
            members.push(bank.predict_all(lead, x)?);
        }
        if self.include_baseline {
            members.push(crate::ensemble::baseline_prediction(x));
        }
        let combined = stack.combine(&members)?;
        Ok(LeadForecast {
            lead_time: lead,
            members,
            combined,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeadForecast {
    pub lead_time: u32,
    pub members: Vec<[f64; 3]>,
    pub combined: [f64; 3],
}

impl LeadForecast {
    pub fn ensemble_wind(&self) -> Result<(f64, f64)> {
        Ok((self.combined[0], decode_direction(self.combined[1], self.combined[2])?))
    }

    pub fn policy_features(&self) -> Vec<f64> {
        self.members.iter().flatten().copied().collect()
    }
}

/// Official forecast (speed, direction) carried in a feature row.
pub fn baseline_wind(x: &[f64]) -> Result<(f64, f64)> {
    Ok((x[OFFICIAL_SPEED], decode_direction(x[OFFICIAL_DIR_COS], x[OFFICIAL_DIR_SIN])?))
}

/// Last observed hour as a forecast.
pub fn persistence_wind(x: &[f64]) -> Result<(f64, f64)> {
    let k = LAGS - 1;
    Ok((
        x[SPEED_LAGS + k],
        decode_direction(x[DIR_COS_LAGS + k], x[DIR_SIN_LAGS + k])?,
    ))
}

/// Trains every configured family's bank and the stacking combiner, one lead
/// time at a time.
pub fn train_models(
    series: &HourlySeries,
    archive: &ForecastArchive,
    config: &PipelineConfig,
) -> Result<TrainedModels> {
    config.validate()?;
    let mut banks: Vec<LeadTimeModelBank> = Vec::new();
    let mut stacks = BTreeMap::new();
    for lead in config.leads() {
        let splits = lead_splits(series, archive, lead, config)?;
        let one = BTreeMap::from([(lead, splits)]);
        let mut lead_banks = Vec::with_capacity(config.families.len());
        for &family in &config.families {
            log::info!("lead {lead}: training {family}");
            lead_banks.push(train_bank(&one, &[lead], family, &config.bank_config(family))?);
        }
        let refs: Vec<&LeadTimeModelBank> = lead_banks.iter().collect();
        let preds = collect_member_predictions(&refs, config.include_baseline, &one[&lead].validation)?;
        let stack = train_stacker_with_grid(&preds, config.ensemble_folds, &ensemble_grid())?;
        stacks.insert(lead, stack);
        if banks.is_empty() {
            banks = lead_banks;
        } else {
            for (acc, b) in banks.iter_mut().zip(lead_banks) {
                acc.merge(b)?;
            }
        }
    }
    Ok(TrainedModels {
        banks,
        ensemble: StackedEnsemble {
            folds: config.ensemble_folds,
            stacks,
        },
        include_baseline: config.include_baseline,
    })
}

/// Validation MAE of each member and of the stacked combination, per target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackingCheck {
    pub lead_time: u32,
    pub members: Vec<Member>,
    /// `[member][target]`
    pub member_mae: Vec<[f64; 3]>,
    pub ensemble_mae: [f64; 3],
}

pub fn stacking_check(stack: &LeadStack, preds: &MemberPredictions) -> Result<StackingCheck> {
    if preds.is_empty() {
        return Err(Error::Empty("member predictions"));
    }
    let n = preds.len() as f64;
    let mut member_mae = vec![[0.0; 3]; preds.members.len()];
    let mut ensemble_mae = [0.0; 3];
    for row in &preds.rows {
        let combined = stack.combine(&row.predictions)?;
        for t in 0..3 {
            for (m, p) in row.predictions.iter().enumerate() {
                member_mae[m][t] += (p[t] - row.actual[t]).abs() / n;
            }
            ensemble_mae[t] += (combined[t] - row.actual[t]).abs() / n;
        }
    }
    Ok(StackingCheck {
        lead_time: preds.lead_time,
        members: preds.members.clone(),
        member_mae,
        ensemble_mae,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedPolicy {
    pub health_cost: f64,
    pub tree: PolicyTree,
    pub tuning: Vec<TuningScore>,
}

/// Policy trees over one lead time's member forecasts, sorted by health cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySet {
    pub lead_time: u32,
    pub members: Vec<Member>,
    pub feature_names: Vec<String>,
    pub policies: Vec<TrainedPolicy>,
}

impl PolicySet {
    pub fn health_costs(&self) -> Vec<f64> {
        self.policies.iter().map(|p| p.health_cost).collect()
    }

    /// The tree trained at the health cost nearest to `health_cost`.
    pub fn nearest(&self, health_cost: f64) -> Result<&TrainedPolicy> {
        nearest_health_cost(&self.health_costs(), health_cost)
            .map(|i| &self.policies[i])
            .ok_or(Error::Empty("policy set"))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        save_report(path, "policy_set", self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        load_artifact(path, "policy_set")
    }
}

fn actual_scenario(targets: &[f64; 3]) -> Result<Scenario> {
    scenario_forecast(targets[0], decode_direction(targets[1], targets[2])?)
}

fn actual_scenarios(preds: &MemberPredictions) -> Result<Vec<Scenario>> {
    preds.rows.iter().map(|r| actual_scenario(&r.actual)).collect()
}

/// Tunes and fits one policy tree per health cost on validation-split member
/// forecasts at the policy lead time.
pub fn train_policies(
    series: &HourlySeries,
    archive: &ForecastArchive,
    models: &TrainedModels,
    config: &PipelineConfig,
    health_costs: &[f64],
) -> Result<PolicySet> {
    config.validate()?;
    let lead = config.policy_lead;
    let splits = lead_splits(series, archive, lead, config)?;
    let preds = models.member_predictions(&splits.validation)?;
    train_policies_on(&preds, config, health_costs)
}

pub fn train_policies_on(
    preds: &MemberPredictions,
    config: &PipelineConfig,
    health_costs: &[f64],
) -> Result<PolicySet> {
    let x = preds.feature_matrix();
    let actual = actual_scenarios(preds)?;
    let mut costs = health_costs.to_vec();
    costs.sort_by(f64::total_cmp);
    costs.dedup();
    let mut policies = Vec::with_capacity(costs.len());
    for h in costs {
        let rewards = build_reward_matrix(&actual, h)?;
        let tuned = tune_policy_tree(
            &x,
            &rewards,
            &config.policy_depths,
            &config.policy_min_leaf,
            config.policy_folds,
        )?;
        log::info!(
            "policy H={h}: depth {}, {} leaves",
            tuned.tree.depth(),
            tuned.tree.n_leaves()
        );
        policies.push(TrainedPolicy {
            health_cost: h,
            tree: tuned.tree,
            tuning: tuned.scores,
        });
    }
    Ok(PolicySet {
        lead_time: preds.lead_time,
        members: preds.members.clone(),
        feature_names: member_feature_names(&preds.members),
        policies,
    })
}

/// Per-lead MAE and ES85 on the test split for every member, the ensemble
/// and persistence. Covers the configured leads the models were trained for.
pub fn evaluate(
    series: &HourlySeries,
    archive: &ForecastArchive,
    models: &TrainedModels,
    config: &PipelineConfig,
) -> Result<ForecastErrorReport> {
    let (leads, untrained): (Vec<u32>, Vec<u32>) = config
        .leads()
        .into_iter()
        .partition(|l| models.ensemble.stacks.contains_key(l));
    if !untrained.is_empty() {
        log::warn!("no trained models for leads {untrained:?}; skipped");
    }
    if leads.is_empty() {
        return Err(Error::invalid(format!(
            "none of the leads {:?} has trained models",
            config.leads()
        )));
    }
    let mut rows = Vec::new();
    for lead in leads {
        let splits = lead_splits(series, archive, lead, config)?;
        let test = &splits.test;
        if test.is_empty() {
            return Err(Error::Empty("test split"));
        }
        let preds = models.member_predictions(test)?;
        let stack = models.ensemble.lead(lead)?;
        let actual: Vec<(f64, f64)> = preds
            .rows
            .iter()
            .map(|r| Ok((r.actual[0], decode_direction(r.actual[1], r.actual[2])?)))
            .collect::<Result<_>>()?;
        for (m, member) in preds.members.iter().enumerate() {
            let p: Vec<(f64, f64)> = preds
                .rows
                .iter()
                .map(|r| {
                    let v = r.predictions[m];
                    Ok((v[0], decode_direction(v[1], v[2])?))
                })
                .collect::<Result<_>>()?;
            rows.push(forecast_error_row(lead, member.as_str(), &p, &actual)?);
        }
        let ens: Vec<(f64, f64)> = preds
            .rows
            .iter()
            .map(|r| crate::ensemble::predict_ensemble(stack, &r.predictions))
            .collect::<Result<_>>()?;
        rows.push(forecast_error_row(lead, "ensemble", &ens, &actual)?);
        let pers: Vec<(f64, f64)> = test
            .rows
            .iter()
            .map(|r| persistence_wind(r.features.as_slice()))
            .collect::<Result<_>>()?;
        rows.push(forecast_error_row(lead, "persistence", &pers, &actual)?);
    }
    Ok(ForecastErrorReport { rows })
}

pub fn write_error_report(report: &ForecastErrorReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    report.write_csv(create_writer(&dir.join(ERRORS_CSV_FILE))?)?;
    save_report(dir.join(ERRORS_JSON_FILE), "forecast_error_report", report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyOutcome {
    pub health_cost: f64,
    /// Total cost of a missed dangerous hour, `2000 + H`.
    pub false_negative_cost: f64,
    pub confusion: Confusion,
    pub trade_off: Option<TradeOff>,
    /// `2000·reduce + (2000+H)·FN` at this row's health cost.
    pub total_cost: f64,
}

/// Hour-by-hour decisions at the policy lead on the test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEvaluation {
    pub lead_time: u32,
    pub hours: usize,
    pub dangerous_hours: usize,
    pub baseline: Confusion,
    pub ensemble: Confusion,
    pub ensemble_trade_off: Option<TradeOff>,
    pub frontier: Vec<PolicyOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub health_cost: f64,
    pub period_start: String,
    pub period_end: String,
    /// State-machine runs driven by 1..3-hour-ahead scenario forecasts.
    pub baseline_operations: DecisionReport,
    pub ensemble_operations: DecisionReport,
    pub policy: PolicyEvaluation,
}

fn policy_cost(c: &Confusion, health_cost: f64) -> f64 {
    REDUCE_COST * (c.true_positives + c.false_positives) as f64
        + crate::policy::false_negative_cost(health_cost) * c.false_negatives as f64
}

fn action_for(s: Scenario) -> Prescription {
    if s.is_dangerous() {
        Prescription::Reduce
    } else {
        Prescription::Maintain
    }
}

/// Runs the operational state machine for the baseline and the ensemble over
/// the test period, and scores every policy tree hour by hour. Returns the
/// report and the ensemble run's cost ledger.
pub fn backtest(
    series: &HourlySeries,
    archive: &ForecastArchive,
    models: &TrainedModels,
    policies: &PolicySet,
    config: &PipelineConfig,
    health_cost: f64,
) -> Result<(BacktestReport, Vec<LedgerEntry>)> {
    crate::policy::check_health_cost(health_cost)?;

    // scenario forecasts for leads 1..=3 keyed by base time
    let mut by_time: BTreeMap<DateTime<Utc>, ([Option<Scenario>; LOOKAHEAD], [Option<Scenario>; LOOKAHEAD])> =
        BTreeMap::new();
    for lead in 1..=LOOKAHEAD as u32 {
        let splits = lead_splits(series, archive, lead, config)?;
        for row in &splits.test.rows {
            let x = row.features.as_slice();
            let (bs, bd) = baseline_wind(x)?;
            let (es, ed) = models.forecast(lead, x)?.ensemble_wind()?;
            let entry = by_time.entry(row.base_time).or_default();
            entry.0[lead as usize - 1] = Some(scenario_forecast(bs, bd)?);
            entry.1[lead as usize - 1] = Some(scenario_forecast(es, ed)?);
        }
    }
    let mut baseline_pred = Vec::new();
    let mut ensemble_pred = Vec::new();
    let mut actual = Vec::new();
    let mut times = Vec::new();
    for (t, (b, e)) in &by_time {
        let (Some(b), Some(e)) = (complete(b), complete(e)) else {
            continue;
        };
        let Some(now) = series.get(*t) else { continue };
        baseline_pred.push(b);
        ensemble_pred.push(e);
        actual.push(scenario_forecast(now.wind_speed, now.wind_direction)?);
        times.push(*t);
    }
    if actual.is_empty() {
        return Err(Error::Empty("backtest hours"));
    }
    let (baseline_ops, _) = simulate_operations(&baseline_pred, &actual, health_cost)?;
    let (mut ensemble_ops, ledger) = simulate_operations(&ensemble_pred, &actual, health_cost)?;
    ensemble_ops.compare_to(&baseline_ops);

    let lead = policies.lead_time;
    let splits = lead_splits(series, archive, lead, config)?;
    let preds = models.member_predictions(&splits.test)?;
    let truth = actual_scenarios(&preds)?;
    let stack = models.ensemble.lead(lead)?;
    let mut baseline_actions = Vec::with_capacity(preds.len());
    let mut ensemble_actions = Vec::with_capacity(preds.len());
    for (row, drow) in preds.rows.iter().zip(&splits.test.rows) {
        let (bs, bd) = baseline_wind(drow.features.as_slice())?;
        baseline_actions.push(action_for(scenario_forecast(bs, bd)?));
        let (es, ed) = crate::ensemble::predict_ensemble(stack, &row.predictions)?;
        ensemble_actions.push(action_for(scenario_forecast(es, ed)?));
    }
    let baseline = confusion_counts(&baseline_actions, &truth)?;
    let ensemble = confusion_counts(&ensemble_actions, &truth)?;
    let base_pair = (baseline.false_positives, baseline.false_negatives);
    let trade = |c: &Confusion| trade_off_metrics((c.false_positives, c.false_negatives), base_pair).ok();
    let x = preds.feature_matrix();
    let mut frontier = Vec::with_capacity(policies.policies.len());
    for p in &policies.policies {
        let actions: Vec<Prescription> = (0..x.n_rows())
            .map(|i| prescribe(&p.tree, x.row(i)))
            .collect::<Result<_>>()?;
        let confusion = confusion_counts(&actions, &truth)?;
        frontier.push(PolicyOutcome {
            health_cost: p.health_cost,
            false_negative_cost: crate::policy::false_negative_cost(p.health_cost),
            trade_off: trade(&confusion),
            total_cost: policy_cost(&confusion, p.health_cost),
            confusion,
        });
    }
    let report = BacktestReport {
        health_cost,
        period_start: format_time(times[0]),
        period_end: format_time(*times.last().unwrap()),
        baseline_operations: baseline_ops,
        ensemble_operations: ensemble_ops,
        policy: PolicyEvaluation {
            lead_time: lead,
            hours: truth.len(),
            dangerous_hours: truth.iter().filter(|s| s.is_dangerous()).count(),
            baseline,
            ensemble_trade_off: trade(&ensemble),
            ensemble,
            frontier,
        },
    };
    Ok((report, ledger))
}

fn complete(v: &[Option<Scenario>; LOOKAHEAD]) -> Option<[Scenario; LOOKAHEAD]> {
    let mut out = [Scenario::S1; LOOKAHEAD];
    for (o, s) in out.iter_mut().zip(v) {
        *o = (*s)?;
    }
    Some(out)
}

pub fn write_ledger_csv<W: Write>(writer: W, ledger: &[LedgerEntry]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["hour", "mode", "actual", "pollution_event", "cost"])?;
    for e in ledger {
        w.write_record([
            e.hour.to_string(),
            match e.mode {
                crate::evalsim::Mode::Normal => "normal".to_string(),
                crate::evalsim::Mode::Reduced => "reduced".to_string(),
            },
            e.actual.as_str().to_string(),
            e.pollution_event.to_string(),
            e.cost.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<ledger csv>", e))?;
    Ok(())
}

pub fn write_backtest(report: &BacktestReport, ledger: &[LedgerEntry], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    save_report(dir.join(DECISION_REPORT_FILE), "backtest_report", report)?;
    write_ledger_csv(create_writer(&dir.join(LEDGER_FILE))?, ledger)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        let back = PipelineConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_config_keeps_defaults() {
        let c = PipelineConfig::from_toml_str("lead_times = [1, 3]\npolicy_lead = 1\nseed = 9\n").unwrap();
        assert_eq!(c.lead_times, vec![1, 3]);
        assert_eq!(c.seed, 9);
        assert_eq!(c.families, Family::ALL.to_vec());
    }

    #[test]
    fn rejects_bad_config() {
        for text in [
            "lead_times = []",
            "lead_times = [0]",
            "train_fraction = 0.9",
            "health_cost = 500",
            "policy_lead = 7",
            "mystery_key = 1",
            "families = [\"svm\"]",
        ] {
            assert!(
                matches!(PipelineConfig::from_toml_str(text), Err(Error::Config(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn artifact_kind_and_version_checked() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.json");
        save_artifact(&p, "numbers", &vec![1.5, 2.0]).unwrap();
        let v: Vec<f64> = load_artifact(&p, "numbers").unwrap();
        assert_eq!(v, vec![1.5, 2.0]);
        assert!(load_artifact::<Vec<f64>>(&p, "other").is_err());
        let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
        v["version"] = 99.into();
        fs::write(&p, v.to_string()).unwrap();
        assert!(matches!(
            load_artifact::<Vec<f64>>(&p, "numbers"),
            Err(Error::ArtifactVersion { found: 99, .. })
        ));
    }

    #[test]
    fn policy_costs_include_live_value() {
        let c = PipelineConfig {
            health_cost: 12000.0,
            ..Default::default()
        };
        assert_eq!(
            c.policy_health_costs(),
            vec![2000.0, 4000.0, 8000.0, 12000.0, 13000.0, 18000.0]
        );
    }
}
