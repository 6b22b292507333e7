use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use chrono::{DateTime, Duration, Utc};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;
use windops::ingest::{ingest_minutes, ForecastArchive, HourlySeries, RawSensorRecord};
use windops::pipeline::{train_models, train_policies, GridChoice, PipelineConfig, PolicySet, TrainedModels};
use windops::regress::Family;
use windops::service::*;
use windops::synthgen::{generate_official_forecast, generate_weather, GeneratorConfig};

struct Fixture {
    config: PipelineConfig,
    models: TrainedModels,
    policies: PolicySet,
    minutes: Vec<RawSensorRecord>,
    archive: ForecastArchive,
    start: DateTime<Utc>,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let g = GeneratorConfig {
            hours: 600,
            seed: 5,
            ..GeneratorConfig::default()
        };
        let world = generate_weather(&g).unwrap();
        let archive = ForecastArchive::new(generate_official_forecast(&world.truth, &g).unwrap());
        let config = PipelineConfig {
            lead_times: vec![1, 2, 3],
            families: vec![Family::ElasticNet, Family::DecisionTree],
            grid: GridChoice::Reduced,
            ..PipelineConfig::default()
        };
        let series = ingest_minutes(&world.minutes, config.ingest_options()).unwrap();
        let models = train_models(&series, &archive, &config).unwrap();
        let policies = train_policies(&series, &archive, &models, &config, &config.policy_health_costs()).unwrap();
        Fixture {
            start: g.start,
            config,
            models,
            policies,
            minutes: world.minutes,
            archive,
        }
    })
}

fn hour(i: i64) -> DateTime<Utc> {
    fixture().start + Duration::hours(i)
}

fn minutes(from: i64, to: i64) -> Vec<RawSensorRecord> {
    let (a, b) = (hour(from), hour(to));
    fixture()
        .minutes
        .iter()
        .filter(|r| r.timestamp >= a && r.timestamp < b)
        .cloned()
        .collect()
}

fn bare_app() -> Arc<AppState> {
    let f = fixture();
    Arc::new(AppState::new(f.config.clone(), f.archive.clone()))
}

fn app() -> Arc<AppState> {
    let f = fixture();
    let app = bare_app();
    assert!(app.install(Artifacts::new(f.models.clone(), f.policies.clone()).unwrap()));
    app
}

/// App with hours 0..60 already posted.
fn warm_app() -> Arc<AppState> {
    let app = app();
    let ack = app.ingest_records(minutes(0, 60)).unwrap();
    assert_eq!(ack.base_time.as_deref(), Some(fmt(hour(59)).as_str()));
    app
}

fn fmt(t: DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

async fn call(app: &Arc<AppState>, req: Request<Body>) -> (StatusCode, Value) {
    let resp = router(app.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, v)
}

async fn get(app: &Arc<AppState>, uri: &str) -> (StatusCode, Value) {
    call(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn post(app: &Arc<AppState>, uri: &str, body: String) -> (StatusCode, Value) {
    let req = Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body))
        .unwrap();
    call(app, req).await
}

#[tokio::test]
async fn unavailable_before_artifacts() {
    let app = bare_app();
    let (s, v) = get(&app, "/api/status").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["artifacts_loaded"], false);
    for uri in ["/api/forecast", "/api/recommendation", "/api/history", "/api/ledger"] {
        let (s, v) = get(&app, uri).await;
        assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE, "{uri}");
        assert!(v["error"].is_string());
    }
    let body = serde_json::to_string(&minutes(0, 1)).unwrap();
    assert_eq!(post(&app, "/api/sensor", body).await.0, StatusCode::SERVICE_UNAVAILABLE);
}

#[tokio::test]
async fn unavailable_until_a_complete_hour() {
    let app = app();
    assert_eq!(get(&app, "/api/forecast").await.0, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(get(&app, "/api/recommendation").await.0, StatusCode::SERVICE_UNAVAILABLE);
    let (s, v) = get(&app, "/api/status").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["lead_times"], serde_json::json!([1, 2, 3]));
}

#[tokio::test]
async fn forecast_schema() {
    let app = warm_app();
    let (s, v) = get(&app, "/api/forecast?leads=1").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["base_time"], fmt(hour(59)));
    let entries = v["forecasts"].as_array().unwrap();
    assert_eq!(entries.len(), 1);
    let e = &entries[0];
    assert_eq!(e["lead_time"], 1);
    assert_eq!(e["valid_time"], fmt(hour(60)));
    let labels = ["S1", "S2", "S2b", "S3", "S3b", "S4"];
    for source in ["ensemble", "official"] {
        let w = &e[source];
        assert!(w["speed"].as_f64().unwrap() >= 0.0);
        assert!((0.0..360.0).contains(&w["direction"].as_f64().unwrap()));
        let scenario = w["scenario"].as_str().unwrap();
        assert!(labels.contains(&scenario));
        assert_eq!(w["dangerous"], matches!(scenario, "S3b" | "S4"));
    }
    let (_, all) = get(&app, "/api/forecast").await;
    assert_eq!(all["forecasts"].as_array().unwrap().len(), 3);
    assert_eq!(get(&app, "/api/forecast?leads=7").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get(&app, "/api/forecast?leads=one").await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn a_new_hour_advances_the_forecast() {
    let app = warm_app();
    let version = app.snapshot().version;
    // the first half of the hour completes nothing
    let first_half: Vec<RawSensorRecord> = minutes(60, 61).into_iter().take(30).collect();
    let (s, ack) = post(&app, "/api/sensor", serde_json::to_string(&first_half).unwrap()).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(ack["completed_hours"], serde_json::json!([]));
    assert_eq!(app.snapshot().version, version);

    let (s, ack) = post(&app, "/api/sensor", serde_json::to_string(&minutes(60, 61)).unwrap()).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(ack["completed_hours"], serde_json::json!([fmt(hour(60))]));
    let (_, v) = get(&app, "/api/forecast?leads=1,3").await;
    assert_eq!(v["base_time"], fmt(hour(60)));
    assert_eq!(v["forecasts"][1]["valid_time"], fmt(hour(63)));
}

#[tokio::test]
async fn repeated_posts_are_idempotent() {
    let app = warm_app();
    let batch = serde_json::to_string(&minutes(60, 61)).unwrap();
    let (_, first) = post(&app, "/api/sensor", batch.clone()).await;
    let before = get(&app, "/api/forecast").await.1;
    let version = app.snapshot().version;
    let (s, again) = post(&app, "/api/sensor", batch).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(again["accepted"], 0);
    assert_eq!(again["unchanged"], first["accepted"]);
    assert_eq!(again["completed_hours"], serde_json::json!([]));
    assert_eq!(app.snapshot().version, version);
    assert_eq!(get(&app, "/api/forecast").await.1, before);
}

#[tokio::test]
async fn bad_sensor_posts() {
    let app = warm_app();
    // an unchanged old record is a retry; a changed one is a step back
    let mut old = minutes(10, 11);
    let (s, _) = post(&app, "/api/sensor", serde_json::to_string(&old).unwrap()).await;
    assert_eq!(s, StatusCode::OK);
    old[0].wind_speed = Some(9.5);
    let (s, v) = post(&app, "/api/sensor", serde_json::to_string(&old).unwrap()).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert!(v["error"].as_str().unwrap().contains("line 1"));
    for body in ["not json", "[{\"timestamp\": \"yesterday\"}]", "{}"] {
        assert_eq!(post(&app, "/api/sensor", body.to_string()).await.0, StatusCode::BAD_REQUEST, "{body}");
    }
    // nothing was applied
    assert_eq!(app.snapshot().base_time, Some(hour(59)));
}

#[tokio::test]
async fn recommendation_and_whatif() {
    let app = warm_app();
    let (s, v) = get(&app, "/api/recommendation").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["tree_health_cost"], 8000.0);
    assert_eq!(v["what_if"], false);
    assert!(matches!(v["action"].as_str().unwrap(), "reduce" | "maintain"));
    assert!(v["tree_path"].is_array());
    let (_, w) = get(&app, "/api/whatif?health_cost=20000").await;
    assert_eq!(w["tree_health_cost"], 18000.0);
    assert_eq!(w["what_if"], true);
    let (_, same) = get(&app, "/api/whatif?health_cost=8000").await;
    assert_eq!(same["action"], v["action"]);
    assert_eq!(same["tree_path"], v["tree_path"]);
    assert_eq!(get(&app, "/api/whatif").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get(&app, "/api/whatif?health_cost=-3").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get(&app, "/api/recommendation?health_cost=abc").await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn higher_health_cost_reduces_whenever_lower_does() {
    let app = warm_app();
    let mut checked = 0;
    for h in 60..200 {
        app.ingest_records(minutes(h, h + 1)).unwrap();
        let (_, low) = get(&app, "/api/whatif?health_cost=4000").await;
        let (_, high) = get(&app, "/api/whatif?health_cost=20000").await;
        assert_eq!(low["tree_health_cost"], 4000.0);
        assert_eq!(high["tree_health_cost"], 18000.0);
        if low["action"] == "reduce" {
            assert_eq!(high["action"], "reduce", "hour {h}");
        }
        checked += 1;
    }
    assert_eq!(checked, 140);
}

#[tokio::test]
async fn override_sets_the_mode_and_is_logged() {
    let app = warm_app();
    let (s, e) = post(&app, "/api/override", r#"{"action": "reduce"}"#.into()).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(e["kind"], "override");
    assert_eq!(e["mode"], "reduced");
    assert_eq!(e["cost"], 0.0);
    let (_, ledger) = get(&app, "/api/ledger").await;
    assert_eq!(ledger["current_mode"], "reduced");
    assert_eq!(ledger["entries"].as_array().unwrap().last().unwrap()["kind"], "override");
    let (_, r) = get(&app, "/api/recommendation").await;
    assert_eq!(r["current_mode"], "reduced");
    assert_eq!(r["override_active"], true);

    // the next hour starts from the overridden mode and clears the flag
    app.ingest_records(minutes(60, 61)).unwrap();
    let (_, ledger) = get(&app, "/api/ledger").await;
    let last = ledger["entries"].as_array().unwrap().last().unwrap().clone();
    assert_eq!(last["kind"], "hour");
    assert_eq!(last["time"], fmt(hour(60)));
    let (_, r) = get(&app, "/api/recommendation").await;
    assert_eq!(r["override_active"], false);

    for body in [r#"{"action": "stop"}"#, r#"{"action": "reduce", "why": 1}"#, "{}"] {
        assert_eq!(post(&app, "/api/override", body.into()).await.0, StatusCode::BAD_REQUEST, "{body}");
    }
}

#[tokio::test]
async fn history_window() {
    let app = warm_app();
    let (s, v) = get(&app, "/api/history?hours=5").await;
    assert_eq!(s, StatusCode::OK);
    let actuals = v["actuals"].as_array().unwrap();
    assert_eq!(actuals.len(), 5);
    assert_eq!(actuals.last().unwrap()["time"], fmt(hour(59)));
    let times: Vec<&Value> = actuals.iter().map(|a| &a["time"]).collect();
    for f in v["forecasts"].as_array().unwrap() {
        assert!(times.contains(&&f["valid_time"]));
    }
    assert_eq!(get(&app, "/api/history").await.1["hours"], DEFAULT_HISTORY_HOURS);
    assert_eq!(get(&app, "/api/history?hours=0").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get(&app, "/api/history?hours=169").await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn official_forecast_post() {
    let app = warm_app();
    let f = fixture();
    let issuance = f.archive.issuances()[3].clone();
    let (s, v) = post(&app, "/api/official-forecast", serde_json::to_string(&issuance).unwrap()).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["issue_time"], fmt(issuance.issue_time));
    let mut short = issuance;
    short.hours.truncate(10);
    assert_eq!(
        post(&app, "/api/official-forecast", serde_json::to_string(&short).unwrap()).await.0,
        StatusCode::BAD_REQUEST
    );
}

#[tokio::test]
async fn live_forecast_matches_the_offline_pipeline_bit_for_bit() {
    let app = app();
    app.ingest_records(minutes(0, 60)).unwrap();
    // hour by hour past the retention window
    for h in 60..200 {
        app.ingest_records(minutes(h, h + 1)).unwrap();
    }
    let (_, live) = get(&app, "/api/forecast").await;
    assert_eq!(live["base_time"], fmt(hour(199)));

    let f = fixture();
    let artifacts = Artifacts::new(f.models.clone(), f.policies.clone()).unwrap();
    let series: HourlySeries = ingest_minutes(&minutes(0, 200), f.config.ingest_options()).unwrap();
    for (i, lead) in [1u32, 2, 3].into_iter().enumerate() {
        let (entry, _) = forecast_at(&artifacts, &series, &f.archive, hour(199), lead).unwrap();
        assert_eq!(live["forecasts"][i], serde_json::to_value(&entry).unwrap(), "lead {lead}");
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn readers_see_consistent_snapshots_during_recompute() {
    let app = warm_app();
    let done = Arc::new(AtomicBool::new(false));
    let writer = {
        let (app, done) = (app.clone(), done.clone());
        tokio::task::spawn_blocking(move || {
            for h in 60..100 {
                app.ingest_records(minutes(h, h + 1)).unwrap();
            }
            done.store(true, Ordering::SeqCst);
        })
    };
    let mut readers = Vec::new();
    for _ in 0..2 {
        let (app, done) = (app.clone(), done.clone());
        readers.push(tokio::spawn(async move {
            let mut last_base = String::new();
            let mut reads = 0;
            while !done.load(Ordering::SeqCst) || reads == 0 {
                let (s, v) = get(&app, "/api/forecast").await;
                assert_eq!(s, StatusCode::OK);
                let base = v["base_time"].as_str().unwrap().to_string();
                assert!(base >= last_base, "base time went back");
                let t: DateTime<Utc> = base.parse().unwrap();
                for e in v["forecasts"].as_array().unwrap() {
                    let lead = e["lead_time"].as_i64().unwrap();
                    assert_eq!(e["valid_time"], fmt(t + Duration::hours(lead)));
                }
                last_base = base;
                reads += 1;
            }
            reads
        }));
    }
    writer.await.unwrap();
    for r in readers {
        assert!(r.await.unwrap() > 0);
    }
    assert_eq!(app.snapshot().base_time, Some(hour(99)));
}
