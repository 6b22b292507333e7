//! Drives the HTTP API in-process: streams sensor minutes in, then reads the
//! forecast, the recommendation and a what-if.
//!
//! For a listening server use the `windops serve` subcommand instead.

use std::sync::Arc;

use axum::body::Body;
use axum::http::Request;
use http_body_util::BodyExt;
use tower::ServiceExt;
use windops::ingest::{ingest_minutes, ForecastArchive};
use windops::pipeline::*;
use windops::regress::Family;
use windops::service::{router, AppState, Artifacts};
use windops::synthgen::{generate_official_forecast, generate_weather, GeneratorConfig};

async fn call(app: &axum::Router, method: &str, uri: &str, body: String) -> (u16, serde_json::Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body))
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status().as_u16();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(serde_json::Value::Null))
}

#[tokio::main(flavor = "current_thread")]
async fn main() -> windops::Result<()> {
    let g = GeneratorConfig {
        hours: 900,
        seed: 5,
        ..GeneratorConfig::default()
    };
    let world = generate_weather(&g)?;
    let archive = ForecastArchive::new(generate_official_forecast(&world.truth, &g)?);
    let config = PipelineConfig {
        lead_times: vec![1, 2, 3],
        families: vec![Family::ElasticNet, Family::DecisionTree],
        grid: GridChoice::Reduced,
        ..PipelineConfig::default()
    };
    // train on the first 700 hours, then replay the rest live
    let cut = g.start + chrono::Duration::hours(700);
    let (past, live): (Vec<_>, Vec<_>) = world.minutes.into_iter().partition(|r| r.timestamp < cut);
    let series = ingest_minutes(&past, config.ingest_options())?;
    let models = train_models(&series, &archive, &config)?;
    let policies = train_policies(&series, &archive, &models, &config, &config.policy_health_costs())?;

    let state = Arc::new(AppState::new(config, archive));
    let app = router(state.clone());
    println!("before artifacts: {:?}", call(&app, "GET", "/api/forecast", String::new()).await);
    state.install(Artifacts::new(models, policies)?);

    let tail: Vec<_> = past.iter().filter(|r| r.timestamp >= cut - chrono::Duration::hours(60)).cloned().collect();
    for chunk in tail.chunks(600).chain(live.chunks(60).take(24)) {
        let (status, ack) = call(&app, "POST", "/api/sensor", serde_json::to_string(chunk).unwrap()).await;
        if status != 200 {
            println!("sensor post: {status} {ack}");
        }
    }

    let (_, forecast) = call(&app, "GET", "/api/forecast", String::new()).await;
    println!("forecast: {}", serde_json::to_string_pretty(&forecast).unwrap());
    let (_, rec) = call(&app, "GET", "/api/recommendation?health_cost=8000", String::new()).await;
    println!("recommendation: {} via tree at H = {}", rec["action"], rec["tree_health_cost"]);
    for h in [2000, 20000] {
        let (_, w) = call(&app, "GET", &format!("/api/whatif?health_cost={h}"), String::new()).await;
        println!("what-if H = {h}: {} (tree {})", w["action"], w["tree_health_cost"]);
    }
    let (_, ov) = call(&app, "POST", "/api/override", r#"{"action":"reduce"}"#.into()).await;
    println!("override: {ov}");
    let (_, status) = call(&app, "GET", "/api/status", String::new()).await;
    println!("status: {status}");
    Ok(())
}
