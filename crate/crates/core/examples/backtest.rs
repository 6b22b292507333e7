//! The whole offline chain on disk: synth, ingest, train, evaluate, policy
//! train and backtest, with the artifacts written to a scratch directory.
//!
//! `cargo run --release --example backtest -- [out_dir]`

use windops::pipeline::*;
use windops::regress::Family;
use windops::synthgen::GeneratorConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("windops-backtest"));
    let config = PipelineConfig {
        data_dir: root.join("data"),
        artifacts_dir: root.join("artifacts"),
        lead_times: vec![1, 2, 3, 6],
        families: vec![Family::ElasticNet, Family::DecisionTree, Family::GbtLeafwise],
        grid: GridChoice::Reduced,
        health_cost: 8000.0,
        ..PipelineConfig::default()
    };
    std::fs::create_dir_all(&config.data_dir)?;
    std::fs::create_dir_all(&config.artifacts_dir)?;

    let g = GeneratorConfig {
        hours: 3000,
        seed: 2,
        ..GeneratorConfig::default()
    };
    let summary = synth(&g, &config.data_dir)?;
    println!("synth: {summary:?}");
    ingest_file(config.data_dir.join(SENSORS_FILE), config.data_dir.join(HOURLY_FILE), &config)?;
    let (series, archive) = load_inputs(&config)?;

    let models = train_models(&series, &archive, &config)?;
    models.save(&config.artifacts_dir)?;
    let errors = evaluate(&series, &archive, &models, &config)?;
    write_error_report(&errors, &config.artifacts_dir)?;
    println!("\n{:<6}{:<19}{:>10}{:>12}{:>12}{:>12}", "lead", "source", "speed MAE", "speed ES85", "dir MAE", "dir ES85");
    for r in &errors.rows {
        println!(
            "{:<6}{:<19}{:>10.3}{:>12.3}{:>12.1}{:>12.1}",
            r.lead_time, r.source, r.speed_mae, r.speed_es85, r.direction_mae, r.direction_es85
        );
    }

    let policies = train_policies(&series, &archive, &models, &config, &config.policy_health_costs())?;
    policies.save(config.artifacts_dir.join(POLICIES_FILE))?;
    let (report, ledger) = backtest(&series, &archive, &models, &policies, &config, config.health_cost)?;
    write_backtest(&report, &ledger, &config.artifacts_dir)?;

    println!("\nstate machine over {} .. {} at H = {}", report.period_start, report.period_end, report.health_cost);
    for (name, ops) in [("official", &report.baseline_operations), ("ensemble", &report.ensemble_operations)] {
        println!(
            "  {name:<9} reduced {:>4} h, events {:>3}, cost {:>9.0}",
            ops.reduced_hours, ops.false_negatives, ops.total_cost
        );
    }
    let p = &report.policy;
    println!("\npolicy trees at +{} h ({} test hours, {} dangerous)", p.lead_time, p.hours, p.dangerous_hours);
    for o in &p.frontier {
        let c = &o.confusion;
        println!(
            "  H {:>6}: FP {:>4} FN {:>3} TP {:>3} cost {:>9.0}",
            o.health_cost, c.false_positives, c.false_negatives, c.true_positives, o.total_cost
        );
    }
    println!("\nartifacts in {}", config.artifacts_dir.display());
    Ok(())
}
