//! Trains every model family on a small synthetic site, stacks them and
//! compares validation MAE per member.
//!
//! Uses the reduced hyperparameter grid so it finishes in about a minute.

use windops::features::Target;
use windops::ingest::{ingest_minutes, ForecastArchive};
use windops::pipeline::*;
use windops::synthgen::{generate_official_forecast, generate_weather, GeneratorConfig};

fn main() -> windops::Result<()> {
    let g = GeneratorConfig {
        hours: 2500,
        seed: 11,
        ..GeneratorConfig::default()
    };
    let world = generate_weather(&g)?;
    let archive = ForecastArchive::new(generate_official_forecast(&world.truth, &g)?);
    let config = PipelineConfig {
        lead_times: vec![1, 3],
        grid: GridChoice::Reduced,
        ..PipelineConfig::default()
    };
    let series = ingest_minutes(&world.minutes, config.ingest_options())?;
    let models = train_models(&series, &archive, &config)?;

    for lead in config.leads() {
        let splits = lead_splits(&series, &archive, lead, &config)?;
        let preds = models.member_predictions(&splits.validation)?;
        let stack = models.ensemble.lead(lead)?;
        let check = stacking_check(stack, &preds)?;
        println!("\nlead {lead} h, validation MAE ({} rows)", preds.len());
        println!("{:<19}{:>10}{:>10}{:>10}", "member", "speed", "dir cos", "dir sin");
        for (m, mae) in check.members.iter().zip(&check.member_mae) {
            println!("{:<19}{:>10.4}{:>10.4}{:>10.4}", m.as_str(), mae[0], mae[1], mae[2]);
        }
        let e = check.ensemble_mae;
        println!("{:<19}{:>10.4}{:>10.4}{:>10.4}", "stacked", e[0], e[1], e[2]);
        let c = stack.combiner(Target::Speed);
        println!("speed combiner: alpha {} l1 {} cv MAE {:.4}", c.alpha, c.l1_ratio, c.cv_mae());
    }
    Ok(())
}
