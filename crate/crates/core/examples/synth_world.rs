//! Generates a synthetic site and summarizes it.
//!
//! `cargo run --example synth_world -- [hours] [seed]`

use windops::ingest::{ingest_minutes, IngestOptions};
use windops::synthgen::{generate_official_forecast, generate_weather, GeneratorConfig};

fn main() -> windops::Result<()> {
    let mut args = std::env::args().skip(1);
    let hours = args.next().map_or(Ok(3000), |a| a.parse()).expect("hours");
    let seed = args.next().map_or(Ok(7), |a| a.parse()).expect("seed");
    let config = GeneratorConfig {
        hours,
        seed,
        ..GeneratorConfig::default()
    };
    let world = generate_weather(&config)?;
    let forecasts = generate_official_forecast(&world.truth, &config)?;
    println!("{} minute records, {} official issuances", world.minutes.len(), forecasts.len());
    println!(
        "dangerous hours {:.2}% (entry probability {:.5}, mean spell {:.1} h)",
        100.0 * world.dangerous_rate,
        world.regime_entry_probability,
        world.regime_dwell_hours
    );

    // official forecast error grows with lead time
    for lead in [1usize, 6, 24, 48] {
        let errs: Vec<f64> = forecasts
            .iter()
            .filter_map(|f| {
                let i = (f.issue_time - config.start).num_hours() as usize + lead;
                let truth = world.truth.get(i)?;
                Some((f.hours.get(lead - 1)?.wind_speed - truth.wind_speed).abs())
            })
            .collect();
        println!("official speed MAE at +{lead:>2} h: {:.3} m/s", errs.iter().sum::<f64>() / errs.len() as f64);
    }

    let series = ingest_minutes(&world.minutes, IngestOptions::default())?;
    println!("ingested {} hours, {} left missing", series.len(), series.missing_hours());
    Ok(())
}
