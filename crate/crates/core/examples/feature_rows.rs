//! Builds one 304-column feature row and the per-lead datasets.

use windops::features::*;
use windops::ingest::{ForecastArchive, HourlySeries};
use windops::synthgen::{generate_official_forecast, generate_weather, GeneratorConfig};

fn main() -> windops::Result<()> {
    let g = GeneratorConfig {
        hours: 400,
        seed: 3,
        ..GeneratorConfig::default()
    };
    let world = generate_weather(&g)?;
    let archive = ForecastArchive::new(generate_official_forecast(&world.truth, &g)?);
    let series = HourlySeries::from_contiguous(world.truth)?;

    let t = series.time_at(200);
    let (row, issue) = build_feature_vector(&series, &archive, t, 3)?;
    let names = feature_names();
    println!("row at {t} for +3 h uses the official run issued {issue}");
    for i in [SPEED_LAGS, SPEED_LAGS + 48, DIR_COS_LAGS + 48, HOUR_COS, OFFICIAL_SPEED, OFFICIAL_TEMPERATURE] {
        println!("  {:<24} {:>9.4}", names[i], row.as_slice()[i]);
    }
    println!("  ... {} columns in total", row.len());

    let datasets = build_dataset(&series, &archive, &[1, 6, 24])?;
    for (lead, ds) in &datasets {
        let (train, val, test) = chronological_split(ds, SplitFractions::default())?;
        println!(
            "lead {lead:>2}: {} rows ({} skipped) -> train {} / validation {} / test {}",
            ds.len(),
            ds.skipped,
            train.len(),
            val.len(),
            test.len()
        );
    }
    Ok(())
}
