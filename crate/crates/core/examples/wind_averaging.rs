//! Vector averaging of wind and short-gap imputation.

use chrono::{Duration, TimeZone, Utc};
use windops::ingest::*;

fn main() -> windops::Result<()> {
    for samples in [
        vec![(5.0, 180.0), (5.0, 0.0)],
        vec![(2.0, 0.0), (2.0, 90.0)],
        vec![(3.0, 350.0), (3.0, 10.0)],
    ] {
        let (speed, dir) = vector_average(&samples)?;
        let naive = samples.iter().map(|s| s.1).sum::<f64>() / samples.len() as f64;
        println!("{samples:?} -> {speed:.3} m/s from {dir:.1}° (arithmetic mean direction {naive:.1}°)");
    }

    // an hour of minute data: southerly for 30 minutes, then northerly
    let t0 = Utc.with_ymd_and_hms(2022, 3, 1, 0, 0, 0).unwrap();
    let minutes: Vec<RawSensorRecord> = (0..120)
        .filter(|m| !(70..75).contains(m))
        .map(|m| RawSensorRecord {
            timestamp: t0 + Duration::minutes(m),
            wind_speed: Some(5.0),
            wind_direction: Some(if m < 30 { 180.0 } else { 0.0 }),
            solar_irradiance: Some(300.0),
            temperature: Some(12.0 + m as f64 / 60.0),
            pluviometry: Some(0.0),
        })
        .collect();
    let hourly = ingest_minutes(&minutes, IngestOptions::default())?;
    for h in hourly.present() {
        println!(
            "{} speed {:.3} dir {:.1} temperature {:.2}",
            h.timestamp, h.wind_speed, h.wind_direction, h.temperature
        );
    }

    let values = [Some(1.0), None, None, Some(4.0), None, None, None, None, None, None, None, Some(0.0)];
    let series: Vec<_> = values
        .iter()
        .enumerate()
        .map(|(i, v)| (t0 + Duration::hours(i as i64), *v))
        .collect();
    let filled = impute_linear(&series, DEFAULT_MAX_GAP_HOURS)?;
    let shown: Vec<String> = filled
        .points
        .iter()
        .map(|p| p.value.map_or("-".into(), |v| format!("{v:.1}{}", if p.imputed { "*" } else { "" })))
        .collect();
    println!("imputed (* filled): {}", shown.join(" "));
    println!("left open: {:?}", filled.unfilled);
    Ok(())
}
