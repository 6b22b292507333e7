use chrono::{DateTime, Duration, TimeZone, Utc};
use proptest::prelude::*;
use windops::features::*;
use windops::ingest::*;
use windops::synthgen::{generate_official_forecast, generate_weather, GeneratorConfig};

fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2021, 6, 1, 0, 0, 0).unwrap()
}

fn record(minute: i64, speed: f64, dir: f64) -> RawSensorRecord {
    RawSensorRecord {
        timestamp: t0() + Duration::minutes(minute),
        wind_speed: Some(speed),
        wind_direction: Some(dir),
        solar_irradiance: Some(100.0),
        temperature: Some(20.0),
        pluviometry: Some(0.0),
    }
}

#[test]
fn opposite_winds_cancel() {
    let (speed, _) = vector_average(&[(5.0, 180.0), (5.0, 0.0)]).unwrap();
    assert!(speed.abs() < 1e-9);
    // the same example lifted to a full hour of minute records
    let minutes: Vec<RawSensorRecord> = (0..60)
        .map(|m| record(m, 5.0, if m < 30 { 180.0 } else { 0.0 }))
        .collect();
    let hourly = ingest_minutes(&minutes, IngestOptions::default()).unwrap();
    assert_eq!(hourly.len(), 1);
    let h = hourly.get(t0()).unwrap();
    assert!(h.wind_speed.abs() < 1e-9);
    assert_eq!(h.temperature, 20.0);
}

#[test]
fn vector_average_of_a_quarter_turn() {
    let (speed, dir) = vector_average(&[(2.0, 0.0), (2.0, 90.0)]).unwrap();
    assert!((speed - 2f64.sqrt()).abs() < 1e-12);
    assert!((dir - 45.0).abs() < 1e-9);
    let (_, dir) = vector_average(&[(1.0, 350.0), (1.0, 10.0)]).unwrap();
    assert!(dir.abs() < 1e-9 || (dir - 360.0).abs() < 1e-9);
    assert!(vector_average(&[]).is_err());
}

/// Interior runs of at most `max_gap` missing samples are filled; everything
/// else is left and reported. Written as a plain scan over the input.
fn reference_scan(values: &[Option<f64>], max_gap: usize) -> (Vec<Option<f64>>, Vec<(usize, usize, bool)>) {
    let mut out = values.to_vec();
    let mut unfilled = Vec::new();
    let mut i = 0;
    while i < values.len() {
        if values[i].is_some() {
            i += 1;
            continue;
        }
        let start = i;
        while i < values.len() && values[i].is_none() {
            i += 1;
        }
        let len = i - start;
        let boundary = start == 0 || i == values.len();
        if boundary || len > max_gap {
            unfilled.push((start, len, boundary));
        } else {
            let (a, b) = (values[start - 1].unwrap(), values[i].unwrap());
            for k in 0..len {
                out[start + k] = Some(a + (b - a) * (k + 1) as f64 / (len + 1) as f64);
            }
        }
    }
    (out, unfilled)
}

#[test]
fn gaps_against_a_reference_scan() {
    // boundary gap of 2, interior gaps of 1, 6, 10 and 7
    let mut values: Vec<Option<f64>> = (0..60).map(|i| Some(i as f64 * 0.5 + 1.0)).collect();
    for r in [0..2, 5..6, 10..16, 20..30, 40..47] {
        for i in r {
            values[i] = None;
        }
    }
    let series: Vec<(DateTime<Utc>, Option<f64>)> = values
        .iter()
        .enumerate()
        .map(|(i, v)| (t0() + Duration::hours(i as i64), *v))
        .collect();
    let got = impute_linear(&series, DEFAULT_MAX_GAP_HOURS).unwrap();
    let (expected, unfilled) = reference_scan(&values, DEFAULT_MAX_GAP_HOURS);
    for (i, (p, e)) in got.points.iter().zip(&expected).enumerate() {
        match (p.value, e) {
            (Some(a), Some(b)) => assert!((a - b).abs() < 1e-12, "hour {i}"),
            (None, None) => {}
            other => panic!("hour {i}: {other:?}"),
        }
        assert_eq!(p.imputed, values[i].is_none() && e.is_some(), "hour {i}");
    }
    let reported: Vec<(usize, usize, bool)> = got
        .unfilled
        .iter()
        .map(|g| ((g.start - t0()).num_hours() as usize, g.len, g.boundary))
        .collect();
    assert_eq!(reported, unfilled);
    assert!(reported.contains(&(20, 10, false)));
}

fn small_world() -> (HourlySeries, ForecastArchive) {
    let g = GeneratorConfig {
        hours: 300,
        seed: 9,
        ..GeneratorConfig::default()
    };
    let w = generate_weather(&g).unwrap();
    let archive = ForecastArchive::new(generate_official_forecast(&w.truth, &g).unwrap());
    (HourlySeries::from_contiguous(w.truth).unwrap(), archive)
}

#[test]
fn feature_vector_composition() {
    let names = feature_names();
    assert_eq!(names.len(), 304);
    let count = |prefix: &str| names.iter().filter(|n| n.starts_with(prefix)).count();
    assert_eq!(count("wind_speed_lag"), 49);
    assert_eq!(count("wind_dir_cos_lag") + count("wind_dir_sin_lag"), 98);
    assert_eq!(count("solar_irradiance_lag"), 49);
    assert_eq!(count("temperature_lag"), 49);
    assert_eq!(count("pluviometry_lag"), 49);
    assert_eq!(count("day_of_year") + count("hour_of_day"), 4);
    assert_eq!(count("official_"), 6);

    let (series, archive) = small_world();
    let t = series.time_at(100);
    let (v, issue) = build_feature_vector(&series, &archive, t, 3).unwrap();
    assert_eq!(v.len(), 304);
    assert!(issue <= t);
    let x = v.as_slice();
    // lag 0 sits last in each block
    assert_eq!(x[SPEED_LAGS + 48], series.get(t).unwrap().wind_speed);
    assert_eq!(x[SPEED_LAGS], series.get(t - Duration::hours(48)).unwrap().wind_speed);
    let official = archive.lookup(t, t + Duration::hours(3)).unwrap().1;
    assert_eq!(x[OFFICIAL_SPEED], official.wind_speed);
    assert_eq!(x[OFFICIAL_TEMPERATURE], official.temperature);
    let dir = series.get(t).unwrap().wind_direction.to_radians();
    assert!((x[DIR_COS_LAGS + 48] - dir.cos()).abs() < 1e-12);
    assert!((x[DIR_SIN_LAGS + 48] - dir.sin()).abs() < 1e-12);
}

#[test]
fn hourly_csv_round_trip() {
    let (series, _) = small_world();
    let mut slots = series.slots().to_vec();
    slots[40] = None;
    let gappy = HourlySeries::new(series.start(), slots).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("hourly.csv");
    write_hourly_csv(std::fs::File::create(&path).unwrap(), &gappy).unwrap();
    let back = read_hourly_csv(&path).unwrap();
    assert_eq!(back.len(), gappy.len());
    assert_eq!(back.missing_hours(), 1);
    assert_eq!(back.slots(), gappy.slots());
}

#[test]
fn sensor_csv_round_trip() {
    let mut records: Vec<RawSensorRecord> = (0..90).map(|m| record(m, 3.0 + m as f64 * 0.01, 123.4)).collect();
    records[7].temperature = None;
    let mut buf = Vec::new();
    write_sensor_csv(&mut buf, &records).unwrap();
    let back = parse_sensor_csv(buf.as_slice(), ParseOptions::default()).unwrap();
    assert_eq!(back, records);
}

proptest! {
    #[test]
    fn vector_average_is_rotation_equivariant(
        samples in prop::collection::vec((0.1f64..20.0, 0.0f64..360.0), 1..30),
        delta in 0.0f64..360.0,
    ) {
        let (s, d) = vector_average(&samples).unwrap();
        prop_assume!(s > 1e-3);
        let rotated: Vec<(f64, f64)> = samples.iter().map(|&(v, a)| (v, (a + delta) % 360.0)).collect();
        let (s2, d2) = vector_average(&rotated).unwrap();
        prop_assert!((s - s2).abs() < 1e-9);
        let diff = ((d + delta) - d2).rem_euclid(360.0);
        prop_assert!(diff.min(360.0 - diff) < 1e-6);
    }

    #[test]
    fn vector_speed_never_exceeds_the_mean_speed(
        samples in prop::collection::vec((0.0f64..20.0, 0.0f64..360.0), 1..30),
    ) {
        let (s, d) = vector_average(&samples).unwrap();
        let mean = samples.iter().map(|p| p.0).sum::<f64>() / samples.len() as f64;
        prop_assert!(s <= mean + 1e-9);
        prop_assert!((0.0..360.0).contains(&d));
    }
}
