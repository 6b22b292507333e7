use windops::ingest::ForecastArchive;
use windops::synthgen::*;

fn config(hours: usize, seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        hours,
        seed,
        ..GeneratorConfig::default()
    }
}

#[test]
fn same_seed_same_world() {
    let a = generate_weather(&config(600, 5)).unwrap();
    let b = generate_weather(&config(600, 5)).unwrap();
    assert_eq!(a, b);
    let fa = generate_official_forecast(&a.truth, &config(600, 5)).unwrap();
    let fb = generate_official_forecast(&b.truth, &config(600, 5)).unwrap();
    assert_eq!(fa, fb);
    let c = generate_weather(&config(600, 6)).unwrap();
    assert_ne!(a.truth, c.truth);
}

#[test]
fn degenerate_world_is_constant() {
    let g = GeneratorConfig {
        hours: 300,
        speed_mean: 3.0,
        speed_noise: 0.0,
        diurnal_amplitude: 0.0,
        minute_speed_noise: 0.0,
        gap_probability: 0.0,
        regime_entry_probability: Some(0.0),
        ..GeneratorConfig::default()
    };
    let w = generate_weather(&g).unwrap();
    assert!(w.truth.iter().all(|h| h.wind_speed == 3.0));
    assert_eq!(w.minutes.len(), 300 * 60);
    assert!(w.minutes.iter().all(|m| m.wind_speed == Some(3.0)));
    assert!(w.southerly.iter().all(|s| !s));
    assert_eq!(w.dangerous_rate, 0.0);
}

#[test]
fn long_world_hits_the_target_rate() {
    let latent = generate_hourly(&config(40_000, 1)).unwrap();
    let rate = dangerous_fraction(&latent.truth);
    assert!((0.01..=0.03).contains(&rate), "rate {rate}");
    assert_eq!(latent.regime_dwell_hours, GeneratorConfig::default().regime_dwell_hours);
}

#[test]
fn short_worlds_stay_near_the_target() {
    for (hours, seed) in [(300, 1), (500, 2), (800, 3)] {
        let latent = generate_hourly(&config(hours, seed)).unwrap();
        let rate = dangerous_fraction(&latent.truth);
        assert!((0.01..=0.03).contains(&rate), "{hours} h: rate {rate}");
    }
}

#[test]
fn noiseless_forecasts_copy_the_truth() {
    let g = GeneratorConfig {
        forecast: ForecastNoise::none(),
        ..config(400, 2)
    };
    let w = generate_weather(&g).unwrap();
    let issuances = generate_official_forecast(&w.truth, &g).unwrap();
    assert!(!issuances.is_empty());
    for f in &issuances {
        let i = w.truth.iter().position(|h| h.timestamp == f.issue_time).unwrap();
        for (k, fh) in f.hours.iter().enumerate() {
            let v = &w.truth[i + k + 1];
            assert_eq!(fh.valid_time, v.timestamp);
            assert_eq!(fh.wind_speed, v.wind_speed);
            assert_eq!(fh.wind_direction, v.wind_direction);
            assert_eq!(fh.temperature, v.temperature);
            assert_eq!(fh.solar_irradiance, v.solar_irradiance);
            assert_eq!(fh.pluviometry, v.pluviometry);
        }
    }
}

#[test]
fn forecast_error_grows_with_horizon() {
    let g = config(6000, 4);
    let w = generate_weather(&g).unwrap();
    let issuances = generate_official_forecast(&w.truth, &g).unwrap();
    let mut abs = vec![(0.0, 0usize); 48];
    for f in &issuances {
        let i = w.truth.iter().position(|h| h.timestamp == f.issue_time).unwrap();
        for (k, fh) in f.hours.iter().enumerate() {
            abs[k].0 += (fh.wind_speed - w.truth[i + k + 1].wind_speed).abs();
            abs[k].1 += 1;
        }
    }
    let block = |r: std::ops::Range<usize>| {
        let (s, n) = abs[r].iter().fold((0.0, 0), |(s, n), &(a, c)| (s + a, n + c));
        s / n as f64
    };
    let blocks: Vec<f64> = (0..4).map(|b| block(b * 12..(b + 1) * 12)).collect();
    assert!(blocks.windows(2).all(|w| w[0] < w[1]), "{blocks:?}");
    let mae_at = |k: usize| abs[k].0 / abs[k].1 as f64;
    assert!(mae_at(47) > mae_at(0));
}

#[test]
fn persistence_beats_the_official_forecast_one_hour_ahead() {
    let g = config(4000, 8);
    let w = generate_weather(&g).unwrap();
    let archive = ForecastArchive::new(generate_official_forecast(&w.truth, &g).unwrap());
    let (mut pers, mut official, mut n) = (0.0, 0.0, 0usize);
    for i in 0..w.truth.len() - 1 {
        let (now, next) = (&w.truth[i], &w.truth[i + 1]);
        let Some((_, fh)) = archive.lookup(now.timestamp, next.timestamp) else {
            continue;
        };
        pers += (now.wind_speed - next.wind_speed).abs();
        official += (fh.wind_speed - next.wind_speed).abs();
        n += 1;
    }
    assert!(n > 3000);
    assert!(pers < official, "persistence {} vs official {}", pers / n as f64, official / n as f64);
}
