//! One PASS/FAIL line per acceptance criterion. Lines are written straight to
//! the stdout handle so they show up even when the harness captures output.

use std::io::Write;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use windops::evalsim::*;
use windops::features::{feature_names, build_feature_vector};
use windops::ingest::{ingest_minutes, vector_average, ForecastArchive, HourlySeries};
use windops::pipeline::*;
use windops::policy::*;
use windops::regress::{elastic_net, Matrix};
use windops::scenario::{classify_scenario, Scenario};
use windops::synthgen::*;

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
}

fn run(name: &'static str, budget: Duration, check: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (ok, detail) = check();
    let elapsed = start.elapsed();
    let pass = ok && elapsed <= budget;
    let line = format!(
        "{} {name}: {detail} [{:.2?} of {:.0?}]\n",
        if pass { "PASS" } else { "FAIL" },
        elapsed,
        budget
    );
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    Outcome {
        name,
        pass,
        detail,
        elapsed,
    }
}

const SECOND: Duration = Duration::from_secs(1);

fn scenario_grid() -> (bool, String) {
    let grid = [
        ["S3", "S4", "S4"],
        ["S2", "S3b", "S2b"],
        ["S1", "S3b", "S2b"],
        ["S1", "S3b", "S2"],
        ["S1", "S1", "S1"],
    ];
    let speeds = [0.25, 0.75, 1.5, 3.0, 6.0];
    let dirs = [50.0, 180.0, 250.0];
    let mut cell_errors = 0;
    for (r, &v) in speeds.iter().enumerate() {
        for (c, &d) in dirs.iter().enumerate() {
            if classify_scenario(v, d).unwrap().as_str() != grid[r][c] {
                cell_errors += 1;
            }
        }
    }
    // independent lookup: 16-point compass sectors and the table's speed rows
    let column = |d: f64| match ((d + 11.25) / 22.5).floor() as usize % 16 {
        14 | 15 | 0..=4 => 0,
        7..=9 => 1,
        _ => 2,
    };
    let row = |v: f64| {
        if v < 0.5 {
            0
        } else if v < 1.0 {
            1
        } else if v <= 2.0 {
            2
        } else if v <= 4.0 {
            3
        } else {
            4
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = 0;
    for _ in 0..10_000 {
        let v = rng.random_range(0.0..6.0);
        let d = rng.random_range(0.0..360.0);
        if classify_scenario(v, d).unwrap().as_str() != grid[row(v)][column(d)] {
            mismatches += 1;
        }
    }
    (
        cell_errors == 0 && mismatches == 0,
        format!("{cell_errors} of 15 cells wrong, {mismatches} of 10000 random points mismatched"),
    )
}

fn trade_off_rows() -> (bool, String) {
    let rows = [
        ((20, 113), (93, -3)),
        ((32, 102), (89, 7)),
        ((106, 74), (63, 33)),
        ((174, 58), (40, 47)),
        ((282, 38), (2, 65)),
        ((51, 133), (82, -21)),
    ];
    let mut worst = 0;
    let mut got_all = Vec::new();
    for (pair, (cs, pr)) in rows {
        let got = trade_off_metrics(pair, (288, 110)).unwrap().percent();
        worst = worst.max((got.0 - cs).abs()).max((got.1 - pr).abs());
        got_all.push(got);
    }
    (worst <= 1, format!("{got_all:?}, max deviation {worst} point(s)"))
}

fn reward_rows() -> (bool, String) {
    let mut ok = true;
    let mut fn_costs = Vec::new();
    for h in [2000.0, 4000.0, 8000.0, 13000.0, 18000.0] {
        let m = build_reward_matrix(&[Scenario::S1, Scenario::S4], h).unwrap();
        // favorable/maintain 0, reduce 2000 either way, missed danger 2000 + H
        ok &= m.reward(0, Prescription::Maintain) == 0.0;
        ok &= m.reward(0, Prescription::Reduce) == -2000.0;
        ok &= m.reward(1, Prescription::Reduce) == -2000.0;
        ok &= m.reward(1, Prescription::Maintain) == -(2000.0 + h);
        fn_costs.push(-m.reward(1, Prescription::Maintain));
    }
    ok &= fn_costs.first() == Some(&4000.0) && fn_costs.last() == Some(&20000.0);
    ok &= build_reward_matrix(&[Scenario::S4], 1999.0).is_err() && build_reward_matrix(&[Scenario::S4], 18001.0).is_err();
    (ok, format!("false-negative totals {fn_costs:?}"))
}

fn feature_schema() -> (bool, String) {
    let names = feature_names();
    let count = |p: &str| names.iter().filter(|n| n.starts_with(p)).count();
    let blocks = [
        count("wind_speed_lag"),
        count("wind_dir_cos_lag") + count("wind_dir_sin_lag"),
        count("solar_irradiance_lag"),
        count("temperature_lag"),
        count("pluviometry_lag"),
        count("day_of_year") + count("hour_of_day"),
        count("official_"),
    ];
    let g = GeneratorConfig {
        hours: 200,
        seed: 2,
        ..GeneratorConfig::default()
    };
    let w = generate_weather(&g).unwrap();
    let archive = ForecastArchive::new(generate_official_forecast(&w.truth, &g).unwrap());
    let series = HourlySeries::from_contiguous(w.truth).unwrap();
    let (v, _) = build_feature_vector(&series, &archive, series.time_at(120), 6).unwrap();
    let ok = blocks == [49, 98, 49, 49, 49, 4, 6] && v.len() == 304 && names.len() == 304;
    (ok, format!("{} features, blocks {blocks:?}", v.len()))
}

fn shortfall() -> (bool, String) {
    let e: Vec<f64> = (1..=20).map(f64::from).collect();
    let es = expected_shortfall(&e, ES_LEVEL).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut violations = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..200);
        let set: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        if expected_shortfall(&set, ES_LEVEL).unwrap() < mae(&set).unwrap() {
            violations += 1;
        }
    }
    (es == 19.0 && violations == 0, format!("ES85(1..20) = {es}, {violations} of 1000 sets below MAE"))
}

fn opposite_winds() -> (bool, String) {
    let (s, _) = vector_average(&[(5.0, 180.0), (5.0, 0.0)]).unwrap();
    (s.abs() <= 1e-9, format!("speed {s:e}"))
}

fn random_problem(rng: &mut ChaCha8Rng, n: usize, p: usize) -> (Matrix, Vec<f64>) {
    let data: Vec<f64> = (0..n * p).map(|_| rng.random_range(-2.0..2.0)).collect();
    let x = Matrix::new(n, p, data).unwrap();
    let beta: Vec<f64> = (0..p).map(|_| rng.random_range(-3.0..3.0)).collect();
    let y = (0..n)
        .map(|i| 1.0 + x.row(i).iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + rng.random_range(-0.5..0.5))
        .collect();
    (x, y)
}

fn elastic_net_oracles() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (n, p) = (40, 5);
    let (x, y) = random_problem(&mut rng, n, p);

    // ridge in standardized coordinates: (ZᵀZ + nαI)β = Zᵀ(y − ȳ)
    let alpha = 0.5;
    let m = elastic_net::train(&x, &y, alpha, 0.0).unwrap();
    let mut z = DMatrix::zeros(n, p);
    for j in 0..p {
        let mean = (0..n).map(|i| x.get(i, j)).sum::<f64>() / n as f64;
        let sd = ((0..n).map(|i| (x.get(i, j) - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        for i in 0..n {
            z[(i, j)] = (x.get(i, j) - mean) / sd;
        }
    }
    let ym = y.iter().sum::<f64>() / n as f64;
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - ym));
    let ridge = (z.transpose() * &z + DMatrix::identity(p, p) * (n as f64 * alpha))
        .lu()
        .solve(&(z.transpose() * yc))
        .unwrap();
    let ridge_err = (0..p).map(|j| (m.standardized[j] - ridge[j]).abs()).fold(0.0, f64::max);

    // ordinary least squares with an intercept column
    let m = elastic_net::train(&x, &y, 0.0, 0.5).unwrap();
    let mut a = DMatrix::zeros(n, p + 1);
    for i in 0..n {
        a[(i, 0)] = 1.0;
        for j in 0..p {
            a[(i, j + 1)] = x.get(i, j);
        }
    }
    let ols = (a.transpose() * &a)
        .lu()
        .solve(&(a.transpose() * DVector::from_column_slice(&y)))
        .unwrap();
    let ols_err = (0..p)
        .map(|j| (m.coefficients[j] - ols[j + 1]).abs())
        .fold((m.intercept - ols[0]).abs(), f64::max);

    let mut kkt_failures = 0;
    for _ in 0..20 {
        let n = rng.random_range(20..60);
        let p = rng.random_range(2..8);
        let (x, y) = random_problem(&mut rng, n, p);
        let alpha = rng.random_range(0.01..2.0);
        let l1 = rng.random_range(0.0..=1.0);
        let d = elastic_net::Design::new(&x).unwrap();
        let m = elastic_net::fit(&d, &y, alpha, l1).unwrap();
        let ym = y.iter().sum::<f64>() / n as f64;
        let k = d.kept().len();
        let r: Vec<f64> = (0..n)
            .map(|i| y[i] - ym - (0..k).map(|c| d.z(i, c) * m.standardized[c]).sum::<f64>())
            .collect();
        let ok = (0..k).all(|c| {
            let g = (0..n).map(|i| d.z(i, c) * r[i]).sum::<f64>() / n as f64 - alpha * (1.0 - l1) * m.standardized[c];
            if m.standardized[c] == 0.0 {
                g.abs() <= alpha * l1 + 1e-6
            } else {
                (g - alpha * l1 * m.standardized[c].signum()).abs() <= 1e-6
            }
        });
        kkt_failures += !ok as usize;
    }
    (
        ridge_err < 1e-6 && ols_err < 1e-6 && kkt_failures == 0,
        format!("ridge max error {ridge_err:.1e}, OLS max error {ols_err:.1e}, {kkt_failures} of 20 KKT failures"),
    )
}

/// Shared 20,000-hour world, trained once for the dominance and frontier
/// criteria.
struct BigRun {
    series: HourlySeries,
    archive: ForecastArchive,
    config: PipelineConfig,
    models: TrainedModels,
}

fn dominance(big: &mut Option<BigRun>) -> (bool, String) {
    let g = GeneratorConfig {
        hours: 20_000,
        seed: 11,
        ..GeneratorConfig::default()
    };
    let world = generate_weather(&g).unwrap();
    let archive = ForecastArchive::new(generate_official_forecast(&world.truth, &g).unwrap());
    let config = PipelineConfig {
        lead_times: vec![1, 2, 3],
        ..PipelineConfig::default()
    };
    let series = ingest_minutes(&world.minutes, config.ingest_options()).unwrap();
    drop(world);
    let models = train_models(&series, &archive, &config).unwrap();
    let mut worst_ratio: f64 = 0.0;
    let mut worst_gain = f64::INFINITY;
    for lead in config.leads() {
        let splits = lead_splits(&series, &archive, lead, &config).unwrap();
        let preds = models.member_predictions(&splits.validation).unwrap();
        let check = stacking_check(models.ensemble.lead(lead).unwrap(), &preds).unwrap();
        let baseline = check.members.iter().position(|m| m.family().is_none()).unwrap();
        for t in 0..3 {
            let best = check.member_mae.iter().map(|m| m[t]).fold(f64::INFINITY, f64::min);
            worst_ratio = worst_ratio.max(check.ensemble_mae[t] / best);
            let base = check.member_mae[baseline][t];
            for (i, m) in check.member_mae.iter().enumerate() {
                if i != baseline {
                    worst_gain = worst_gain.min(1.0 - m[t] / base);
                }
            }
        }
    }
    *big = Some(BigRun {
        series,
        archive,
        config,
        models,
    });
    (
        worst_ratio <= 1.02 && worst_gain >= 0.20,
        format!(
            "worst ensemble/best-member MAE ratio {worst_ratio:.4} (≤ 1.02), smallest family gain over official {:.1}% (≥ 20%)",
            100.0 * worst_gain
        ),
    )
}

fn frontier(big: &Option<BigRun>) -> (bool, String) {
    let Some(b) = big else {
        return (false, "the 20,000-hour run did not complete".into());
    };
    let policies = train_policies(&b.series, &b.archive, &b.models, &b.config, &HEALTH_COST_GRID).unwrap();
    let (report, _) = backtest(&b.series, &b.archive, &b.models, &policies, &b.config, 8000.0).unwrap();
    let fr = &report.policy.frontier;
    let fns: Vec<usize> = fr.iter().map(|p| p.confusion.false_negatives).collect();
    let fps: Vec<usize> = fr.iter().map(|p| p.confusion.false_positives).collect();
    let ok = fns.windows(2).all(|w| w[1] <= w[0]) && fps.windows(2).all(|w| w[1] >= w[0]) && fr.len() == 5;
    (ok, format!("H {:?}: FN {fns:?}, FP {fps:?}", policies.health_costs()))
}

fn depth_one() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut wrong = 0;
    for case in 0..50 {
        let n = rng.random_range(10..80);
        let cut: f64 = rng.random_range(0.1..0.9);
        let below = rng.random_bool(0.5);
        let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let actual: Vec<Scenario> = xs
            .iter()
            .map(|&v| if (v < cut) == below { Scenario::S3b } else { Scenario::S2 })
            .collect();
        let r = build_reward_matrix(&actual, HEALTH_COST_GRID[case % 5]).unwrap();
        let x = Matrix::new(n, 1, xs.clone()).unwrap();
        let tree = train_policy_tree(&x, &r, 1, 1).unwrap();
        let got = tree.total_reward(&x, &r).unwrap();
        // every threshold between sorted neighbours, plus the single leaf
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        let leaf = |rows: &mut dyn Iterator<Item = usize>| {
            let (m, d) = rows.fold((0.0, 0.0), |(m, d), i| (m + r.rewards[i][0], d + r.rewards[i][1]));
            f64::max(m, d)
        };
        let mut best = leaf(&mut (0..n));
        for w in sorted.windows(2) {
            let c = w[0] + (w[1] - w[0]) / 2.0;
            let total = leaf(&mut (0..n).filter(|&i| xs[i] < c)) + leaf(&mut (0..n).filter(|&i| xs[i] >= c));
            best = best.max(total);
        }
        wrong += (got != best) as usize;
    }
    (wrong == 0, format!("{wrong} of 50 fixtures off the enumerated optimum"))
}

fn state_machine_audit() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let pick = |rng: &mut ChaCha8Rng| Scenario::ALL[rng.random_range(0..6)];
    let mut audit_failures = 0;
    let mut oracle_misses = 0;
    for _ in 0..500 {
        let n = rng.random_range(1..300);
        let actual: Vec<Scenario> = (0..n).map(|_| pick(&mut rng)).collect();
        let noisy: Vec<[Scenario; LOOKAHEAD]> = (0..n).map(|_| [pick(&mut rng), pick(&mut rng), pick(&mut rng)]).collect();
        let h = rng.random_range(2000.0..18000.0);
        let (r, ledger) = simulate_operations(&noisy, &actual, h).unwrap();
        let reduced = ledger.iter().filter(|e| e.mode == Mode::Reduced).count();
        let missed = ledger.iter().filter(|e| e.mode == Mode::Normal && e.actual.is_dangerous()).count();
        if r.total_cost != 2000.0 * reduced as f64 + (2000.0 + h) * missed as f64 {
            audit_failures += 1;
        }
        let mut calm_start = actual.clone();
        calm_start[0] = Scenario::S1;
        let oracle: Vec<[Scenario; LOOKAHEAD]> = (0..n)
            .map(|t| std::array::from_fn(|k| calm_start.get(t + k + 1).copied().unwrap_or(Scenario::S1)))
            .collect();
        let (r, _) = simulate_operations(&oracle, &calm_start, h).unwrap();
        oracle_misses += r.false_negatives;
    }
    (
        audit_failures == 0 && oracle_misses == 0,
        format!("{audit_failures} of 500 runs failed the cost identity, {oracle_misses} oracle false negatives"),
    )
}

fn pipeline_once(root: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let c = PipelineConfig {
        data_dir: root.join("data"),
        artifacts_dir: root.join("artifacts"),
        lead_times: vec![1, 2, 3],
        grid: GridChoice::Reduced,
        ..PipelineConfig::default()
    };
    std::fs::create_dir_all(&c.data_dir).unwrap();
    std::fs::create_dir_all(&c.artifacts_dir).unwrap();
    let g = GeneratorConfig {
        hours: 700,
        seed: 4,
        ..GeneratorConfig::default()
    };
    synth(&g, &c.data_dir).unwrap();
    ingest_file(c.data_dir.join(SENSORS_FILE), c.data_dir.join(HOURLY_FILE), &c).unwrap();
    let (series, archive) = load_inputs(&c).unwrap();
    let models = train_models(&series, &archive, &c).unwrap();
    models.save(&c.artifacts_dir).unwrap();
    let policies = train_policies(&series, &archive, &models, &c, &c.policy_health_costs()).unwrap();
    policies.save(c.artifacts_dir.join(POLICIES_FILE)).unwrap();
    let (report, ledger) = backtest(&series, &archive, &models, &policies, &c, c.health_cost).unwrap();
    write_backtest(&report, &ledger, &c.artifacts_dir).unwrap();
    let mut files = Vec::new();
    for dir in [&c.data_dir, &c.artifacts_dir] {
        let mut entries: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            files.push((p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()));
        }
    }
    files
}

fn determinism() -> (bool, String) {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (fa, fb) = (pipeline_once(a.path()), pipeline_once(b.path()));
    let differing: Vec<&str> = fa
        .iter()
        .zip(&fb)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    (
        fa.len() == fb.len() && differing.is_empty() && fa.len() >= 10,
        format!("{} files compared, differing: {differing:?}", fa.len()),
    )
}

#[test]
fn acceptance() {
    let mut big = None;
    let outcomes = vec![
        run("scenario grid exactness", SECOND, scenario_grid),
        run("trade-off metric rows", SECOND, trade_off_rows),
        run("reward matrix exactness", SECOND, reward_rows),
        run("feature schema", SECOND, feature_schema),
        run("expected shortfall definition", SECOND, shortfall),
        run("vector average example", SECOND, opposite_winds),
        run("elastic net correctness", 10 * SECOND, elastic_net_oracles),
        run("ensemble dominance", 15 * 60 * SECOND, || dominance(&mut big)),
        run("policy frontier monotonicity", 5 * 60 * SECOND, || frontier(&big)),
        run("policy optimality at depth one", 10 * SECOND, depth_one),
        run("state machine audit", 10 * SECOND, state_machine_audit),
        run("end-to-end determinism", 10 * 60 * SECOND, determinism),
    ];
    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.pass)
        .map(|o| format!("{} ({}, {:.2?})", o.name, o.detail, o.elapsed))
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
