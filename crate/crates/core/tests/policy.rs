use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use windops::ensemble::{member_feature_names, Member};
use windops::policy::*;
use windops::regress::Matrix;
use windops::scenario::Scenario;

fn scenarios(dangerous: &[bool]) -> Vec<Scenario> {
    dangerous
        .iter()
        .map(|&d| if d { Scenario::S4 } else { Scenario::S1 })
        .collect()
}

/// Best total reward over every stump (and the single leaf) by brute force.
fn enumerate_depth1(x: &Matrix, rewards: &RewardMatrix, min_leaf: usize) -> f64 {
    let n = x.n_rows();
    let leaf = |rows: &[usize]| -> f64 {
        let m: f64 = rows.iter().map(|&i| rewards.rewards[i][0]).sum();
        let r: f64 = rows.iter().map(|&i| rewards.rewards[i][1]).sum();
        m.max(r)
    };
    let all: Vec<usize> = (0..n).collect();
    let mut best = leaf(&all);
    for f in 0..x.n_cols() {
        let mut values: Vec<f64> = (0..n).map(|i| x.get(i, f)).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let cut = w[0] + (w[1] - w[0]) / 2.0;
            let (l, r): (Vec<usize>, Vec<usize>) = all.iter().partition(|&&i| x.get(i, f) < cut);
            if l.len() >= min_leaf && r.len() >= min_leaf {
                best = best.max(leaf(&l) + leaf(&r));
            }
        }
    }
    best
}

#[test]
fn reward_table_rows() {
    for h in HEALTH_COST_GRID {
        let m = build_reward_matrix(&[Scenario::S1, Scenario::S2, Scenario::S2b, Scenario::S3, Scenario::S3b, Scenario::S4], h)
            .unwrap();
        for row in &m.rewards[..4] {
            assert_eq!(*row, [0.0, -2000.0]);
        }
        for row in &m.rewards[4..] {
            assert_eq!(*row, [-(2000.0 + h), -2000.0]);
        }
    }
    let lo = build_reward_matrix(&[Scenario::S4], MIN_HEALTH_COST).unwrap();
    let hi = build_reward_matrix(&[Scenario::S4], MAX_HEALTH_COST).unwrap();
    assert_eq!(lo.rewards[0][0], -4000.0);
    assert_eq!(hi.rewards[0][0], -20000.0);
}

#[test]
fn depth_one_is_optimal_on_separable_fixtures() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..50 {
        let n = rng.random_range(10..80);
        let cut: f64 = rng.random_range(0.1..0.9);
        let below_dangerous = rng.random_bool(0.5);
        let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let dangerous: Vec<bool> = xs.iter().map(|&v| (v < cut) == below_dangerous).collect();
        let h = HEALTH_COST_GRID[case % HEALTH_COST_GRID.len()];
        let r = build_reward_matrix(&scenarios(&dangerous), h).unwrap();
        let x = Matrix::new(n, 1, xs).unwrap();
        let tree = train_policy_tree(&x, &r, 1, 1).unwrap();
        let got = tree.total_reward(&x, &r).unwrap();
        assert_eq!(got, enumerate_depth1(&x, &r, 1), "case {case}");
        let d = dangerous.iter().filter(|&&d| d).count() as f64;
        assert_eq!(got, -2000.0 * d, "case {case}: separable data is solved exactly");
    }
}

#[test]
fn depth_one_is_optimal_on_noisy_multifeature_fixtures() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for case in 0..50 {
        let n = rng.random_range(15..60);
        let p = rng.random_range(1..4);
        let data: Vec<f64> = (0..n * p).map(|_| (rng.random_range(0..12) as f64) / 4.0).collect();
        let dangerous: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
        let min_leaf = rng.random_range(1..5);
        // whole-thousand costs keep every reward sum exact
        let h = rng.random_range(2..=18) as f64 * 1000.0;
        let r = build_reward_matrix(&scenarios(&dangerous), h).unwrap();
        let x = Matrix::new(n, p, data).unwrap();
        let tree = train_policy_tree(&x, &r, 1, min_leaf).unwrap();
        assert_eq!(
            tree.total_reward(&x, &r).unwrap(),
            enumerate_depth1(&x, &r, min_leaf),
            "case {case}"
        );
    }
}

#[test]
fn cheap_health_cost_keeps_a_maintain_leaf() {
    // every third hour dangerous: no window of ≥ 20 rows reaches the 50%
    // dangerous share at which reducing pays off when FN costs 4000
    let n = 90;
    let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let dangerous: Vec<bool> = (0..n).map(|i| i % 3 == 0).collect();
    let r = build_reward_matrix(&scenarios(&dangerous), 2000.0).unwrap();
    for a in 0..n {
        for b in a + 20..=n {
            let maintain: f64 = (a..b).map(|i| r.rewards[i][0]).sum();
            let reduce: f64 = (a..b).map(|i| r.rewards[i][1]).sum();
            assert!(maintain >= reduce);
        }
    }
    let tree = train_policy_tree(&Matrix::new(n, 1, xs).unwrap(), &r, 3, 20).unwrap();
    assert_eq!(tree.n_leaves(), 1);
    assert!(matches!(
        tree.nodes[0],
        PolicyNode::Leaf {
            action: Prescription::Maintain,
            ..
        }
    ));
}

fn fixture_tree() -> PolicyTree {
    PolicyTree {
        health_cost: 8000.0,
        n_features: 18,
        max_depth: 3,
        min_leaf: 3,
        nodes: vec![
            PolicyNode::Split {
                feature_index: 2,
                threshold: 1.5,
                left: 1,
                right: 2,
            },
            PolicyNode::Split {
                feature_index: 0,
                threshold: 0.25,
                left: 3,
                right: 4,
            },
            PolicyNode::Leaf {
                action: Prescription::Maintain,
                n_samples: 40,
            },
            PolicyNode::Leaf {
                action: Prescription::Reduce,
                n_samples: 5,
            },
            PolicyNode::Split {
                feature_index: 1,
                threshold: 7.0,
                left: 5,
                right: 6,
            },
            PolicyNode::Leaf {
                action: Prescription::Maintain,
                n_samples: 12,
            },
            PolicyNode::Leaf {
                action: Prescription::Reduce,
                n_samples: 3,
            },
        ],
    }
}

#[test]
fn golden_rendering() {
    let names = member_feature_names(&Member::ALL);
    let golden = include_str!("golden/policy_tree.txt");
    assert_eq!(render_tree_text(&fixture_tree(), &names), golden);
}

#[test]
fn hand_traced_paths() {
    let tree = fixture_tree();
    assert_eq!(tree.depth(), 3);
    assert_eq!(tree.n_leaves(), 4);
    let names = member_feature_names(&Member::ALL);
    let mut x = vec![0.0; 18];
    // f2 = 1.0 < 1.5 → left; f0 = 0.3 ≥ 0.25 → right; f1 = 8 ≥ 7 → right
    x[2] = 1.0;
    x[0] = 0.3;
    x[1] = 8.0;
    let (action, path) = tree.path(&x, &names).unwrap();
    assert_eq!(action, Prescription::Reduce);
    let trail: Vec<(usize, bool)> = path.iter().map(|s| (s.feature_index, s.went_left)).collect();
    assert_eq!(trail, vec![(2, true), (0, false), (1, false)]);
    assert_eq!(path[0].feature, "elastic_net_dir_sin");
    x[1] = 6.9;
    assert_eq!(prescribe(&tree, &x).unwrap(), Prescription::Maintain);
    x[0] = 0.1;
    assert_eq!(prescribe(&tree, &x).unwrap(), Prescription::Reduce);
    x[2] = 1.5;
    assert_eq!(prescribe(&tree, &x).unwrap(), Prescription::Maintain);
    assert!(prescribe(&tree, &x[..17]).is_err());
}

#[test]
fn json_schema_uses_named_fields() {
    let v = serde_json::to_value(fixture_tree()).unwrap();
    let root = &v["nodes"][0];
    for key in ["feature_index", "threshold", "left", "right"] {
        assert!(root.get(key).is_some(), "{key}");
    }
    assert_eq!(v["nodes"][2]["action"], "maintain");
    assert_eq!(v["nodes"][2]["n_samples"], 40);
    let back: PolicyTree = serde_json::from_value(v).unwrap();
    assert_eq!(back, fixture_tree());
}

fn random_problem(seed: u64, n: usize, p: usize) -> (Matrix, RewardMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f64> = (0..n * p).map(|_| rng.random_range(0..20) as f64 / 8.0).collect();
    let x = Matrix::new(n, p, data).unwrap();
    let dangerous: Vec<bool> = (0..n)
        .map(|i| {
            let s = x.get(i, 0) + 0.5 * x.get(i, p - 1);
            rng.random_bool(if s < 1.0 { 0.6 } else { 0.05 })
        })
        .collect();
    let r = build_reward_matrix(&scenarios(&dangerous), rng.random_range(2000.0..18000.0)).unwrap();
    (x, r)
}

#[test]
fn scaling_a_feature_keeps_prescriptions() {
    for seed in 0..10 {
        let (x, r) = random_problem(seed, 120, 3);
        for c in [4.0, 0.5] {
            let scaled = Matrix::new(
                x.n_rows(),
                3,
                x.rows().flat_map(|row| [row[0] * c, row[1], row[2]]).collect(),
            )
            .unwrap();
            let a = train_policy_tree(&x, &r, 3, 5).unwrap();
            let b = train_policy_tree(&scaled, &r, 3, 5).unwrap();
            for i in 0..x.n_rows() {
                assert_eq!(
                    prescribe(&a, x.row(i)).unwrap(),
                    prescribe(&b, scaled.row(i)).unwrap(),
                    "seed {seed} row {i}"
                );
            }
        }
    }
}

#[test]
fn single_point_grid_is_that_configuration() {
    let (x, r) = random_problem(42, 100, 2);
    let tuned = tune_policy_tree(&x, &r, &[2], &[7], 5).unwrap();
    assert_eq!(tuned.scores.len(), 1);
    assert_eq!(tuned.tree, train_policy_tree(&x, &r, 2, 7).unwrap());
}

#[test]
fn tuning_picks_the_best_heldout_configuration() {
    let (x, r) = random_problem(43, 150, 3);
    let depths = [1, 2, 3];
    let leaves = [1, 10];
    let tuned = tune_policy_tree(&x, &r, &depths, &leaves, 5).unwrap();
    let n = x.n_rows();
    let mut oracle = Vec::new();
    for &d in &depths {
        for &m in &leaves {
            let mut total = 0.0;
            for j in 0..5 {
                let (a, b) = (j * n / 5, (j + 1) * n / 5);
                let keep: Vec<usize> = (0..n).filter(|i| *i < a || *i >= b).collect();
                let xt = x.select_rows(keep.iter().copied());
                let rt = RewardMatrix {
                    health_cost: r.health_cost,
                    rewards: keep.iter().map(|&i| r.rewards[i]).collect(),
                };
                let t = train_policy_tree(&xt, &rt, d, m).unwrap();
                total += (a..b).map(|i| r.reward(i, prescribe(&t, x.row(i)).unwrap())).sum::<f64>();
            }
            oracle.push(((d, m), total / 5.0));
        }
    }
    for (s, (cfg, mean)) in tuned.scores.iter().zip(&oracle) {
        assert_eq!((s.max_depth, s.min_leaf), *cfg);
        assert!((s.mean_heldout_reward - mean).abs() < 1e-9);
    }
    let best = oracle
        .iter()
        .fold(None::<&((usize, usize), f64)>, |acc, o| match acc {
            Some(a) if a.1 >= o.1 => Some(a),
            _ => Some(o),
        })
        .unwrap();
    assert_eq!(tuned.tree, train_policy_tree(&x, &r, best.0 .0, best.0 .1).unwrap());
}

#[test]
fn more_folds_than_rows_is_an_error() {
    let (x, r) = random_problem(1, 4, 1);
    assert!(tune_policy_tree(&x, &r, &[1], &[1], 5).is_err());
    assert!(tune_policy_tree(&x, &r, &[], &[1], 2).is_err());
}

#[test]
fn empty_and_mismatched_inputs_are_rejected() {
    let r = build_reward_matrix(&[Scenario::S1], 4000.0).unwrap();
    assert!(train_policy_tree(&Matrix::new(0, 1, vec![]).unwrap(), &r, 1, 1).is_err());
    assert!(train_policy_tree(&Matrix::new(2, 1, vec![0.0, 1.0]).unwrap(), &r, 1, 1).is_err());
    assert!(train_policy_tree(&Matrix::new(1, 1, vec![0.0]).unwrap(), &r, 0, 1).is_err());
}

/// Rows grouped by the leaf they land in, keyed by the left/right trail.
fn leaf_groups(tree: &PolicyTree, x: &Matrix) -> BTreeMap<Vec<bool>, (Prescription, Vec<usize>)> {
    let names: Vec<String> = (0..x.n_cols()).map(|i| format!("f{i}")).collect();
    let mut groups: BTreeMap<Vec<bool>, (Prescription, Vec<usize>)> = BTreeMap::new();
    for i in 0..x.n_rows() {
        let (a, path) = tree.path(x.row(i), &names).unwrap();
        let key: Vec<bool> = path.iter().map(|s| s.went_left).collect();
        groups.entry(key).or_insert((a, Vec::new())).1.push(i);
    }
    groups
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn trees_respect_their_invariants(seed in 0u64..10_000, n in 20usize..120, p in 1usize..4,
                                      depth in 1usize..4, min_leaf in 1usize..8) {
        let (x, r) = random_problem(seed, n, p);
        let tree = train_policy_tree(&x, &r, depth, min_leaf).unwrap();
        prop_assert!(tree.depth() <= depth);
        let groups = leaf_groups(&tree, &x);
        prop_assert_eq!(groups.len(), tree.n_leaves());
        for (action, rows) in groups.values() {
            prop_assert!(rows.len() >= min_leaf);
            let chosen: f64 = rows.iter().map(|&i| r.reward(i, *action)).sum();
            let other = match action {
                Prescription::Maintain => Prescription::Reduce,
                Prescription::Reduce => Prescription::Maintain,
            };
            let alt: f64 = rows.iter().map(|&i| r.reward(i, other)).sum();
            prop_assert!(chosen >= alt);
        }
        let total = tree.total_reward(&x, &r).unwrap();
        let maintain: f64 = (0..n).map(|i| r.rewards[i][0]).sum();
        let reduce: f64 = (0..n).map(|i| r.rewards[i][1]).sum();
        prop_assert!(total >= maintain.max(reduce));
        for i in 0..n {
            prop_assert_eq!(prescribe(&tree, x.row(i)).unwrap(), prescribe(&tree, x.row(i)).unwrap());
        }
    }
}
