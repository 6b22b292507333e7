//! Learns a reduce/maintain policy from member forecasts of wind.
//!
//! The rows are toy forecasts: danger is present when the forecast direction
//! points south and the forecast speed is low.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use windops::policy::*;
use windops::regress::Matrix;
use windops::scenario::classify_scenario;

fn main() -> windops::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 2000;
    let mut rows = Vec::with_capacity(n);
    let mut actual = Vec::with_capacity(n);
    for _ in 0..n {
        let speed: f64 = rng.random_range(0.0..6.0);
        let dir: f64 = rng.random_range(0.0..360.0);
        actual.push(classify_scenario(speed, dir)?);
        // two noisy "members" forecasting speed and direction
        rows.push(vec![
            (speed + rng.random_range(-0.5..0.5)).max(0.0),
            (speed + rng.random_range(-1.0..1.0)).max(0.0),
            (dir + rng.random_range(-20.0..20.0)).rem_euclid(360.0),
        ]);
    }
    let x = Matrix::from_rows(&rows)?;
    let names: Vec<String> = ["speed_a", "speed_b", "direction"].map(String::from).to_vec();
    let dangerous = actual.iter().filter(|s| s.is_dangerous()).count();
    println!("{dangerous} dangerous hours out of {n}");

    for h in [2000.0, 18000.0] {
        let rewards = build_reward_matrix(&actual, h)?;
        let tuned = tune_policy_tree(&x, &rewards, &[1, 2, 3], &[10], 5)?;
        let tree = &tuned.tree;
        let reduce = (0..n).filter(|&i| matches!(prescribe(tree, x.row(i)), Ok(Prescription::Reduce))).count();
        println!(
            "\nH = {h}: depth {}, {} leaves, reduces in {reduce} hours, reward {:.0}",
            tree.depth(),
            tree.n_leaves(),
            tree.total_reward(&x, &rewards)?
        );
        print!("{}", render_tree_text(tree, &names));
    }
    Ok(())
}
