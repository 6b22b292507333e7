//! Coordinate-descent elastic net on a sparse linear problem.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use windops::regress::{elastic_net, Matrix};

fn main() -> windops::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (n, p) = (200, 8);
    let truth = [3.0, -2.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
    let data: Vec<f64> = (0..n * p).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x = Matrix::new(n, p, data)?;
    let y: Vec<f64> = (0..n)
        .map(|i| 0.5 + x.row(i).iter().zip(&truth).map(|(a, b)| a * b).sum::<f64>() + rng.random_range(-0.2..0.2))
        .collect();

    println!("true coefficients {truth:?}");
    for (alpha, l1) in [(0.0, 0.5), (0.01, 1.0), (0.1, 1.0), (0.5, 1.0), (0.1, 0.0), (0.5, 0.5)] {
        let m = elastic_net::train(&x, &y, alpha, l1)?;
        let coefs: Vec<String> = m.coefficients.iter().map(|c| format!("{c:6.2}")).collect();
        let nonzero = m.coefficients.iter().filter(|c| **c != 0.0).count();
        println!(
            "alpha {alpha:<5} l1 {l1:<4} intercept {:5.2} [{}] nonzero {nonzero}",
            m.intercept,
            coefs.join(" ")
        );
    }
    Ok(())
}
