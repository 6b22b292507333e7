//! Prints the danger grid and classifies a few observations.

use windops::scenario::classify_scenario;

fn main() -> windops::Result<()> {
    let rows = [("V < 0.5", 0.25), ("0.5 ≤ V < 1", 0.75), ("1 ≤ V ≤ 2", 1.5), ("2 < V ≤ 4", 3.0), ("V > 4", 6.0)];
    println!("{:<14}{:>12}{:>16}{:>10}", "speed", "favorable", "very unfav.", "other");
    for (label, v) in rows {
        let cells: Vec<String> = [20.0, 180.0, 250.0]
            .iter()
            .map(|&d| classify_scenario(v, d).map(|s| s.as_str().to_string()))
            .collect::<windops::Result<_>>()?;
        println!("{label:<14}{:>12}{:>16}{:>10}", cells[0], cells[1], cells[2]);
    }
    println!();
    for (v, d) in [(0.8, 170.0), (3.1, 95.0), (3.1, 120.0), (1.0, 213.0), (0.3, 300.0)] {
        let s = classify_scenario(v, d)?;
        println!("{v:.1} m/s from {d:>5.1}° -> {} {}", s.as_str(), if s.is_dangerous() { "(dangerous)" } else { "" });
    }
    Ok(())
}
