//! Runs the hourly operating state machine over a short scripted episode.

use windops::evalsim::*;
use windops::scenario::Scenario::{self, *};

fn main() -> windops::Result<()> {
    let actual = [S1, S1, S2, S3b, S4, S3b, S2, S1, S1, S3b, S1, S1];
    // exact forecasts, except that the isolated event at hour 9 is missed
    let forecasts: Vec<[Scenario; LOOKAHEAD]> = (0..actual.len())
        .map(|t| {
            std::array::from_fn(|k| match actual.get(t + k + 1) {
                Some(&S3b) if t + k + 1 == 9 => S1,
                Some(&s) => s,
                None => S1,
            })
        })
        .collect();
    let health_cost = 8000.0;
    let (report, ledger) = simulate_operations(&forecasts, &actual, health_cost)?;
    println!("hour  actual  forecast        mode     cost");
    for (t, e) in ledger.iter().enumerate() {
        let f: Vec<&str> = forecasts[t].iter().map(|s| s.as_str()).collect();
        println!("{t:>4}  {:<6}  {:<14}  {:<7}  {:>6.0}", e.actual.as_str(), f.join(","), format!("{:?}", e.mode), e.cost);
    }
    println!(
        "\nreduced {} h, events {}, false positives {}, total cost {:.0}",
        report.reduced_hours, report.false_negatives, report.false_positives, report.total_cost
    );

    let c = trade_off_metrics((106, 74), (288, 110))?;
    let (cost_saving, protection) = c.percent();
    println!("trade-off of (106 FP, 74 FN) against (288, 110): cost saving {cost_saving}%, protection {protection}%");
    Ok(())
}
