//! Error metrics, decision trade-offs and the operational backtest.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::policy::{false_negative_cost, Prescription, REDUCE_COST};
use crate::scenario::Scenario;
use crate::{Error, Result};

pub const ES_LEVEL: f64 = 0.85;
/// Hours of scenario lookahead used by the operators.
pub const LOOKAHEAD: usize = 3;

pub fn mae(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::Empty("error sample"));
    }
    Ok(errors.iter().map(|e| e.abs()).sum::<f64>() / errors.len() as f64)
}

/// Mean of the worst `⌈(1 − level)·n⌉` absolute errors.
pub fn expected_shortfall(errors: &[f64], level: f64) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::Empty("error sample"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!("level must lie in (0, 1), got {level}")));
    }
    let mut abs: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
    abs.sort_by(|a, b| b.total_cmp(a));
    // tolerate float noise in (1 − level)·n before the ceiling
    let k = (((1.0 - level) * abs.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(abs[..k].iter().sum::<f64>() / k as f64)
}

/// Minimal arc distance in degrees, in [0, 180].
pub fn angular_error(predicted: f64, actual: f64) -> Result<f64> {
    for v in [predicted, actual] {
        if !(0.0..360.0).contains(&v) {
            return Err(Error::invalid(format!("direction {v} outside [0, 360)")));
        }
    }
    let d = (predicted - actual).abs();
    Ok(d.min(360.0 - d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_positives: usize,
    pub true_negatives: usize,
}

impl Confusion {
    fn add(&mut self, action: Prescription, actual: Scenario) {
        match (action, actual.is_dangerous()) {
            (Prescription::Reduce, false) => self.false_positives += 1,
            (Prescription::Maintain, true) => self.false_negatives += 1,
            (Prescription::Reduce, true) => self.true_positives += 1,
            (Prescription::Maintain, false) => self.true_negatives += 1,
        }
    }
}

pub fn confusion_counts(decisions: &[Prescription], actual: &[Scenario]) -> Result<Confusion> {
    if decisions.len() != actual.len() {
        return Err(Error::DimensionMismatch {
            expected: actual.len(),
            actual: decisions.len(),
        });
    }
    let mut c = Confusion::default();
    for (&d, &a) in decisions.iter().zip(actual) {
        c.add(d, a);
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeOff {
    /// `1 − FP/FP_baseline`
    pub cost_savings: f64,
    /// `1 − FN/FN_baseline`
    pub pollution_reduction: f64,
}

impl TradeOff {
    /// Both fractions as rounded integer percentages.
    pub fn percent(&self) -> (i64, i64) {
        (
            (self.cost_savings * 100.0).round() as i64,
            (self.pollution_reduction * 100.0).round() as i64,
        )
    }
}

pub fn trade_off_metrics(model: (usize, usize), baseline: (usize, usize)) -> Result<TradeOff> {
    if baseline.0 == 0 || baseline.1 == 0 {
        return Err(Error::invalid(format!(
            "baseline counts must be positive, got FP={} FN={}",
            baseline.0, baseline.1
        )));
    }
    Ok(TradeOff {
        cost_savings: 1.0 - model.0 as f64 / baseline.0 as f64,
        pollution_reduction: 1.0 - model.1 as f64 / baseline.1 as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Normal,
    Reduced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub hour: usize,
    pub mode: Mode,
    pub actual: Scenario,
    pub pollution_event: bool,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionReport {
    pub hours: usize,
    pub health_cost: f64,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_positives: usize,
    pub true_negatives: usize,
    pub reduced_hours: usize,
    pub pollution_events: usize,
    pub total_cost: f64,
    pub cost_savings: Option<f64>,
    pub pollution_reduction: Option<f64>,
}

impl DecisionReport {
    pub fn confusion(&self) -> Confusion {
        Confusion {
            false_positives: self.false_positives,
            false_negatives: self.false_negatives,
            true_positives: self.true_positives,
            true_negatives: self.true_negatives,
        }
    }

    /// Fills the trade-off fractions against a baseline report.
    pub fn compare_to(&mut self, baseline: &DecisionReport) {
        if let Ok(t) = trade_off_metrics(
            (self.false_positives, self.false_negatives),
            (baseline.false_positives, baseline.false_negatives),
        ) {
            self.cost_savings = Some(t.cost_savings);
            self.pollution_reduction = Some(t.pollution_reduction);
        }
    }
}

/// Outcome of one operational hour.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Step {
    /// Mode the hour is run in.
    pub mode: Mode,
    pub pollution_event: bool,
    /// Mode entering the following hour.
    pub next: Mode,
}

/// One hour of the state machine, given the incoming mode, the scenarios
/// forecast for the next hours and the scenario actually observed.
pub fn step(mode: Mode, forecast: &[Scenario], now: Scenario) -> Step {
    let danger_ahead = forecast.iter().any(|s| s.is_dangerous());
    let (mode, pollution_event, next) = match mode {
        Mode::Normal if danger_ahead => (Mode::Reduced, false, Mode::Reduced),
        Mode::Normal if now.is_dangerous() => (Mode::Normal, true, Mode::Reduced),
        Mode::Normal => (Mode::Normal, false, Mode::Normal),
        Mode::Reduced if !danger_ahead && !now.is_dangerous() => (Mode::Normal, false, Mode::Normal),
        Mode::Reduced => (Mode::Reduced, false, Mode::Reduced),
    };
    Step {
        mode,
        pollution_event,
        next,
    }
}

/// Hour-by-hour plant simulation.
///
/// `predictions[t]` holds the scenarios predicted at hour `t` for hours
/// `t+1..=t+3`. In normal mode a dangerous prediction switches the plant to
/// reduced production for hour `t`; otherwise a dangerous actual scenario is
/// a pollution event charged `2000 + H`, after which the next hour starts in
/// reduced mode. Reduced mode (2000 per hour) is left only when all three
/// predictions and the current actual scenario are favorable.
///
/// Callers truncate the horizon where lookahead predictions run out.
pub fn simulate_operations(
    predictions: &[[Scenario; LOOKAHEAD]],
    actual: &[Scenario],
    health_cost: f64,
) -> Result<(DecisionReport, Vec<LedgerEntry>)> {
    if predictions.len() != actual.len() {
        return Err(Error::DimensionMismatch {
            expected: actual.len(),
            actual: predictions.len(),
        });
    }
    let fn_cost = false_negative_cost(health_cost);
    let mut ledger = Vec::with_capacity(actual.len());
    let mut confusion = Confusion::default();
    let mut mode = Mode::Normal;
    let (mut reduced_hours, mut events) = (0, 0);
    for (t, (pred, &now)) in predictions.iter().zip(actual).enumerate() {
        let Step {
            mode: hour_mode,
            pollution_event: event,
            next,
        } = step(mode, pred, now);
        let cost = match (hour_mode, event) {
            (Mode::Reduced, _) => REDUCE_COST,
            (Mode::Normal, true) => fn_cost,
            (Mode::Normal, false) => 0.0,
        };
        if hour_mode == Mode::Reduced {
            reduced_hours += 1;
        }
        events += event as usize;
        let action = match hour_mode {
            Mode::Reduced => Prescription::Reduce,
            Mode::Normal => Prescription::Maintain,
        };
        confusion.add(action, now);
        ledger.push(LedgerEntry {
            hour: t,
            mode: hour_mode,
            actual: now,
            pollution_event: event,
            cost,
        });
        mode = next;
    }
    Ok((
        DecisionReport {
            hours: actual.len(),
            health_cost,
            false_positives: confusion.false_positives,
            false_negatives: confusion.false_negatives,
            true_positives: confusion.true_positives,
            true_negatives: confusion.true_negatives,
            reduced_hours,
            pollution_events: events,
            // from the counts rather than a running sum, so it is exact for any H
            total_cost: REDUCE_COST * reduced_hours as f64 + fn_cost * events as f64,
            cost_savings: None,
            pollution_reduction: None,
        },
        ledger,
    ))
}

/// Per-lead, per-source accuracy summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastErrorRow {
    pub lead_time: u32,
    pub source: String,
    pub n: usize,
    pub speed_mae: f64,
    pub speed_es85: f64,
    pub direction_mae: f64,
    pub direction_es85: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastErrorReport {
    pub rows: Vec<ForecastErrorRow>,
}

impl ForecastErrorReport {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "lead_time",
            "source",
            "n",
            "speed_mae",
            "speed_es85",
            "direction_mae",
            "direction_es85",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.lead_time.to_string(),
                r.source.clone(),
                r.n.to_string(),
                format!("{:.6}", r.speed_mae),
                format!("{:.6}", r.speed_es85),
                format!("{:.6}", r.direction_mae),
                format!("{:.6}", r.direction_es85),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Errors of one source at one lead; directions in degrees.
pub fn forecast_error_row(
    lead_time: u32,
    source: &str,
    predicted: &[(f64, f64)],
    actual: &[(f64, f64)],
) -> Result<ForecastErrorRow> {
    if predicted.len() != actual.len() {
        return Err(Error::DimensionMismatch {
            expected: actual.len(),
            actual: predicted.len(),
        });
    }
    let speed: Vec<f64> = predicted.iter().zip(actual).map(|(p, a)| p.0 - a.0).collect();
    let dir: Vec<f64> = predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| angular_error(p.1, a.1))
        .collect::<Result<_>>()?;
    Ok(ForecastErrorRow {
        lead_time,
        source: source.to_string(),
        n: speed.len(),
        speed_mae: mae(&speed)?,
        speed_es85: expected_shortfall(&speed, ES_LEVEL)?,
        direction_mae: mae(&dir)?,
        direction_es85: expected_shortfall(&dir, ES_LEVEL)?,
    })
}
