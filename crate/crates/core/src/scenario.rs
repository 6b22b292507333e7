//! Wind danger scenarios.
//!
//! A scenario is one cell of a 5 × 3 grid crossing a wind-speed bucket with a
//! wind-direction class. S3b and S4 carry plant emissions toward the city and
//! are the only dangerous cells.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Direction class boundaries in degrees, half-open `[lo, hi)`.
pub const FAVORABLE_END: f64 = 101.25;
pub const VERY_UNFAVORABLE_START: f64 = 146.25;
pub const VERY_UNFAVORABLE_END: f64 = 213.75;
pub const FAVORABLE_START: f64 = 303.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    S1,
    S2,
    S2b,
    S3,
    S3b,
    S4,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::S1,
        Scenario::S2,
        Scenario::S2b,
        Scenario::S3,
        Scenario::S3b,
        Scenario::S4,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::S1 => "S1",
            Scenario::S2 => "S2",
            Scenario::S2b => "S2b",
            Scenario::S3 => "S3",
            Scenario::S3b => "S3b",
            Scenario::S4 => "S4",
        }
    }

    pub fn is_dangerous(self) -> bool {
        is_dangerous(self)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown scenario label `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionClass {
    Favorable,
    VeryUnfavorable,
    Unfavorable,
}

/// Speed rows of the grid: `[0,0.5)`, `[0.5,1)`, `[1,2]`, `(2,4]`, `(4,∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpeedBucket {
    Calm,
    Light,
    Gentle,
    Moderate,
    Strong,
}

impl SpeedBucket {
    pub fn of(speed: f64) -> SpeedBucket {
        if speed < 0.5 {
            SpeedBucket::Calm
        } else if speed < 1.0 {
            SpeedBucket::Light
        } else if speed <= 2.0 {
            SpeedBucket::Gentle
        } else if speed <= 4.0 {
            SpeedBucket::Moderate
        } else {
            SpeedBucket::Strong
        }
    }
}

pub fn classify_direction(direction: f64) -> Result<DirectionClass> {
    if !(0.0..360.0).contains(&direction) {
        return Err(Error::invalid(format!(
            "direction {direction} outside [0, 360)"
        )));
    }
    Ok(if direction < FAVORABLE_END || direction >= FAVORABLE_START {
        DirectionClass::Favorable
    } else if (VERY_UNFAVORABLE_START..VERY_UNFAVORABLE_END).contains(&direction) {
        DirectionClass::VeryUnfavorable
    } else {
        DirectionClass::Unfavorable
    })
}

pub fn classify_scenario(speed: f64, direction: f64) -> Result<Scenario> {
    if speed.is_nan() || speed < 0.0 {
        return Err(Error::invalid(format!("wind speed {speed} must be >= 0")));
    }
    let class = classify_direction(direction)?;
    Ok(grid_cell(SpeedBucket::of(speed), class))
}

pub fn grid_cell(bucket: SpeedBucket, class: DirectionClass) -> Scenario {
    use DirectionClass::*;
    use Scenario::*;
    use SpeedBucket::*;
    match (bucket, class) {
        (Calm, Favorable) => S3,
        (Calm, VeryUnfavorable) => S4,
        (Calm, Unfavorable) => S4,
        (Light, Favorable) => S2,
        (Light, VeryUnfavorable) => S3b,
        (Light, Unfavorable) => S2b,
        (Gentle, Favorable) => S1,
        (Gentle, VeryUnfavorable) => S3b,
        (Gentle, Unfavorable) => S2b,
        (Moderate, Favorable) => S1,
        (Moderate, VeryUnfavorable) => S3b,
        (Moderate, Unfavorable) => S2,
        (Strong, _) => S1,
    }
}

pub fn is_dangerous(scenario: Scenario) -> bool {
    matches!(scenario, Scenario::S3b | Scenario::S4)
}

/// Scenario implied by a forecast from any source. Negative model speeds are
/// clamped to zero first; the direction is wrapped into `[0, 360)`.
pub fn scenario_forecast(speed: f64, direction: f64) -> Result<Scenario> {
    if !speed.is_finite() || !direction.is_finite() {
        return Err(Error::NonFinite("scenario forecast"));
    }
    classify_scenario(speed.max(0.0), direction.rem_euclid(360.0) % 360.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direction_classes() {
        assert_eq!(classify_direction(0.0).unwrap(), DirectionClass::Favorable);
        assert_eq!(
            classify_direction(180.0).unwrap(),
            DirectionClass::VeryUnfavorable
        );
        assert_eq!(
            classify_direction(270.0).unwrap(),
            DirectionClass::Unfavorable
        );
        assert_eq!(
            classify_direction(101.25).unwrap(),
            DirectionClass::Unfavorable
        );
        assert_eq!(
            classify_direction(303.75).unwrap(),
            DirectionClass::Favorable
        );
        assert!(classify_direction(360.0).is_err());
        assert!(classify_direction(-0.1).is_err());
    }

    #[test]
    fn scenario_examples() {
        assert_eq!(classify_scenario(0.3, 180.0).unwrap(), Scenario::S4);
        assert_eq!(classify_scenario(1.5, 270.0).unwrap(), Scenario::S2b);
        assert_eq!(classify_scenario(5.0, 180.0).unwrap(), Scenario::S1);
        assert_eq!(classify_scenario(3.0, 0.0).unwrap(), Scenario::S1);
        assert!(classify_scenario(-1.0, 0.0).is_err());
    }

    #[test]
    fn speed_of_exactly_one_is_in_the_gentle_row() {
        assert_eq!(SpeedBucket::of(1.0), SpeedBucket::Gentle);
        assert_eq!(SpeedBucket::of(2.0), SpeedBucket::Gentle);
        assert_eq!(SpeedBucket::of(4.0), SpeedBucket::Moderate);
        assert_eq!(SpeedBucket::of(0.5), SpeedBucket::Light);
    }

    #[test]
    fn danger_labels() {
        assert!(is_dangerous(Scenario::S4));
        assert!(is_dangerous(Scenario::S3b));
        assert!(!is_dangerous(Scenario::S1));
        assert!(!is_dangerous(Scenario::S2b));
        assert!(!is_dangerous(Scenario::S3));
    }

    #[test]
    fn forecast_sources() {
        assert_eq!(scenario_forecast(0.4, 160.0).unwrap(), Scenario::S4);
        assert_eq!(scenario_forecast(6.0, 90.0).unwrap(), Scenario::S1);
        assert_eq!(scenario_forecast(-0.2, 100.0).unwrap(), Scenario::S3);
    }

    #[test]
    fn labels_round_trip() {
        for s in Scenario::ALL {
            assert_eq!(s.as_str().parse::<Scenario>().unwrap(), s);
            assert_eq!(
                serde_json::to_string(&s).unwrap(),
                format!("\"{}\"", s.as_str())
            );
        }
    }
}
