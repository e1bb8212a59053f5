use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Temperatures `0 = λ_0 < λ_1 < … < λ_T = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Schedule {
    lambdas: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Linear,
    Quadratic,
    Explicit,
}

impl Schedule {
    pub fn new(lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.len() < 2 {
            return Err(Error::InvalidSchedule("need at least two temperatures".into()));
        }
        if lambdas[0] != 0.0 || *lambdas.last().unwrap() != 1.0 {
            return Err(Error::InvalidSchedule("schedule must start at 0 and end at 1".into()));
        }
        if let Some(w) = lambdas.windows(2).find(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidSchedule(format!(
                "schedule must be strictly increasing, found {} then {}",
                w[0], w[1]
            )));
        }
        Ok(Self { lambdas })
    }

    /// Skips validation; lets tests exercise repeated temperatures.
    #[cfg(test)]
    pub(crate) fn unchecked(lambdas: Vec<f64>) -> Self {
        Self { lambdas }
    }

    pub fn linear(steps: usize) -> Result<Self> {
        make_schedule(ScheduleKind::Linear, steps, None)
    }

    pub fn quadratic(steps: usize) -> Result<Self> {
        make_schedule(ScheduleKind::Quadratic, steps, None)
    }

    pub fn steps(&self) -> usize {
        self.lambdas.len() - 1
    }

    pub fn lambda(&self, t: usize) -> f64 {
        self.lambdas[t]
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }
}

impl TryFrom<Vec<f64>> for Schedule {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Schedule::new(v)
    }
}

impl From<Schedule> for Vec<f64> {
    fn from(s: Schedule) -> Self {
        s.lambdas
    }
}

/// Builds a schedule with `steps + 1` temperatures.
pub fn make_schedule(kind: ScheduleKind, steps: usize, values: Option<Vec<f64>>) -> Result<Schedule> {
    match kind {
        ScheduleKind::Explicit => {
            let values = values.ok_or_else(|| Error::InvalidSchedule("explicit schedule needs values".into()))?;
            if steps != 0 && values.len() != steps + 1 {
                return Err(Error::InvalidSchedule(format!(
                    "expected {} values, got {}",
                    steps + 1,
                    values.len()
                )));
            }
            Schedule::new(values)
        }
        _ if steps == 0 => Err(Error::InvalidSchedule("need at least one step".into())),
        ScheduleKind::Linear => Schedule::new((0..=steps).map(|t| t as f64 / steps as f64).collect()),
        ScheduleKind::Quadratic => {
            let denom = (steps * steps) as f64;
            Schedule::new((0..=steps).map(|t| (t * t) as f64 / denom).collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_and_linear_values() {
        assert_eq!(Schedule::quadratic(4).unwrap().lambdas(), &[0.0, 1.0 / 16.0, 0.25, 9.0 / 16.0, 1.0]);
        assert_eq!(Schedule::linear(2).unwrap().lambdas(), &[0.0, 0.5, 1.0]);
        let s = make_schedule(ScheduleKind::Explicit, 2, Some(vec![0.0, 0.3, 1.0])).unwrap();
        assert_eq!(s.lambdas(), &[0.0, 0.3, 1.0]);
    }

    #[test]
    fn rejects_bad_schedules() {
        assert!(Schedule::new(vec![0.0, 0.6, 0.4, 1.0]).is_err());
        assert!(Schedule::new(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(Schedule::new(vec![0.1, 1.0]).is_err());
        assert!(Schedule::new(vec![0.0, 0.9]).is_err());
        assert!(Schedule::linear(0).is_err());
        assert!(make_schedule(ScheduleKind::Explicit, 3, Some(vec![0.0, 1.0])).is_err());
    }

    #[test]
    fn serde_roundtrip_validates() {
        let s: Schedule = serde_json::from_str("[0.0, 0.25, 1.0]").unwrap();
        assert_eq!(s.steps(), 2);
        assert!(serde_json::from_str::<Schedule>("[0.0, 1.5, 1.0]").is_err());
    }
}
