use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

/// One numeric claim with its tolerance. `pass` is `residual <= tolerance`;
/// counts use tolerance 0 and the absolute difference as residual.
#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub predicted: Value,
    pub measured: Value,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub provenance: String,
    pub wall_time_s: f64,
}

impl CheckReport {
    fn build(check: &str, predicted: Value, measured: Value, residual: f64, tolerance: f64, provenance: &str) -> Self {
        CheckReport {
            check: check.into(),
            predicted,
            measured,
            residual,
            tolerance,
            pass: residual <= tolerance,
            provenance: provenance.into(),
            wall_time_s: 0.0,
        }
    }

    pub fn count(check: &str, predicted: usize, measured: usize, provenance: &str) -> Self {
        let diff = (predicted as f64 - measured as f64).abs();
        Self::build(check, predicted.into(), measured.into(), diff, 0.0, provenance)
    }

    /// A quantity that should vanish.
    pub fn zero(check: &str, measured: f64, tolerance: f64, provenance: &str) -> Self {
        Self::build(check, 0.0.into(), measured.into(), measured.abs(), tolerance, provenance)
    }

    pub fn value(check: &str, predicted: f64, measured: f64, tolerance: f64, provenance: &str) -> Self {
        Self::build(
            check,
            predicted.into(),
            measured.into(),
            (predicted - measured).abs(),
            tolerance,
            provenance,
        )
    }

    /// Exact match of two labels (group elements, booleans).
    pub fn label(check: &str, predicted: &str, measured: &str, provenance: &str) -> Self {
        let residual = if predicted == measured { 0.0 } else { 1.0 };
        Self::build(check, predicted.into(), measured.into(), residual, 0.0, provenance)
    }

    pub fn timed(mut self, t0: Instant) -> Self {
        self.wall_time_s = t0.elapsed().as_secs_f64();
        self
    }

    /// Records a measured value that is not compared to a prediction.
    pub fn with_note(mut self, key: &str, v: impl Into<Value>) -> Self {
        let measured = std::mem::take(&mut self.measured);
        let mut obj = serde_json::Map::new();
        obj.insert("value".into(), measured);
        obj.insert(key.into(), v.into());
        self.measured = Value::Object(obj);
        self
    }
}

/// Gives every check produced by one computation that computation's wall time.
pub fn stamp(checks: &mut [CheckReport], t0: Instant) {
    let t = t0.elapsed().as_secs_f64();
    for c in checks {
        c.wall_time_s = t;
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Skipped {
    pub suite: String,
    pub reason: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub inputs: Value,
    pub checks: Vec<CheckReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<Skipped>,
    pub pass: bool,
    pub wall_time_s: f64,
}

impl SuiteReport {
    pub fn new(suite: &str, inputs: Value, checks: Vec<CheckReport>, skipped: Vec<Skipped>, t0: Instant) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        SuiteReport {
            suite: suite.into(),
            inputs,
            checks,
            skipped,
            pass,
            wall_time_s: t0.elapsed().as_secs_f64(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_follows_tolerance() {
        assert!(CheckReport::zero("a", 1e-12, 1e-9, "p").pass);
        assert!(!CheckReport::zero("a", 1e-6, 1e-9, "p").pass);
        assert!(CheckReport::count("n", 4, 4, "p").pass);
        assert!(!CheckReport::count("n", 4, 3, "p").pass);
        assert!(!CheckReport::label("x", "(2 3)", "(1 3)", "p").pass);
    }

    #[test]
    fn note_keeps_value() {
        let c = CheckReport::zero("a", 0.5, 1.0, "p").with_note("gap", 2.0);
        assert_eq!(c.measured["value"], 0.5);
        assert_eq!(c.measured["gap"], 2.0);
    }
}
