//! Piecewise-constant functions on the unit interval, used for leak
//! schedules `α(t)` and time-dependent diffusivities.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `values[i]` holds on `[knots[i-1], knots[i])`, with implicit outer knots
/// at 0 and 1. Knots are strictly increasing inside (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleRepr", into = "ScheduleRepr")]
pub struct PiecewiseConstant {
    knots: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ScheduleRepr {
    Constant(f64),
    Steps { knots: Vec<f64>, values: Vec<f64> },
}

impl TryFrom<ScheduleRepr> for PiecewiseConstant {
    type Error = Error;

    fn try_from(r: ScheduleRepr) -> Result<Self> {
        match r {
            ScheduleRepr::Constant(v) => PiecewiseConstant::constant(v),
            ScheduleRepr::Steps { knots, values } => PiecewiseConstant::new(knots, values),
        }
    }
}

impl From<PiecewiseConstant> for ScheduleRepr {
    fn from(p: PiecewiseConstant) -> Self {
        if p.knots.is_empty() {
            ScheduleRepr::Constant(p.values[0])
        } else {
            ScheduleRepr::Steps {
                knots: p.knots,
                values: p.values,
            }
        }
    }
}

impl PiecewiseConstant {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != knots.len() + 1 {
            return Err(Error::invalid(format!(
                "schedule with {} knots needs {} values, got {}",
                knots.len(),
                knots.len() + 1,
                values.len()
            )));
        }
        if knots.iter().any(|k| !(*k > 0.0 && *k < 1.0)) {
            return Err(Error::invalid("schedule knots must lie strictly inside (0, 1)"));
        }
        if knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("schedule knots must be strictly increasing"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("schedule values must be finite and nonnegative"));
        }
        Ok(PiecewiseConstant { knots, values })
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new(Vec::new(), vec![value])
    }

    pub fn zero() -> Self {
        PiecewiseConstant {
            knots: Vec::new(),
            values: vec![0.0],
        }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, t: f64) -> f64 {
        let i = self.knots.partition_point(|k| *k <= t);
        self.values[i]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    /// Exact `∫₀ᵗ f(s) ds` for `t ∈ [0, 1]`.
    pub fn integral(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        let mut lo = 0.0;
        for (i, v) in self.values.iter().enumerate() {
            let hi = self.knots.get(i).copied().unwrap_or(f64::INFINITY);
            if t <= lo {
                break;
            }
            acc += v * (t.min(hi) - lo);
            lo = hi;
        }
        acc
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.knots.clone(),
            self.values.iter().map(|v| v * factor).collect(),
        )
    }
}
