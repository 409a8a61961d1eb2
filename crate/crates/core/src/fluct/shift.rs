use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Non-decreasing integer time shift `R(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeShift {
    /// `R(t) = ⌊log_{1/a} t⌋`, for step-ratio limit `a < 1`.
    LogA { a: f64 },
    /// `R(t) = ⌊log_M t⌋`.
    LogM {
        #[serde(rename = "M")]
        order: u32,
    },
    /// `R(t) = values[#{i : breaks[i] <= t}]`.
    Steps { breaks: Vec<f64>, values: Vec<i64> },
}

/// Relative slack that lets a computed grid point such as `a^{-m}` land on
/// its own step even when rounding puts it a few ulps short.
const EDGE_SLACK: f64 = 4.0 * f64::EPSILON;

impl TimeShift {
    pub fn validate(&self) -> Result<()> {
        match self {
            TimeShift::LogA { a } => {
                if !(*a > 0.0 && *a < 1.0) {
                    return Err(Error::InvalidParameter(format!("log_a shift needs 0 < a < 1, got {a}")));
                }
            }
            TimeShift::LogM { order } => crate::hiergroup::check_order(*order)?,
            TimeShift::Steps { breaks, values } => {
                if values.len() != breaks.len() + 1 {
                    return Err(Error::InvalidParameter(
                        "step shift needs exactly one more value than breaks".into(),
                    ));
                }
                if breaks.iter().any(|b| !(b.is_finite() && *b > 0.0))
                    || breaks.windows(2).any(|w| w[0] >= w[1])
                {
                    return Err(Error::InvalidParameter(
                        "step breaks must be positive and strictly increasing".into(),
                    ));
                }
                if values.windows(2).any(|w| w[0] > w[1]) {
                    return Err(Error::InvalidParameter("step values must be non-decreasing".into()));
                }
            }
        }
        Ok(())
    }

    /// The base `1/a` or `M` of the logarithmic shifts.
    fn base(&self) -> Option<f64> {
        match self {
            TimeShift::LogA { a } => Some(1.0 / a),
            TimeShift::LogM { order } => Some(*order as f64),
            TimeShift::Steps { .. } => None,
        }
    }

    /// `base^level`, computed from `a` directly for the `LogA` shift so that
    /// grid points are reproduced bit for bit.
    fn pow_base(&self, level: i64) -> f64 {
        match self {
            TimeShift::LogA { a } => a.powf(-(level as f64)),
            TimeShift::LogM { order } => (*order as f64).powf(level as f64),
            TimeShift::Steps { .. } => f64::NAN,
        }
    }

    /// `R(t)` for `t > 0`.
    pub fn eval(&self, t: f64) -> Result<i64> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!("time must be positive and finite, got {t}")));
        }
        self.validate()?;
        if let TimeShift::Steps { breaks, values } = self {
            let idx = breaks.partition_point(|&b| b <= t);
            return Ok(values[idx]);
        }
        let base = self.base().expect("logarithmic shift");
        let guess = (t.ln() / base.ln()).floor();
        let mut level = guess as i64;
        let reach = t * (1.0 + EDGE_SLACK);
        while self.pow_base(level + 1) <= reach {
            level += 1;
        }
        while self.pow_base(level) > reach {
            level -= 1;
        }
        Ok(level)
    }

    /// The left end of the step `R = level` for the logarithmic shifts.
    pub fn point(&self, level: i64) -> Option<f64> {
        match self {
            TimeShift::Steps { .. } => None,
            _ => Some(self.pow_base(level)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_shifts_hit_grid_points_exactly() {
        for a in [0.5, 1.0 / 3.0, 2.0 / 3.0, 0.25, 0.1] {
            let shift = TimeShift::LogA { a };
            for m in -40..=40 {
                let t = a.powf(-(m as f64));
                assert_eq!(shift.eval(t).unwrap(), m, "a={a} m={m}");
                assert_eq!(shift.point(m).unwrap(), t);
                // just inside the next step down
                assert_eq!(shift.eval(t * (1.0 - 1e-9)).unwrap(), m - 1);
            }
        }
        for order in [2u32, 3, 5] {
            let shift = TimeShift::LogM { order };
            for m in -20i64..=20 {
                let t = (order as f64).powi(m as i32);
                assert_eq!(shift.eval(t).unwrap(), m);
                assert_eq!(shift.eval(t * 1.5).unwrap(), m);
            }
        }
        let shift = TimeShift::LogA { a: 0.5 };
        assert_eq!(shift.eval(1.0).unwrap(), 0);
        assert_eq!(shift.eval(3.9).unwrap(), 1);
        assert!(shift.eval(0.0).is_err());
        assert!(TimeShift::LogA { a: 1.0 }.eval(1.0).is_err());
    }

    #[test]
    fn step_shift() {
        let shift = TimeShift::Steps {
            breaks: vec![1.0, 5.0],
            values: vec![-1, 0, 3],
        };
        assert_eq!(shift.eval(0.5).unwrap(), -1);
        assert_eq!(shift.eval(1.0).unwrap(), 0);
        assert_eq!(shift.eval(7.0).unwrap(), 3);
        let bad = TimeShift::Steps {
            breaks: vec![1.0],
            values: vec![2, 1],
        };
        assert!(bad.eval(1.0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let shift: TimeShift = serde_json::from_str(r#"{"kind":"log_m","M":3}"#).unwrap();
        assert_eq!(shift, TimeShift::LogM { order: 3 });
        let back: TimeShift = serde_json::from_str(&serde_json::to_string(&shift).unwrap()).unwrap();
        assert_eq!(back, shift);
        assert!(serde_json::from_str::<TimeShift>(r#"{"kind":"log_a","a":0.5,"x":1}"#).is_err());
    }
}
