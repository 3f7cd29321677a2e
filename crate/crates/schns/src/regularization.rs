//! Smooth cut-off in front of the nonlinear terms and the stopping-time
//! detector.
//!
//! The cut-off profile is the standard partition-of-unity bump built from
//! q(t) = exp(-1/t): it is exactly 1 below the radius R, exactly 0 above 2R,
//! and smooth and monotone in between. Exactness of the value 1 matters: a
//! trajectory that never leaves the R-ball multiplies every nonlinear term
//! by the literal constant 1.0 and is therefore bit-identical to a run with
//! the cut-off disabled.

use crate::error::{Result, SchnsError};

/// Parameters of the smooth cut-off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffParams {
    /// Cut-off radius; `f64::INFINITY` disables the cut-off.
    pub r: f64,
}

impl CutoffParams {
    pub fn new(r: f64) -> Result<Self> {
        if r.is_nan() || r <= 0.0 {
            return Err(SchnsError::Parameter(format!(
                "cut-off radius must be positive (or infinite to disable), got {r}"
            )));
        }
        Ok(Self { r })
    }

    pub fn disabled() -> Self {
        Self { r: f64::INFINITY }
    }

    pub fn is_disabled(&self) -> bool {
        self.r.is_infinite()
    }

    /// Smooth bump profile: 1 on [0, R), 0 on [2R, inf), monotone bridge on
    /// (R, 2R) via q((2R-x)/R) / (q((2R-x)/R) + q((x-R)/R)).
    pub fn psi_bar(&self, x: f64) -> Result<f64> {
        if x.is_nan() || x < 0.0 {
            return Err(SchnsError::Parameter(format!(
                "psi_bar expects x >= 0, got {x}"
            )));
        }
        if self.is_disabled() {
            return Ok(1.0);
        }
        let r = self.r;
        if x < r {
            return Ok(1.0);
        }
        if x >= 2.0 * r {
            return Ok(0.0);
        }
        let a = bump((2.0 * r - x) / r);
        let b = bump((x - r) / r);
        Ok(a / (a + b))
    }

    /// Product cut-off over the velocity norm and the phase-pair V1 norm.
    pub fn psi_r(&self, u_norm: f64, v1_norm: f64) -> Result<f64> {
        Ok(self.psi_bar(u_norm)? * self.psi_bar(v1_norm)?)
    }
}

fn bump(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Outcome of the first-crossing scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stop {
    /// First index where the combined norm reached 2R.
    At(usize),
    /// The trajectory never reached 2R.
    End,
}

/// First index where sqrt(u_norm^2 + v1_norm^2) >= 2R, or `End`.
pub fn stopping_time_index(traj: &[(f64, f64)], r: f64) -> Result<Stop> {
    if traj.is_empty() {
        return Err(SchnsError::Data("empty trajectory".into()));
    }
    for (k, &(u, v)) in traj.iter().enumerate() {
        if !u.is_finite() || !v.is_finite() {
            return Err(SchnsError::Data(format!(
                "non-finite norm at index {k}: ({u}, {v})"
            )));
        }
        if combined_norm(u, v) >= 2.0 * r {
            return Ok(Stop::At(k));
        }
    }
    Ok(Stop::End)
}

/// Product-space norm monitored by the detector.
pub fn combined_norm(u_norm: f64, v1_norm: f64) -> f64 {
    (u_norm * u_norm + v1_norm * v1_norm).sqrt()
}
