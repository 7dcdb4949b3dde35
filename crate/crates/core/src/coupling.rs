//! Coupling prototypes on the circle.
//!
//! Two prototype functions are used throughout the toolkit:
//!
//! * attractive: `f(θ) = tan(θ/2)` on the branch `(−π, π)`, vanishing at
//!   zero separation and blowing up at antipodal separation;
//! * repulsive:  `g(θ) = −cot(θ/2)` on the branch `(0, 2π)`, vanishing at
//!   antipodal separation and blowing up at zero separation.
//!
//! Both are strictly increasing on their branch, so scaled copies
//! `α·f`, `β·g` with positive coefficients keep the barrier structure: a
//! coupled pair can never cross the separation where its coupling diverges.
//! Evaluation within `guard` of a barrier is refused with
//! [`CouplingError::BarrierHit`] so that the integrator can react instead of
//! silently producing huge velocities.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Refuse evaluation this close (in radians) to a barrier.
pub const DEFAULT_BARRIER_GUARD: f64 = 1e-9;

const TWO_PI: f64 = 2.0 * PI;

/// Which prototype a coupling is a scaled copy of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CouplingKind {
    Attractive,
    Repulsive,
}

/// A coupling `c(θ) = coefficient · prototype(θ)` with `coefficient > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledCoupling {
    pub kind: CouplingKind,
    pub coefficient: f64,
}

impl ScaledCoupling {
    /// Errors unless `coefficient > 0` and finite.
    pub fn new(kind: CouplingKind, coefficient: f64) -> Result<Self, CouplingError> {
        if !(coefficient > 0.0) || !coefficient.is_finite() {
            return Err(CouplingError::NonpositiveCoefficient { coefficient });
        }
        Ok(Self { kind, coefficient })
    }

    pub fn eval(&self, theta: f64) -> Result<f64, CouplingError> {
        let v = match self.kind {
            CouplingKind::Attractive => eval_attractive(theta)?,
            CouplingKind::Repulsive => eval_repulsive(theta)?,
        };
        Ok(self.coefficient * v)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CouplingError {
    /// The (wrapped) argument lies within `guard` of the prototype's barrier.
    #[error("coupling argument {theta} is within {guard} of a {kind:?} barrier")]
    BarrierHit {
        kind: CouplingKind,
        theta: f64,
        guard: f64,
    },
    #[error("coupling coefficient must be positive and finite, got {coefficient}")]
    NonpositiveCoefficient { coefficient: f64 },
}

/// Wrap `theta` onto the evaluation branch of `kind`: `(−π, π]` for the
/// attractive prototype, `[0, 2π)` for the repulsive one.
pub fn wrap_to_branch(theta: f64, kind: CouplingKind) -> f64 {
    let r = theta.rem_euclid(TWO_PI);
    match kind {
        CouplingKind::Attractive => {
            if r > PI {
                r - TWO_PI
            } else {
                r
            }
        }
        CouplingKind::Repulsive => r,
    }
}

/// `tan(θ/2)` after wrapping to `(−π, π]`, with the default barrier guard.
pub fn eval_attractive(theta: f64) -> Result<f64, CouplingError> {
    eval_attractive_guarded(theta, DEFAULT_BARRIER_GUARD)
}

/// `tan(θ/2)` after wrapping to `(−π, π]`, refusing arguments within `guard`
/// of the barrier at ±π.
pub fn eval_attractive_guarded(theta: f64, guard: f64) -> Result<f64, CouplingError> {
    let w = wrap_to_branch(theta, CouplingKind::Attractive);
    if w.abs() >= PI - guard {
        return Err(CouplingError::BarrierHit {
            kind: CouplingKind::Attractive,
            theta: w,
            guard,
        });
    }
    Ok((w / 2.0).tan())
}

/// `−cot(θ/2)` after wrapping to `[0, 2π)`, with the default barrier guard.
pub fn eval_repulsive(theta: f64) -> Result<f64, CouplingError> {
    eval_repulsive_guarded(theta, DEFAULT_BARRIER_GUARD)
}

/// `−cot(θ/2)` after wrapping to `[0, 2π)`, refusing arguments within
/// `guard` of the barrier at 0 (equivalently 2π).
pub fn eval_repulsive_guarded(theta: f64, guard: f64) -> Result<f64, CouplingError> {
    let w = wrap_to_branch(theta, CouplingKind::Repulsive);
    if w <= guard || w >= TWO_PI - guard {
        return Err(CouplingError::BarrierHit {
            kind: CouplingKind::Repulsive,
            theta: w,
            guard,
        });
    }
    let h = w / 2.0;
    Ok(-h.cos() / h.sin())
}

/// Derivative of the prototype at `theta`:
/// `½ sec²(θ/2)` (attractive) or `½ csc²(θ/2)` (repulsive).
///
/// Strictly positive on the whole branch, which is what makes network
/// Jacobians Metzler off the diagonal.
pub fn eval_derivative(kind: CouplingKind, theta: f64) -> Result<f64, CouplingError> {
    eval_derivative_guarded(kind, theta, DEFAULT_BARRIER_GUARD)
}

pub fn eval_derivative_guarded(
    kind: CouplingKind,
    theta: f64,
    guard: f64,
) -> Result<f64, CouplingError> {
    let w = wrap_to_branch(theta, kind);
    match kind {
        CouplingKind::Attractive => {
            if w.abs() >= PI - guard {
                return Err(CouplingError::BarrierHit { kind, theta: w, guard });
            }
            let c = (w / 2.0).cos();
            Ok(0.5 / (c * c))
        }
        CouplingKind::Repulsive => {
            if w <= guard || w >= TWO_PI - guard {
                return Err(CouplingError::BarrierHit { kind, theta: w, guard });
            }
            let s = (w / 2.0).sin();
            Ok(0.5 / (s * s))
        }
    }
}
