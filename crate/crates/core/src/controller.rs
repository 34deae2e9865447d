//! The oscillating feedback
//!
//! ```text
//! u1 = a1 + k1 sqrt(w |a12|) sign(a12) cos(w t)
//! u2 = a2 + k2 sqrt(w |a12|) sin(w t)
//! ```
//!
//! with `w = 2 pi / eps` and `k1 k2 = 4`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::Control;
use crate::potential::AmplitudeVector;

/// Tolerance on `k1 * k2 = 4`.
pub const COEFFICIENT_PRODUCT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BoundsMode {
    /// `U = R^2`
    #[default]
    Ideal,
    Clamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LoopMode {
    /// Amplitudes sampled at `t_j = j eps` and frozen over each period.
    #[default]
    Sampling,
    /// Amplitudes recomputed at every control update.
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityBounds {
    pub u1_max: f64,
    pub u2_max: f64,
    pub mode: BoundsMode,
}

impl VelocityBounds {
    /// TurtleBot3 Burger limits.
    pub const TURTLEBOT3: VelocityBounds = VelocityBounds {
        u1_max: 0.22,
        u2_max: 2.84,
        mode: BoundsMode::Clamp,
    };

    pub const IDEAL: VelocityBounds = VelocityBounds {
        u1_max: f64::INFINITY,
        u2_max: f64::INFINITY,
        mode: BoundsMode::Ideal,
    };

    pub fn clamped(u1_max: f64, u2_max: f64) -> Self {
        VelocityBounds {
            u1_max,
            u2_max,
            mode: BoundsMode::Clamp,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.mode == BoundsMode::Clamp {
            for (name, v) in [("u1_max", self.u1_max), ("u2_max", self.u2_max)] {
                if !(v > 0.0) {
                    return Err(Error::param(name, format!("must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerParams {
    /// Sampling period in seconds.
    pub epsilon: f64,
    pub gamma: f64,
    pub k1: f64,
    pub k2: f64,
    pub bounds: VelocityBounds,
    pub loop_mode: LoopMode,
    /// Skip the `k1 k2 = 4` check.
    pub unchecked: bool,
}

impl Default for ControllerParams {
    fn default() -> Self {
        ControllerParams {
            epsilon: 1.0,
            gamma: 0.05,
            k1: 0.5,
            k2: 8.0,
            bounds: VelocityBounds::IDEAL,
            loop_mode: LoopMode::Sampling,
            unchecked: false,
        }
    }
}

/// Validated, immutable feedback law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Controller {
    params: ControllerParams,
    omega: f64,
}

impl Controller {
    pub fn new(params: ControllerParams) -> Result<Self> {
        for (name, v) in [
            ("epsilon", params.epsilon),
            ("gamma", params.gamma),
            ("k1", params.k1),
            ("k2", params.k2),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        let product = params.k1 * params.k2;
        if !params.unchecked && (product - 4.0).abs() > COEFFICIENT_PRODUCT_TOL {
            return Err(Error::CoefficientProduct {
                k1: params.k1,
                k2: params.k2,
                product,
            });
        }
        params.bounds.validate()?;
        Ok(Controller {
            params,
            omega: TAU / params.epsilon,
        })
    }

    pub fn params(&self) -> &ControllerParams {
        &self.params
    }

    pub fn epsilon(&self) -> f64 {
        self.params.epsilon
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn gamma(&self) -> f64 {
        self.params.gamma
    }

    pub fn loop_mode(&self) -> LoopMode {
        self.params.loop_mode
    }

    /// Feedback without actuator limits.
    pub fn raw_control(&self, a: &AmplitudeVector, t: f64) -> Control {
        let amp = (self.omega * a.a12.abs()).sqrt();
        // Reduce the phase to one period so that u(t + eps) = u(t) holds to rounding.
        let phase = TAU * (t / self.params.epsilon).rem_euclid(1.0);
        let (s, c) = phase.sin_cos();
        Control {
            u1: a.a1 + self.params.k1 * amp * sign(a.a12) * c,
            u2: a.a2 + self.params.k2 * amp * s,
        }
    }

    /// Feedback followed by clamping; the flag reports saturation.
    pub fn control_value(&self, a: &AmplitudeVector, t: f64) -> (Control, bool) {
        clamp(self.raw_control(a, t), &self.params.bounds)
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Componentwise clamp to the bounds box; identity in ideal mode.
pub fn clamp(u: Control, b: &VelocityBounds) -> (Control, bool) {
    match b.mode {
        BoundsMode::Ideal => (u, false),
        BoundsMode::Clamp => {
            let c = Control {
                u1: u.u1.clamp(-b.u1_max, b.u1_max),
                u2: u.u2.clamp(-b.u2_max, b.u2_max),
            };
            (c, c != u)
        }
    }
}
