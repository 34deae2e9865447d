//! The four experiment parameter sets.
//!
//! All share `eps = 1`, `gamma = 0.05`, `x0 = (-0.5, -0.5, 0)`, goal at the
//! origin and the TurtleBot3 velocity limits `(0.22 m/s, 2.84 rad/s)`.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use crate::controller::{BoundsMode, Controller, ControllerParams, LoopMode, VelocityBounds};
use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::simulator::SimConfig;

pub const PRESET_EPSILON: f64 = 1.0;
pub const PRESET_GAMMA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentPreset {
    P1,
    P2,
    P3,
    P4,
}

impl ExperimentPreset {
    pub const ALL: [ExperimentPreset; 4] = [Self::P1, Self::P2, Self::P3, Self::P4];

    pub fn alpha(self) -> f64 {
        match self {
            Self::P1 | Self::P2 => 1.0,
            Self::P3 => 4.0,
            Self::P4 => 10.0,
        }
    }

    /// `(k1, k2)`
    pub fn coefficients(self) -> (f64, f64) {
        match self {
            Self::P2 => (1.0 / SQRT_2, 4.0 * SQRT_2),
            _ => (0.5, 8.0),
        }
    }

    pub fn potential(self) -> Potential {
        Potential::v_alpha(self.alpha()).expect("preset alpha >= 1")
    }

    pub fn controller_params(self, loop_mode: LoopMode, bounds: BoundsMode) -> ControllerParams {
        let (k1, k2) = self.coefficients();
        ControllerParams {
            epsilon: PRESET_EPSILON,
            gamma: PRESET_GAMMA,
            k1,
            k2,
            bounds: match bounds {
                BoundsMode::Ideal => VelocityBounds::IDEAL,
                BoundsMode::Clamp => VelocityBounds::TURTLEBOT3,
            },
            loop_mode,
            unchecked: false,
        }
    }

    pub fn sim_config(self, loop_mode: LoopMode, bounds: BoundsMode) -> Result<SimConfig> {
        let ctrl = Controller::new(self.controller_params(loop_mode, bounds))?;
        Ok(SimConfig::new(self.potential(), ctrl))
    }
}

impl fmt::Display for ExperimentPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for ExperimentPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "P1" => Ok(Self::P1),
            "P2" => Ok(Self::P2),
            "P3" => Ok(Self::P3),
            "P4" => Ok(Self::P4),
            _ => Err(Error::param("preset", format!("unknown preset `{s}` (expected P1..P4)"))),
        }
    }
}
