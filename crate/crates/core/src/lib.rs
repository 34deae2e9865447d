//! Oscillatory time-varying feedback for the kinematic unicycle.
//!
//! The crate is organised bottom-up:
//!
//! * [`kinematics`] holds the vector fields of the unicycle, the frame matrix
//!   built from them and their Lie bracket, and the differential-drive mapping.
//! * [`potential`] provides Lyapunov function candidates and the control
//!   amplitude vector derived from their gradients.
//! * [`controller`] evaluates the oscillating feedback law and applies
//!   actuator limits.
//! * [`simulator`] integrates the closed loop under the sampling and
//!   continuous-time semantics, and integrates the reference gradient flow.
//! * [`admissibility`] computes how well a gradient flow can be followed by
//!   the unicycle over a box of states.
//! * [`presets`] bundles the four experiment parameter sets.

// `!(x > 0.0)` style checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admissibility;
pub mod controller;
pub mod error;
pub mod kinematics;
pub mod potential;
pub mod presets;
pub mod simulator;
pub mod trajectory;

pub use admissibility::{
    admissibility_measure, rho, rho_bruteforce, table1, AdmissibilityConfig, AdmissibilityReport,
    BoxDomain, QuadratureMethod, TABLE1_COEFFICIENTS,
};
pub use controller::{clamp, BoundsMode, Controller, ControllerParams, LoopMode, VelocityBounds};
pub use error::{Error, Result};
pub use kinematics::{Control, State, WheelSpeeds};
pub use potential::{AmplitudeVector, Potential, PotentialKind, PotentialSpec};
pub use presets::ExperimentPreset;
pub use simulator::{
    goal_reached, integrate_gradient_flow, simulate, tracking_deviation, SimConfig,
};
pub use trajectory::{Termination, Trajectory, TrajectoryRow, TRAJECTORY_HEADER};
