//! JSON run configuration. Every field is optional; precedence is
//! command-line flags, then the config file, then the preset, then defaults.
//! The schema is published in `config.schema.json`.

use std::path::Path;

use serde::Deserialize;

use gradflow_core::controller::{BoundsMode, LoopMode};
use gradflow_core::kinematics::DEFAULT_WHEEL_SEPARATION;
use gradflow_core::{
    Controller, ControllerParams, ExperimentPreset, Potential, PotentialSpec, SimConfig, State,
    VelocityBounds,
};

use crate::error::{CliError, CliResult};

#[cfg(test)]
const SCHEMA: &str = include_str!("../config.schema.json");

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub potential: Option<PotentialSpec>,
    pub epsilon: Option<f64>,
    pub gamma: Option<f64>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub u1_max: Option<f64>,
    pub u2_max: Option<f64>,
    pub bounds_mode: Option<BoundsMode>,
    pub loop_mode: Option<LoopMode>,
    pub unchecked: Option<bool>,
    pub x0: Option<[f64; 3]>,
    pub goal: Option<[f64; 3]>,
    pub goal_tol: Option<f64>,
    pub t_max: Option<f64>,
    pub h: Option<f64>,
    pub control_period: Option<f64>,
    pub log_stride: Option<u64>,
    pub wheel_separation: Option<f64>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($field:ident),*) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field.clone(); } )*
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))
    }

    /// Fields set in `top` replace those in `self`.
    pub fn overlay(mut self, top: &RunConfig) -> Self {
        overlay!(self, top; preset, potential, epsilon, gamma, k1, k2, u1_max, u2_max,
            bounds_mode, loop_mode, unchecked, x0, goal, goal_tol, t_max, h,
            control_period, log_stride, wheel_separation);
        self
    }

    pub fn preset(&self) -> CliResult<Option<ExperimentPreset>> {
        self.preset
            .as_deref()
            .map(|name| name.parse().map_err(|e: gradflow_core::Error| CliError::usage(e.to_string())))
            .transpose()
    }

    pub fn wheel_separation(&self) -> f64 {
        self.wheel_separation.unwrap_or(DEFAULT_WHEEL_SEPARATION)
    }

    pub fn potential(&self) -> CliResult<Potential> {
        match (&self.potential, self.preset()?) {
            (Some(spec), _) => Ok(Potential::from_spec(spec)?),
            (None, Some(p)) => Ok(p.potential()),
            (None, None) => Ok(Potential::sum_of_squares()),
        }
    }

    pub fn controller_params(&self) -> CliResult<ControllerParams> {
        let mode = self.loop_mode.unwrap_or_default();
        let bounds_mode = self.bounds_mode.unwrap_or_default();
        let mut params = match self.preset()? {
            Some(p) => p.controller_params(mode, bounds_mode),
            None => ControllerParams {
                loop_mode: mode,
                ..ControllerParams::default()
            },
        };
        let limits = VelocityBounds::TURTLEBOT3;
        params.bounds = VelocityBounds {
            u1_max: self.u1_max.unwrap_or(limits.u1_max),
            u2_max: self.u2_max.unwrap_or(limits.u2_max),
            mode: bounds_mode,
        };
        if let Some(v) = self.epsilon {
            params.epsilon = v;
        }
        if let Some(v) = self.gamma {
            params.gamma = v;
        }
        if let Some(v) = self.k1 {
            params.k1 = v;
        }
        if let Some(v) = self.k2 {
            params.k2 = v;
        }
        if let Some(v) = self.unchecked {
            params.unchecked = v;
        }
        Ok(params)
    }

    pub fn sim_config(&self) -> CliResult<SimConfig> {
        let controller = Controller::new(self.controller_params()?)?;
        let mut cfg = SimConfig::new(self.potential()?, controller);
        if let Some(v) = self.x0 {
            cfg.x0 = State::from(v);
        }
        if let Some(v) = self.goal {
            cfg.goal = State::from(v);
        }
        if let Some(v) = self.goal_tol {
            cfg.goal_tol = v;
        }
        if let Some(v) = self.t_max {
            cfg.t_max = v;
        }
        if let Some(v) = self.h {
            cfg.h = v;
        }
        if let Some(v) = self.control_period {
            cfg.control_period = v;
        }
        if let Some(v) = self.log_stride {
            cfg.log_stride = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
