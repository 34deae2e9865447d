//! Closed-loop integration of the unicycle under the oscillating feedback.
//!
//! The command is a zero-order hold refreshed every `control_period`; each
//! hold interval is integrated with `control_period / h` classical RK4 steps.
//! In [`LoopMode::Sampling`] the amplitude vector is taken from the state at
//! `t_j = j * eps` only and frozen until the next sampling instant, while the
//! `cos(wt)`/`sin(wt)` factors keep evolving with the global time. In
//! [`LoopMode::Continuous`] the amplitudes follow the state at every update.

use crate::controller::{Controller, LoopMode};
use crate::error::{Error, Result};
use crate::kinematics::{velocity, Control, State, Vec3};
use crate::potential::{amplitude_vector, AmplitudeVector, Potential};
use crate::trajectory::{Termination, Trajectory, TrajectoryRow};

/// Stopping radius around the goal (full-state norm).
pub const DEFAULT_GOAL_TOL: f64 = 0.05;
/// Command period of the hardware loop, 0.5 ms.
pub const DEFAULT_CONTROL_PERIOD: f64 = 5e-4;
pub const DEFAULT_STEP: f64 = 5e-4;
pub const DEFAULT_T_MAX: f64 = 600.0;
/// Log every 20th control update (10 ms at the default period).
pub const DEFAULT_LOG_STRIDE: u64 = 20;
pub const DEFAULT_X0: State = State::new(-0.5, -0.5, 0.0);

const DIVISIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub potential: Potential,
    pub controller: Controller,
    pub x0: State,
    pub goal: State,
    pub goal_tol: f64,
    pub t_max: f64,
    /// RK4 step.
    pub h: f64,
    /// Zero-order-hold interval of the command.
    pub control_period: f64,
    /// Log every `log_stride`-th control update; the first and last rows are always kept.
    pub log_stride: u64,
}

impl SimConfig {
    pub fn new(potential: Potential, controller: Controller) -> Self {
        SimConfig {
            potential,
            controller,
            x0: DEFAULT_X0,
            goal: State::ORIGIN,
            goal_tol: DEFAULT_GOAL_TOL,
            t_max: DEFAULT_T_MAX,
            h: DEFAULT_STEP,
            control_period: DEFAULT_CONTROL_PERIOD,
            log_stride: DEFAULT_LOG_STRIDE,
        }
    }

    /// Checks the step hierarchy `0 < h <= control_period <= eps` and
    /// returns `(rk4 steps per hold, holds per sampling period)`.
    pub fn validate(&self) -> Result<(u64, u64)> {
        if !self.x0.is_finite() || !self.goal.is_finite() {
            return Err(Error::param("x0", "initial and goal states must be finite"));
        }
        if !(self.goal_tol >= 0.0) {
            return Err(Error::param("goal_tol", format!("must be nonnegative, got {}", self.goal_tol)));
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return Err(Error::param("t_max", format!("must be nonnegative, got {}", self.t_max)));
        }
        if !(self.h > 0.0) {
            return Err(Error::param("h", format!("must be positive, got {}", self.h)));
        }
        if self.log_stride == 0 {
            return Err(Error::param("log_stride", "must be at least 1"));
        }
        let eps = self.controller.epsilon();
        if !(self.h <= self.control_period && self.control_period <= eps) {
            return Err(Error::param(
                "control_period",
                format!(
                    "need h <= control_period <= epsilon, got h = {}, control_period = {}, epsilon = {eps}",
                    self.h, self.control_period
                ),
            ));
        }
        let steps = whole_ratio(self.control_period, self.h)
            .ok_or_else(|| Error::param("h", "must divide control_period"))?;
        let holds = whole_ratio(eps, self.control_period)
            .ok_or_else(|| Error::param("control_period", "must divide epsilon"))?;
        Ok((steps, holds))
    }
}

fn whole_ratio(num: f64, den: f64) -> Option<u64> {
    let r = num / den;
    let n = r.round();
    ((r - n).abs() <= DIVISIBILITY_TOL * n.max(1.0) && n >= 1.0).then_some(n as u64)
}

/// `|x - goal| <= tol` in the full three-component norm.
pub fn goal_reached(x: &State, goal: &State, tol: f64) -> bool {
    x.distance(goal) <= tol
}

fn rk4_step(x: Vec3, h: f64, f: impl Fn(Vec3) -> Vec3) -> Vec3 {
    let axpy = |a: Vec3, s: f64, b: Vec3| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]];
    let k1 = f(x);
    let k2 = f(axpy(x, h / 2.0, k1));
    let k3 = f(axpy(x, h / 2.0, k2));
    let k4 = f(axpy(x, h, k3));
    [0, 1, 2].map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

struct Log<'a> {
    traj: Trajectory,
    potential: &'a Potential,
}

impl Log<'_> {
    fn push(&mut self, t: f64, state: State, control: Control, amplitude: AmplitudeVector, saturated: bool) {
        self.traj.rows.push(TrajectoryRow {
            t,
            state,
            control,
            amplitude,
            potential: self.potential.value(&state),
            saturated,
        });
    }
}

/// Runs the closed loop until the goal test succeeds at a control update or
/// `t_max` is reached.
pub fn simulate(cfg: &SimConfig) -> Result<Trajectory> {
    let (steps_per_hold, holds_per_period) = cfg.validate()?;
    let ctrl = &cfg.controller;
    let gamma = ctrl.gamma();
    let h = cfg.control_period / steps_per_hold as f64;
    let last_update = (cfg.t_max / cfg.control_period - DIVISIBILITY_TOL).ceil().max(0.0) as u64;

    let mut log = Log {
        traj: Trajectory::empty(),
        potential: &cfg.potential,
    };
    let mut x = cfg.x0;
    let mut a = AmplitudeVector::ZERO;
    let mut update: u64 = 0;
    loop {
        let t = update as f64 * cfg.control_period;
        let refresh = match ctrl.loop_mode() {
            LoopMode::Continuous => true,
            LoopMode::Sampling => update.is_multiple_of(holds_per_period),
        };
        if refresh {
            a = amplitude_vector(&cfg.potential, gamma, &x);
        }
        if goal_reached(&x, &cfg.goal, cfg.goal_tol) {
            // the robot stops at the goal
            log.push(t, x, Control::ZERO, a, false);
            log.traj.termination = Termination::GoalReached;
            log.traj.convergence_time = Some(t);
            break;
        }
        let (u, saturated) = ctrl.control_value(&a, t);
        if update >= last_update {
            log.push(t, x, u, a, saturated);
            log.traj.termination = Termination::HorizonExhausted;
            break;
        }
        let stats = &mut log.traj;
        stats.control_updates += 1;
        stats.saturation_count += u64::from(saturated);
        stats.max_abs_u1 = stats.max_abs_u1.max(u.u1.abs());
        stats.max_abs_u2 = stats.max_abs_u2.max(u.u2.abs());
        if update.is_multiple_of(cfg.log_stride) {
            log.push(t, x, u, a, saturated);
        }

        let mut y = x.to_array();
        for _ in 0..steps_per_hold {
            y = rk4_step(y, h, |v| velocity(&State::from(v), u));
        }
        let next = State::from(y);
        update += 1;
        if !next.is_finite() {
            let t_fail = update as f64 * cfg.control_period;
            if log.traj.rows.last().map(|r| r.t) != Some(t) {
                log.push(t, x, u, a, saturated);
            }
            return Err(Error::NonFinite {
                t: t_fail,
                partial: Box::new(log.traj),
            });
        }
        x = next;
    }
    Ok(log.traj)
}

/// Integrates the reference flow `x' = -grad V(x)` with fixed-step RK4,
/// logging every step. Control and amplitude columns are zero.
pub fn integrate_gradient_flow(v: &Potential, x0: State, t_max: f64, h: f64) -> Result<Trajectory> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::param("h", format!("must be positive, got {h}")));
    }
    if !(t_max >= 0.0 && t_max.is_finite()) {
        return Err(Error::param("t_max", format!("must be nonnegative, got {t_max}")));
    }
    if !x0.is_finite() {
        return Err(Error::param("x0", "must be finite"));
    }
    let steps = (t_max / h - DIVISIBILITY_TOL).ceil().max(0.0) as u64;
    let mut log = Log {
        traj: Trajectory::empty(),
        potential: v,
    };
    let mut x = x0;
    log.push(0.0, x, Control::ZERO, AmplitudeVector::ZERO, false);
    let flow = |y: Vec3| v.gradient(&State::from(y)).map(|g| -g);
    for k in 1..=steps {
        let t_prev = (k - 1) as f64 * h;
        let t = if k == steps { t_max } else { k as f64 * h };
        let next = State::from(rk4_step(x.to_array(), t - t_prev, flow));
        if !next.is_finite() {
            return Err(Error::NonFinite {
                t,
                partial: Box::new(log.traj),
            });
        }
        x = next;
        log.push(t, x, Control::ZERO, AmplitudeVector::ZERO, false);
    }
    Ok(log.traj)
}

/// Largest state-space distance between two trajectories over their common
/// time range, evaluated on the union of both time grids with linear
/// interpolation.
pub fn tracking_deviation(closed_loop: &Trajectory, reference: &Trajectory) -> Result<f64> {
    let (a0, a1) = time_range(closed_loop)?;
    let (b0, b1) = time_range(reference)?;
    let (lo, hi) = (a0.max(b0), a1.min(b1));
    if lo > hi {
        return Err(Error::DisjointTimeRanges);
    }
    let times = closed_loop
        .rows
        .iter()
        .chain(&reference.rows)
        .map(|r| r.t)
        .filter(|t| (lo..=hi).contains(t));
    let mut worst: f64 = 0.0;
    for t in times {
        let (Some(x), Some(y)) = (closed_loop.state_at(t), reference.state_at(t)) else {
            continue;
        };
        worst = worst.max(x.distance(&y));
    }
    Ok(worst)
}

fn time_range(t: &Trajectory) -> Result<(f64, f64)> {
    match (t.rows.first(), t.rows.last()) {
        (Some(a), Some(b)) => Ok((a.t, b.t)),
        _ => Err(Error::DisjointTimeRanges),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::{BoundsMode, ControllerParams, VelocityBounds};

    fn controller(eps: f64, mode: LoopMode) -> Controller {
        Controller::new(ControllerParams {
            epsilon: eps,
            loop_mode: mode,
            ..ControllerParams::default()
        })
        .unwrap()
    }

    fn short_cfg(mode: LoopMode) -> SimConfig {
        let mut cfg = SimConfig::new(Potential::sum_of_squares(), controller(1.0, mode));
        cfg.t_max = 3.0;
        cfg.h = 0.005;
        cfg.control_period = 0.01;
        cfg.log_stride = 1;
        cfg
    }

    #[test]
    fn goal_test_examples() {
        assert!(goal_reached(&State::ORIGIN, &State::ORIGIN, 0.0));
        assert!(goal_reached(&State::new(0.03, 0.04, 0.0), &State::ORIGIN, 0.05));
        assert!(!goal_reached(&State::new(0.06, 0.0, 0.0), &State::ORIGIN, 0.05));
    }

    #[test]
    fn starting_at_goal_terminates_immediately() {
        let mut cfg = short_cfg(LoopMode::Continuous);
        cfg.x0 = cfg.goal;
        let traj = simulate(&cfg).unwrap();
        assert_eq!(traj.rows.len(), 1);
        assert_eq!(traj.termination, Termination::GoalReached);
        assert_eq!(traj.convergence_time, Some(0.0));
    }

    #[test]
    fn constant_potential_leaves_state_fixed() {
        let flat = Potential::custom(|_: &State| 1.0, |_: &State| [0.0; 3]).unwrap();
        let mut cfg = short_cfg(LoopMode::Continuous);
        cfg.potential = flat;
        let traj = simulate(&cfg).unwrap();
        assert_eq!(traj.termination, Termination::HorizonExhausted);
        assert!(traj.rows.iter().all(|r| r.state == cfg.x0));
        assert!((traj.last().unwrap().t - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rows_are_consistent() {
        for mode in [LoopMode::Sampling, LoopMode::Continuous] {
            let cfg = short_cfg(mode);
            let traj = simulate(&cfg).unwrap();
            assert_eq!(traj.rows[0].t, 0.0);
            assert_eq!(traj.rows[0].state, cfg.x0);
            assert!(traj.rows.windows(2).all(|w| w[0].t < w[1].t));
            for r in &traj.rows {
                assert!((r.potential - cfg.potential.value(&r.state)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn sampling_mode_freezes_amplitudes() {
        let traj = simulate(&short_cfg(LoopMode::Sampling)).unwrap();
        for j in 0..3 {
            let lo = j as f64;
            let block: Vec<_> = traj
                .rows
                .iter()
                .filter(|r| r.t >= lo - 1e-12 && r.t < lo + 1.0 - 1e-9)
                .collect();
            assert!(block.len() > 50);
            assert!(block.iter().all(|r| r.amplitude == block[0].amplitude));
        }
        let cont = simulate(&short_cfg(LoopMode::Continuous)).unwrap();
        assert_ne!(cont.rows[1].amplitude, cont.rows[0].amplitude);
    }

    #[test]
    fn deterministic() {
        let cfg = short_cfg(LoopMode::Continuous);
        assert_eq!(simulate(&cfg).unwrap(), simulate(&cfg).unwrap());
    }

    #[test]
    fn clamped_run_respects_bounds() {
        let mut cfg = short_cfg(LoopMode::Continuous);
        cfg.controller = Controller::new(ControllerParams {
            bounds: VelocityBounds::TURTLEBOT3,
            loop_mode: LoopMode::Continuous,
            ..ControllerParams::default()
        })
        .unwrap();
        assert_eq!(cfg.controller.params().bounds.mode, BoundsMode::Clamp);
        let traj = simulate(&cfg).unwrap();
        assert!(traj.max_abs_u1 <= 0.22 && traj.max_abs_u2 <= 2.84);
        assert!(traj.saturation_count > 0);
    }

    #[test]
    fn rejects_incompatible_steps() {
        let mut cfg = short_cfg(LoopMode::Sampling);
        cfg.h = 0.003;
        assert!(simulate(&cfg).is_err());
        let mut cfg = short_cfg(LoopMode::Sampling);
        cfg.control_period = 0.3;
        cfg.h = 0.3;
        assert!(simulate(&cfg).is_err());
        let mut cfg = short_cfg(LoopMode::Sampling);
        cfg.control_period = 2.0;
        assert!(simulate(&cfg).is_err());
    }

    #[test]
    fn non_finite_state_reports_partial_log() {
        // x1' = 4 x1^3 escapes to infinity at t = 1/8 from x1 = 1
        let v = Potential::custom(|x: &State| -x.x1.powi(4), |x: &State| [-4.0 * x.x1.powi(3), 0.0, 0.0])
            .unwrap();
        match integrate_gradient_flow(&v, State::new(1.0, 0.0, 0.0), 1.0, 0.1) {
            Err(Error::NonFinite { partial, .. }) => assert!(!partial.rows.is_empty()),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn gradient_flow_closed_forms() {
        let x0 = State::new(-0.5, -0.5, 0.0);
        let traj = integrate_gradient_flow(&Potential::sum_of_squares(), x0, 1.0, 1e-3).unwrap();
        let end = traj.final_state().unwrap();
        let expect = -0.5 * (-2.0f64).exp();
        assert!((end.x1 - expect).abs() < 1e-6 && (end.x2 - expect).abs() < 1e-6);
        assert!((traj.last().unwrap().t - 1.0).abs() < 1e-12);

        let traj = integrate_gradient_flow(&Potential::sum_of_squares(), State::ORIGIN, 1.0, 1e-2).unwrap();
        assert!(traj.rows.iter().all(|r| r.state == State::ORIGIN));

        let v4 = Potential::v_alpha(4.0).unwrap();
        let traj = integrate_gradient_flow(&v4, State::new(1.0, 1.0, 1.0), 0.5, 1e-3).unwrap();
        let end = traj.final_state().unwrap();
        assert!((end.x1 - (-4.0f64).exp()).abs() < 1e-8);
        assert!((end.x2 - (-0.25f64).exp()).abs() < 1e-8);
        assert!((end.x3 - (-4.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn uneven_horizon_ends_exactly() {
        let traj = integrate_gradient_flow(&Potential::sum_of_squares(), DEFAULT_X0, 0.25, 0.1).unwrap();
        let times: Vec<f64> = traj.rows.iter().map(|r| r.t).collect();
        assert_eq!(times.len(), 4);
        assert_eq!(*times.last().unwrap(), 0.25);
    }

    fn constant(states: &[(f64, State)]) -> Trajectory {
        let mut t = Trajectory::empty();
        for (time, s) in states {
            t.rows.push(TrajectoryRow {
                t: *time,
                state: *s,
                control: Control::ZERO,
                amplitude: AmplitudeVector::ZERO,
                potential: 0.0,
                saturated: false,
            });
        }
        t
    }

    #[test]
    fn deviation_examples() {
        let traj = simulate(&short_cfg(LoopMode::Sampling)).unwrap();
        assert_eq!(tracking_deviation(&traj, &traj).unwrap(), 0.0);
        let a = constant(&[(0.0, State::ORIGIN), (2.0, State::ORIGIN)]);
        let b = constant(&[(0.0, State::new(0.0, 1.0, 0.0)), (1.5, State::new(0.0, 1.0, 0.0))]);
        assert_eq!(tracking_deviation(&a, &b).unwrap(), 1.0);
        let late = constant(&[(3.0, State::ORIGIN), (4.0, State::ORIGIN)]);
        assert!(matches!(tracking_deviation(&a, &late), Err(Error::DisjointTimeRanges)));
    }

    #[test]
    fn deviation_shrinks_with_epsilon() {
        let run = |eps: f64| {
            let mut cfg = SimConfig::new(Potential::sum_of_squares(), controller(eps, LoopMode::Sampling));
            cfg.t_max = 2.0;
            cfg.goal_tol = 0.0;
            cfg.log_stride = 1;
            cfg.h = 5e-4;
            cfg.control_period = 5e-4;
            let closed = simulate(&cfg).unwrap();
            let reference = integrate_gradient_flow(
                &Potential::sum_of_squares().scaled(0.05).unwrap(),
                cfg.x0,
                2.0,
                1e-3,
            )
            .unwrap();
            tracking_deviation(&closed, &reference).unwrap()
        };
        assert!(run(0.02) < run(0.5));
    }

    /// Holds are step-aligned, so the vector field is smooth inside every RK4
    /// step and the global error should fall by roughly 2^4 per halving.
    #[test]
    fn rk4_is_fourth_order_on_held_segments() {
        let run = |h: f64| {
            let mut cfg = SimConfig::new(Potential::sum_of_squares(), controller(1.0, LoopMode::Continuous));
            cfg.t_max = 2.0;
            cfg.goal_tol = 0.0;
            cfg.control_period = 0.1;
            cfg.h = h;
            simulate(&cfg).unwrap().final_state().unwrap()
        };
        let reference = run(0.1 / 512.0);
        let e1 = run(0.1 / 2.0).distance(&reference);
        let e2 = run(0.1 / 4.0).distance(&reference);
        assert!(e1 > 0.0 && e2 > 0.0);
        assert!(e1 / e2 >= 12.0, "ratio {}", e1 / e2);
    }
}
