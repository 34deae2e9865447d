use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde_json::json;

use gradflow_core::admissibility::TABLE1_COEFFICIENTS;
use gradflow_core::kinematics::unicycle_to_diff_drive;
use gradflow_core::trajectory::format_significant;
use gradflow_core::{
    admissibility_measure, integrate_gradient_flow, simulate as run_closed_loop, tracking_deviation,
    AdmissibilityConfig, BoxDomain, Controller, ControllerParams, Error as CoreError, LoopMode,
    Potential, PotentialSpec, SimConfig, State, Termination, Trajectory,
};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::{AdmissibilityArgs, GradientFlowArgs, PlotArgs, PotentialArgs, RefineArgs, SimulateArgs};

const SWEEP_HEADER: [&str; 9] = ["c1", "c2", "c3", "q", "method", "points", "J", "stderr", "excluded"];

impl PotentialArgs {
    fn spec(&self) -> Option<PotentialSpec> {
        match (self.v_alpha, &self.quadratic) {
            (Some(alpha), _) => Some(PotentialSpec::VAlpha { alpha }),
            (None, Some(c)) => Some(PotentialSpec::Quadratic { c: *c }),
            (None, None) => None,
        }
    }

    fn potential(&self) -> CliResult<Potential> {
        match self.spec() {
            Some(spec) => Ok(Potential::from_spec(&spec)?),
            None => Ok(Potential::sum_of_squares()),
        }
    }
}

fn num(v: f64) -> String {
    format_significant(v, 9)
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))
}

fn write_trajectory(traj: &Trajectory, path: &Path) -> CliResult<()> {
    let mut out = create(path)?;
    traj.write_csv(&mut out)?;
    out.flush().map_err(|e| CliError::Runtime(e.to_string()))
}

/// Summary on standard output; a closed pipe is not an error.
fn print_json(value: &serde_json::Value) {
    let text = serde_json::to_string_pretty(value).expect("json values serialize");
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

pub fn simulate(args: SimulateArgs) -> CliResult<()> {
    let file = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let flags = RunConfig {
        preset: args.preset.clone(),
        potential: args.potential.spec(),
        epsilon: args.epsilon,
        gamma: args.gamma,
        k1: args.k1,
        k2: args.k2,
        u1_max: args.u1_max,
        u2_max: args.u2_max,
        bounds_mode: args.bounds.map(Into::into),
        loop_mode: args.mode.map(Into::into),
        unchecked: args.unchecked.then_some(true),
        x0: args.x0,
        goal: args.goal,
        goal_tol: args.goal_tol,
        t_max: args.t_max,
        h: args.h,
        control_period: args.control_period,
        log_stride: args.log_stride,
        wheel_separation: args.wheel_separation,
    };
    let merged = file.overlay(&flags);
    let cfg = merged.sim_config()?;
    let d = merged.wheel_separation();
    unicycle_to_diff_drive(gradflow_core::Control::ZERO, d)?;

    let traj = match run_closed_loop(&cfg) {
        Ok(t) => t,
        Err(CoreError::NonFinite { t, partial }) => {
            write_trajectory(&partial, &args.out)?;
            return Err(CliError::Runtime(format!(
                "state became non-finite at t = {t}; partial trajectory written to {}",
                args.out.display()
            )));
        }
        Err(e) => return Err(e.into()),
    };
    write_trajectory(&traj, &args.out)?;

    // Wheel speeds are linear in (u1, u2), so the extremes over the log bound them.
    let max_wheel = traj
        .rows
        .iter()
        .map(|r| {
            let w = unicycle_to_diff_drive(r.control, d).expect("separation validated");
            w.v_l.abs().max(w.v_r.abs())
        })
        .fold(0.0, f64::max);
    let last = traj.last().expect("at least one row");
    let params = cfg.controller.params();
    print_json(&json!({
        "preset": merged.preset,
        "loop_mode": params.loop_mode,
        "bounds_mode": params.bounds.mode,
        "epsilon": params.epsilon,
        "gamma": params.gamma,
        "k1": params.k1,
        "k2": params.k2,
        "termination": match traj.termination {
            Termination::GoalReached => "goal_reached",
            Termination::HorizonExhausted => "horizon_exhausted",
        },
        "convergence_time": traj.convergence_time,
        "final_state": last.state.to_array(),
        "final_heading_wrapped": last.state.wrapped_heading(),
        "final_distance": last.state.distance(&cfg.goal),
        "max_abs_u1": traj.max_abs_u1,
        "max_abs_u2": traj.max_abs_u2,
        "max_abs_wheel_speed_logged": max_wheel,
        "saturation_count": traj.saturation_count,
        "control_updates": traj.control_updates,
        "rows": traj.rows.len(),
        "out": args.out,
    }));
    Ok(())
}

pub fn admissibility(args: AdmissibilityArgs) -> CliResult<()> {
    let cfg = AdmissibilityConfig {
        q: args.q,
        method: args.method.into(),
        grid_n: args.grid_n,
        samples: args.samples,
        seed: args.seed,
        grad_floor: args.grad_floor,
    };
    cfg.validate()?;
    let domain = BoxDomain::new(args.lo, args.hi)?;

    let mut targets: Vec<Potential> = Vec::new();
    if args.table1 {
        for c in TABLE1_COEFFICIENTS {
            targets.push(Potential::quadratic(c[0], c[1], c[2])?);
        }
    }
    for &alpha in args.v_alpha.iter().flatten() {
        targets.push(Potential::v_alpha(alpha)?);
    }
    if let Some(c) = &args.quadratic {
        targets.push(Potential::quadratic(c[0], c[1], c[2])?);
    }
    if let Some(path) = &args.config {
        let spec = RunConfig::load(path)?
            .potential
            .ok_or_else(|| CliError::usage(format!("{} has no `potential` entry", path.display())))?;
        targets.push(Potential::from_spec(&spec)?);
    }
    if targets.is_empty() {
        return Err(CliError::usage("no potential selected"));
    }

    let mut records = Vec::with_capacity(targets.len());
    for v in &targets {
        let report = admissibility_measure(v, &domain, &cfg)?;
        let c = v.coefficients().expect("cli potentials are quadratic");
        records.push((c, report));
    }

    let sink: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(create(path)?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink);
    let io = |e: csv::Error| CliError::Runtime(e.to_string());
    w.write_record(SWEEP_HEADER).map_err(io)?;
    for (c, r) in &records {
        w.write_record([
            num(c[0]),
            num(c[1]),
            num(c[2]),
            num(cfg.q),
            cfg.method.name().to_string(),
            r.points.to_string(),
            num(r.value),
            r.stderr.map(num).unwrap_or_default(),
            r.excluded.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Runtime(e.to_string()))?;
    drop(w);

    if let Some(path) = &args.out {
        print_json(&json!({
            "out": path,
            "method": cfg.method.name(),
            "q": cfg.q,
            "rows": records.iter().map(|(c, r)| json!({
                "c": c, "J": r.value, "stderr": r.stderr, "points": r.points, "excluded": r.excluded,
            })).collect::<Vec<_>>(),
        }));
    }
    Ok(())
}

pub fn refine(args: RefineArgs) -> CliResult<()> {
    if args.eps.is_empty() {
        return Err(CliError::usage("--eps needs at least one value"));
    }
    if !args.eps.windows(2).all(|w| w[0] > w[1]) {
        return Err(CliError::usage("--eps must be strictly descending"));
    }
    let potential = args.potential.potential()?;
    let x0 = State::from(args.x0);
    let mode: LoopMode = args.mode.into();

    let build = |eps: f64| -> CliResult<SimConfig> {
        let ctrl = Controller::new(ControllerParams {
            epsilon: eps,
            gamma: args.gamma,
            k1: args.k1,
            k2: args.k2,
            loop_mode: mode,
            ..ControllerParams::default()
        })?;
        let mut cfg = SimConfig::new(potential.clone(), ctrl);
        cfg.x0 = x0;
        cfg.t_max = args.t_max;
        cfg.goal_tol = 0.0;
        cfg.h = args.h;
        cfg.control_period = args.control_period;
        cfg.log_stride = 1;
        cfg.validate()?;
        Ok(cfg)
    };
    let configs = args.eps.iter().map(|&e| build(e)).collect::<CliResult<Vec<_>>>()?;
    let reference = integrate_gradient_flow(&potential.scaled(args.gamma)?, x0, args.t_max, args.reference_h)
        .map_err(CliError::from)?;
    let deviations = configs
        .par_iter()
        .map(|cfg| {
            let closed = run_closed_loop(cfg)?;
            tracking_deviation(&closed, &reference)
        })
        .collect::<Result<Vec<f64>, CoreError>>()
        .map_err(|e| match e {
            CoreError::NonFinite { .. } => CliError::Runtime(e.to_string()),
            other => CliError::from(other),
        })?;

    let non_increasing = deviations.windows(2).all(|w| w[1] <= w[0]);
    print_json(&json!({
        "mode": mode,
        "gamma": args.gamma,
        "t_max": args.t_max,
        "rows": args.eps.iter().zip(&deviations)
            .map(|(e, d)| json!({"epsilon": e, "deviation": d}))
            .collect::<Vec<_>>(),
        "non_increasing": non_increasing,
    }));
    if non_increasing {
        Ok(())
    } else {
        Err(CliError::Check(format!("deviations are not non-increasing: {deviations:?}")))
    }
}

pub fn gradient_flow(args: GradientFlowArgs) -> CliResult<()> {
    let v = args.potential.potential()?.scaled(args.scale)?;
    let traj = match integrate_gradient_flow(&v, State::from(args.x0), args.t_max, args.h) {
        Ok(t) => t,
        Err(CoreError::NonFinite { t, partial }) => {
            write_trajectory(&partial, &args.out)?;
            return Err(CliError::Runtime(format!("gradient flow diverged at t = {t}")));
        }
        Err(e) => return Err(e.into()),
    };
    write_trajectory(&traj, &args.out)?;
    let last = traj.last().expect("initial row");
    print_json(&json!({
        "final_state": last.state.to_array(),
        "final_value": last.potential,
        "rows": traj.rows.len(),
        "out": args.out,
    }));
    Ok(())
}

pub fn plot(args: PlotArgs) -> CliResult<()> {
    let file = File::open(&args.csv)
        .map_err(|e| CliError::usage(format!("cannot open {}: {e}", args.csv.display())))?;
    let rows = Trajectory::read_csv(std::io::BufReader::new(file))
        .map_err(|e| CliError::usage(format!("{}: {e}", args.csv.display())))?;
    let out = args.out.unwrap_or_else(|| args.csv.with_extension("svg"));
    let mut w = create(&out)?;
    w.write_all(crate::svg::render(&rows).as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    print_json(&json!({ "rows": rows.len(), "panels": 3, "out": out }));
    Ok(())
}
