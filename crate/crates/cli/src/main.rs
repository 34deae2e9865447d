//! `gradflow` command-line front end.
//!
//! Exit codes: 0 success, 1 property-check failure, 2 usage or config error,
//! 3 runtime or integration error.

mod commands;
mod config;
mod error;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gradflow_core::controller::{BoundsMode, LoopMode};
use gradflow_core::QuadratureMethod;

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "gradflow", version, about = "Oscillatory unicycle stabilization and gradient-flow admissibility")]
struct Cli {
    /// Worker threads for sweeps and quadrature (results do not depend on it).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the closed loop and write the trajectory CSV.
    Simulate(SimulateArgs),
    /// Evaluate the admissibility measure of one or more potentials.
    Admissibility(AdmissibilityArgs),
    /// Compare closed-loop runs against the gradient flow for decreasing epsilon.
    Refine(RefineArgs),
    /// Integrate the reference gradient flow and write it as a trajectory CSV.
    GradientFlow(GradientFlowArgs),
    /// Render a trajectory CSV as a three-panel SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Sampling,
    Continuous,
}

impl From<ModeArg> for LoopMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Sampling => LoopMode::Sampling,
            ModeArg::Continuous => LoopMode::Continuous,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BoundsArg {
    Ideal,
    Clamp,
}

impl From<BoundsArg> for BoundsMode {
    fn from(b: BoundsArg) -> Self {
        match b {
            BoundsArg::Ideal => BoundsMode::Ideal,
            BoundsArg::Clamp => BoundsMode::Clamp,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Midpoint,
    MonteCarlo,
}

impl From<MethodArg> for QuadratureMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Midpoint => QuadratureMethod::Midpoint,
            MethodArg::MonteCarlo => QuadratureMethod::MonteCarlo,
        }
    }
}

/// Potential selection shared by several subcommands.
#[derive(Debug, Args)]
#[group(multiple = false)]
struct PotentialArgs {
    /// V_alpha = alpha (x1^2 + x3^2) + x2^2 / alpha
    #[arg(long, value_name = "ALPHA")]
    v_alpha: Option<f64>,
    /// c1 x1^2 + c2 x2^2 + c3 x3^2
    #[arg(long, value_name = "C1,C2,C3", value_parser = parse_triple, allow_hyphen_values = true)]
    quadratic: Option<[f64; 3]>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Experiment preset P1..P4.
    #[arg(long)]
    preset: Option<String>,
    /// JSON run configuration (see config.schema.json).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    bounds: Option<BoundsArg>,
    #[arg(long, short, default_value = "trajectory.csv")]
    out: PathBuf,
    #[command(flatten)]
    potential: PotentialArgs,
    #[arg(long, allow_negative_numbers = true)]
    epsilon: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    k1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    k2: Option<f64>,
    /// Skip the k1*k2 = 4 check.
    #[arg(long)]
    unchecked: bool,
    #[arg(long)]
    u1_max: Option<f64>,
    #[arg(long)]
    u2_max: Option<f64>,
    #[arg(long, value_name = "X1,X2,X3", value_parser = parse_triple, allow_hyphen_values = true)]
    x0: Option<[f64; 3]>,
    #[arg(long, value_name = "X1,X2,X3", value_parser = parse_triple, allow_hyphen_values = true)]
    goal: Option<[f64; 3]>,
    #[arg(long, allow_negative_numbers = true)]
    goal_tol: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    /// RK4 step in seconds.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    control_period: Option<f64>,
    #[arg(long)]
    log_stride: Option<u64>,
    /// Wheel separation for the reported wheel speeds (m).
    #[arg(long)]
    wheel_separation: Option<f64>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("target").required(true).args(["table1", "v_alpha", "quadratic", "config"])))]
struct AdmissibilityArgs {
    /// Reproduce the seven quadratic forms of the reference table on [-1,1]^3.
    #[arg(long)]
    table1: bool,
    #[arg(long, value_name = "A1,A2,...", value_delimiter = ',', allow_negative_numbers = true)]
    v_alpha: Option<Vec<f64>>,
    #[arg(long, value_name = "C1,C2,C3", value_parser = parse_triple, allow_hyphen_values = true)]
    quadratic: Option<[f64; 3]>,
    /// JSON file with a `potential` entry.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true, default_value = "-1,-1,-1")]
    lo: [f64; 3],
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true, default_value = "1,1,1")]
    hi: [f64; 3],
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    q: f64,
    #[arg(long, value_enum, default_value = "midpoint")]
    method: MethodArg,
    #[arg(long, default_value_t = gradflow_core::admissibility::DEFAULT_GRID_N)]
    grid_n: u32,
    #[arg(long, default_value_t = gradflow_core::admissibility::DEFAULT_SAMPLES)]
    samples: u64,
    #[arg(long, env = "GRADFLOW_SEED", default_value_t = gradflow_core::admissibility::DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = gradflow_core::admissibility::DEFAULT_GRAD_FLOOR)]
    grad_floor: f64,
    /// Write the sweep CSV here instead of standard output.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RefineArgs {
    #[command(flatten)]
    potential: PotentialArgs,
    /// Descending list of sampling periods.
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    eps: Vec<f64>,
    #[arg(long, value_enum, default_value = "sampling")]
    mode: ModeArg,
    #[arg(long, default_value_t = 2.0)]
    t_max: f64,
    #[arg(long, default_value_t = 0.05)]
    gamma: f64,
    #[arg(long, default_value_t = 0.5)]
    k1: f64,
    #[arg(long, default_value_t = 8.0)]
    k2: f64,
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true, default_value = "-0.5,-0.5,0")]
    x0: [f64; 3],
    #[arg(long, default_value_t = gradflow_core::simulator::DEFAULT_CONTROL_PERIOD)]
    control_period: f64,
    #[arg(long, default_value_t = gradflow_core::simulator::DEFAULT_STEP)]
    h: f64,
    /// RK4 step of the reference flow.
    #[arg(long, default_value_t = 1e-3)]
    reference_h: f64,
}

#[derive(Debug, Args)]
struct GradientFlowArgs {
    #[command(flatten)]
    potential: PotentialArgs,
    /// Multiply V by this factor (the closed loop follows the flow of gamma V).
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true, default_value = "-0.5,-0.5,0")]
    x0: [f64; 3],
    #[arg(long, default_value_t = 10.0)]
    t_max: f64,
    #[arg(long, default_value_t = 1e-3)]
    h: f64,
    #[arg(long, short, default_value = "gradient_flow.csv")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PlotArgs {
    /// Trajectory CSV written by `simulate` or `gradient-flow`.
    csv: PathBuf,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

/// Parses `a,b,c` into three numbers.
fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated numbers, got `{s}`"));
    }
    let mut out = [0.0; 3];
    for (slot, p) in out.iter_mut().zip(parts) {
        *slot = p.parse().map_err(|_| format!("`{p}` is not a number"))?;
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("global thread pool is configured once");
    }
    let result: Result<(), CliError> = match cli.command {
        Command::Simulate(args) => commands::simulate(args),
        Command::Admissibility(args) => commands::admissibility(args),
        Command::Refine(args) => commands::refine(args),
        Command::GradientFlow(args) => commands::gradient_flow(args),
        Command::Plot(args) => commands::plot(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
