use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use geostretch::cli::{self, CliError};
use geostretch::config::{Command, RunConfig};

#[derive(Parser)]
#[command(name = "geostretch", version, about = "Slow invariant manifolds by geodesic stretching and flow curvature")]
struct Cli {
    #[command(subcommand)]
    command: Group,
}

#[derive(Subcommand)]
enum Group {
    /// Metric tensor of the f-manifold
    Metric {
        #[command(subcommand)]
        action: EvalAction,
    },
    /// Christoffel symbols, Riemann tensor and f-deviation
    Curvature {
        #[command(subcommand)]
        action: EvalAction,
    },
    /// Tangential and orthogonal stretching rates along a slice
    Stretch {
        #[command(subcommand)]
        action: SliceAction,
    },
    /// Locate a SIM approximation over a grid of slow values
    Sim {
        #[command(subcommand)]
        action: SweepAction,
    },
    /// Zero set of the flow curvature determinant along a slice
    Fcm {
        #[command(subcommand)]
        action: SliceAction,
    },
    /// Integrate a trajectory and check the geodesic equation along it
    Geodesic {
        #[command(subcommand)]
        action: VerifyAction,
    },
    /// Run a reproduction suite: paper-figures or invariants
    Reproduce {
        suite: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand)]
enum EvalAction {
    Eval(Common),
}

#[derive(Subcommand)]
enum SliceAction {
    Slice(Common),
}

#[derive(Subcommand)]
enum SweepAction {
    Sweep(Common),
}

#[derive(Subcommand)]
enum VerifyAction {
    Verify(Common),
}

#[derive(Args, Default)]
struct Common {
    /// Read settings from a `key = value` config file; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model id: linear, davis-skodje, michaelis-menten, chiavazzo, constant
    #[arg(long)]
    model: Option<String>,
    /// Parameter override `name=value` (repeatable)
    #[arg(long = "param", value_name = "NAME=VALUE")]
    params: Vec<String>,
    /// State point, comma separated
    #[arg(long, allow_hyphen_values = true)]
    point: Option<String>,
    /// Explicit time coordinate of the point
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<String>,
    /// Fixed coordinate `name=value` (repeatable)
    #[arg(long, value_name = "NAME=VALUE", allow_hyphen_values = true)]
    fix: Vec<String>,
    /// Searched coordinate `name=lower:upper[:count|step]`
    #[arg(long, allow_hyphen_values = true)]
    search: Option<String>,
    /// Slow coordinate grid `name=lower:upper[:count|step]`
    #[arg(long, allow_hyphen_values = true)]
    slow: Option<String>,
    /// tan-min, orth-max or ratio-max
    #[arg(long)]
    objective: Option<String>,
    /// Coarse grid size of the slice search
    #[arg(long)]
    grid: Option<String>,
    /// Tolerance of the refinement or the integrator
    #[arg(long)]
    tol: Option<String>,
    /// Initial state for trajectory integration, comma separated
    #[arg(long, allow_hyphen_values = true)]
    start: Option<String>,
    /// Integration end time
    #[arg(long = "t-end")]
    t_end: Option<String>,
    /// Time between trajectory samples
    #[arg(long)]
    stride: Option<String>,
    /// Largest acceptable geodesic residual
    #[arg(long)]
    bound: Option<String>,
    /// Random seed for sampled test points
    #[arg(long)]
    seed: Option<String>,
    /// Negate the curvature operator
    #[arg(long = "flip-riemann-sign")]
    flip_riemann: bool,
    /// Output CSV path; stdout when absent
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Also write a gnuplot script next to the CSV
    #[arg(long)]
    plot: bool,
}

fn build(command: Command, common: &Common, suite: Option<&str>) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => {
            let cfg = cli::read_config(path)?;
            if cfg.command != command {
                return Err(CliError::Usage(format!(
                    "config file is for `{}`, not `{}`",
                    cfg.command.as_str(),
                    command.as_str()
                )));
            }
            cfg
        }
        None => RunConfig::new(command),
    };
    let mut set = |key: &str, value: &str| cfg.set(key, value).map_err(|e| CliError::Usage(e.to_string()));
    let scalars = [
        ("model", &common.model),
        ("point", &common.point),
        ("tau", &common.tau),
        ("search", &common.search),
        ("slow", &common.slow),
        ("objective", &common.objective),
        ("grid", &common.grid),
        ("tol", &common.tol),
        ("start", &common.start),
        ("t_end", &common.t_end),
        ("stride", &common.stride),
        ("bound", &common.bound),
        ("seed", &common.seed),
    ];
    for (key, value) in scalars {
        if let Some(v) = value {
            set(key, v)?;
        }
    }
    for p in &common.params {
        set("param", p)?;
    }
    for f in &common.fix {
        set("fix", f)?;
    }
    if let Some(s) = suite {
        set("suite", s)?;
    }
    if common.flip_riemann {
        set("flip_riemann", "true")?;
    }
    if common.plot {
        set("plot", "true")?;
    }
    if let Some(o) = &common.output {
        set("output", &o.to_string_lossy())?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Cli::parse();
    let (command, common, suite) = match &args.command {
        Group::Metric { action: EvalAction::Eval(c) } => (Command::MetricEval, c, None),
        Group::Curvature { action: EvalAction::Eval(c) } => (Command::CurvatureEval, c, None),
        Group::Stretch { action: SliceAction::Slice(c) } => (Command::StretchSlice, c, None),
        Group::Sim { action: SweepAction::Sweep(c) } => (Command::SimSweep, c, None),
        Group::Fcm { action: SliceAction::Slice(c) } => (Command::FcmSlice, c, None),
        Group::Geodesic { action: VerifyAction::Verify(c) } => (Command::GeodesicVerify, c, None),
        Group::Reproduce { suite, common } => (Command::Reproduce, common, Some(suite.as_str())),
    };
    let result = cli::configure_threads()
        .and_then(|_| build(command, common, suite))
        .and_then(|cfg| cli::run(&cfg, &mut std::io::stdout().lock()));
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("geostretch: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
