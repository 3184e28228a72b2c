//! Dispatch of a [`RunConfig`] to the library operations.
//!
//! Exit codes: `0` success, `1` a verification or reproduction check
//! failed, `2` invalid configuration, `3` computation error.

use std::io::Write;
use std::path::Path;

use crate::config::{coordinate_index, coordinate_name, sweep_defaults, Command, RunConfig};
use crate::curvature::{CurvatureBundle, RiemannConvention};
use crate::error::GeoError;
use crate::fcm::{fcm_zero_set, FcmError, FcmOptions};
use crate::fmanifold::{metric_at, ExtendedPoint};
use crate::geodesics::{integrate_extended, verify_trajectory, IntegrateOptions, IntegrationError};
use crate::models::{builtin, VectorField};
use crate::output::{num, plot_path, plot_script, write_atomic, CsvTable};
use crate::reproduce::{self, ReproduceOptions};
use crate::stretching::{slice_rates_with, subspace_split, sweep_sim_curve, theta_extrema, LocateOptions, Slice, SubspaceCandidate, SweepConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_COMPUTE: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Compute(String),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Compute(_) | CliError::Io(_) => EXIT_COMPUTE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Compute(m) => write!(f, "computation error: {m}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

fn compute(e: impl std::fmt::Display) -> CliError {
    CliError::Compute(e.to_string())
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

/// Parameter problems are configuration errors; everything else is a
/// failure of the computation itself.
fn classify(e: GeoError) -> CliError {
    match e {
        GeoError::Parameter(_) | GeoError::UnknownModel(_) => CliError::Usage(e.to_string()),
        other => CliError::Compute(other.to_string()),
    }
}

/// Applies `GEOSTRETCH_THREADS` to the global rayon pool, once.
pub fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("GEOSTRETCH_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| usage(format!("GEOSTRETCH_THREADS must be a positive integer, got `{v}`")))?;
        if n == 0 {
            return Err(usage("GEOSTRETCH_THREADS must be at least 1"));
        }
        // a pool that is already built keeps its size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn load_model(cfg: &RunConfig) -> Result<std::sync::Arc<dyn VectorField>, CliError> {
    let params = cfg.parameters().map_err(classify)?;
    builtin(&cfg.model, &params).map_err(classify)
}

/// Base point from `fix` assignments, zero elsewhere.
fn base_point(cfg: &RunConfig, dim: usize) -> Result<Vec<f64>, CliError> {
    let mut base = vec![0.0; dim];
    for a in &cfg.fix {
        let i = coordinate_index(&cfg.model, &a.name, dim).map_err(usage)?;
        base[i] = a.value;
    }
    Ok(base)
}

fn required<'a, T>(v: &'a Option<T>, key: &str) -> Result<&'a T, CliError> {
    v.as_ref().ok_or_else(|| usage(format!("missing required key `{key}`")))
}

fn point_arg(cfg: &RunConfig, dim: usize) -> Result<Vec<f64>, CliError> {
    let p = required(&cfg.point, "point")?;
    if p.len() != dim {
        return Err(usage(format!("key `point`: model {} needs {dim} coordinates, got {}", cfg.model, p.len())));
    }
    Ok(p.clone())
}

fn convention(cfg: &RunConfig) -> RiemannConvention {
    if cfg.flip_riemann {
        RiemannConvention::Flipped
    } else {
        RiemannConvention::Standard
    }
}

/// Writes the table to `cfg.output` (plus a plot script if requested) or
/// to `out` when no output path is set.
fn emit(cfg: &RunConfig, table: &CsvTable, out: &mut dyn Write) -> Result<(), CliError> {
    let text = table.render(&cfg.to_text());
    match &cfg.output {
        Some(path) => {
            write_atomic(path, &text)?;
            if cfg.plot {
                write_atomic(&plot_path(path), &plot_script(path, table))?;
            }
            writeln!(out, "wrote {}", path.display())?;
        }
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Runs one configured command, writing human-readable results to `out`.
pub fn run(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    match cfg.command {
        Command::MetricEval => metric_eval(cfg, out),
        Command::CurvatureEval => curvature_eval(cfg, out),
        Command::StretchSlice => stretch_slice(cfg, out),
        Command::SimSweep => sim_sweep(cfg, out),
        Command::FcmSlice => fcm_slice(cfg, out),
        Command::GeodesicVerify => geodesic_verify(cfg, out),
        Command::Reproduce => {
            let opts = ReproduceOptions { seed: cfg.seed, convention: convention(cfg) };
            let report = reproduce::run(cfg.suite, &opts);
            writeln!(out, "{report}")?;
            Ok(if report.all_pass() { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
    }
}

fn metric_eval(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let m = load_model(cfg)?;
    let x = point_arg(cfg, m.dim())?;
    let g = metric_at(m.as_ref(), &ExtendedPoint::new(&x, cfg.tau)).map_err(classify)?;
    let mut t = CsvTable::new(["i", "j", "g", "g_inv"]);
    for i in 0..g.dim() {
        for j in 0..g.dim() {
            t.push(vec![i.to_string(), j.to_string(), num(g.g[(i, j)]), num(g.g_inv[(i, j)])]);
        }
    }
    if cfg.output.is_some() {
        writeln!(out, "{g}")?;
        writeln!(out, "det = {}", num(g.determinant()))?;
    }
    emit(cfg, &t, out)?;
    Ok(EXIT_OK)
}

fn curvature_eval(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let m = load_model(cfg)?;
    let x = point_arg(cfg, m.dim())?;
    let p = ExtendedPoint::new(&x, cfg.tau);
    let b = CurvatureBundle::compute_with(m.as_ref(), &p, convention(cfg)).map_err(classify)?;
    let big = b.dim();
    let mut t = CsvTable::new(["tensor", "a", "b", "c", "d", "value"]);
    let idx = |v: usize| v.to_string();
    for k in 0..big {
        for i in 0..big {
            for j in 0..big {
                t.push(vec!["christoffel".into(), idx(k), idx(i), idx(j), String::new(), num(b.christoffel[(k, i, j)])]);
            }
        }
    }
    for l in 0..big {
        for i in 0..big {
            for j in 0..big {
                for k in 0..big {
                    t.push(vec!["riemann".into(), idx(l), idx(i), idx(j), idx(k), num(b.riemann[(l, i, j, k)])]);
                }
            }
        }
    }
    for l in 0..big {
        for j in 0..big {
            t.push(vec!["deviation".into(), idx(l), idx(j), String::new(), String::new(), num(b.deviation[(l, j)])]);
        }
    }
    if m.dim() == 2 {
        if let Ok(basis) = subspace_split(m.as_ref(), &p, &SubspaceCandidate::Trajectory) {
            let (tan, orth) = theta_extrema(&b, &basis).map_err(classify)?;
            t.push(vec!["theta_tan".into(), String::new(), String::new(), String::new(), String::new(), num(tan)]);
            t.push(vec!["theta_orth".into(), String::new(), String::new(), String::new(), String::new(), num(orth)]);
        }
    }
    emit(cfg, &t, out)?;
    Ok(EXIT_OK)
}

/// Default number of slice samples when the range has no spacing.
pub const DEFAULT_SLICE_POINTS: usize = 21;

fn stretch_slice(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let m = load_model(cfg)?;
    let range = required(&cfg.search, "search")?;
    let s = coordinate_index(&cfg.model, &range.name, m.dim()).map_err(usage)?;
    let base = base_point(cfg, m.dim())?;
    let mut t = CsvTable::new([range.name.clone(), "tangential".into(), "orthogonal".into()]);
    for v in range.points(DEFAULT_SLICE_POINTS).map_err(usage)? {
        let mut x = base.clone();
        x[s] = v;
        let (tan, orth) = slice_rates_with(m.as_ref(), &x, &SubspaceCandidate::Trajectory, convention(cfg)).map_err(classify)?;
        t.push_numbers(&[v, tan, orth]);
    }
    emit(cfg, &t, out)?;
    Ok(EXIT_OK)
}

fn sim_sweep(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let m = load_model(cfg)?;
    let n = m.dim();
    let slow = required(&cfg.slow, "slow")?;
    let slow_index = coordinate_index(&cfg.model, &slow.name, n).map_err(usage)?;
    let (search_index, lower, upper) = match &cfg.search {
        Some(r) => (coordinate_index(&cfg.model, &r.name, n).map_err(usage)?, r.lower, r.upper),
        None => match sweep_defaults(&cfg.model) {
            Some((_, si, lo, hi)) if n == 2 => (si, lo, hi),
            _ => return Err(usage(format!("model {} has no default search window; set `search`", cfg.model))),
        },
    };
    if search_index == slow_index {
        return Err(usage("slow and search coordinates must differ"));
    }
    let mut base = base_point(cfg, n)?;
    // an unset search coordinate starts mid-window; it is overwritten anyway
    base[search_index] = 0.5 * (lower + upper);
    let sweep = SweepConfig {
        base,
        slow_index,
        slow_values: slow.points(DEFAULT_SLICE_POINTS).map_err(usage)?,
        search_index,
        lower,
        upper,
        options: LocateOptions {
            objective: cfg.objective,
            grid: cfg.grid,
            tolerance: cfg.tol,
            convention: convention(cfg),
            ..LocateOptions::default()
        },
    };
    let curve = sweep_sim_curve(m.as_ref(), &sweep).map_err(classify)?;
    let search_name = coordinate_name(&cfg.model, search_index);
    let mut t = CsvTable::new([
        slow.name.clone(),
        search_name,
        "theta_tan".into(),
        "theta_orth".into(),
        "status".into(),
    ]);
    let opt = |v: Option<f64>| v.map(num).unwrap_or_else(|| "nan".into());
    for r in &curve.records {
        t.push(vec![num(r.slow), opt(r.located), opt(r.theta_tan), opt(r.theta_orth), r.status.as_str().into()]);
    }
    emit(cfg, &t, out)?;
    Ok(EXIT_OK)
}

fn fcm_slice(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let m = load_model(cfg)?;
    let range = required(&cfg.search, "search")?;
    let s = coordinate_index(&cfg.model, &range.name, m.dim()).map_err(usage)?;
    let slice = Slice::new(base_point(cfg, m.dim())?, s, range.lower, range.upper).map_err(usage)?;
    let opts = FcmOptions { grid: cfg.grid, tolerance: cfg.tol };
    let mut t = CsvTable::new([range.name.clone(), "slope_sign".into(), "method".into()]);
    match fcm_zero_set(m.as_ref(), &slice, &opts) {
        Ok(z) => {
            for r in &z.roots {
                t.push(vec![num(r.coordinate), r.slope_sign.to_string(), r.method.as_str().into()]);
            }
        }
        Err(FcmError::DegenerateSlice { max_abs, .. }) => {
            eprintln!("note: Psi vanishes identically on the slice (max |Psi| = {max_abs:e}); no roots reported");
        }
        Err(FcmError::Geo(e)) => return Err(classify(e)),
    }
    emit(cfg, &t, out)?;
    Ok(EXIT_OK)
}

fn geodesic_verify(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let m = load_model(cfg)?;
    let start = required(&cfg.start, "start")?;
    if start.len() != m.dim() {
        return Err(usage(format!("key `start`: model {} needs {} coordinates", cfg.model, m.dim())));
    }
    let opts = IntegrateOptions { tol: cfg.tol, stride: cfg.stride, ..IntegrateOptions::default() };
    let traj = match integrate_extended(m.as_ref(), &ExtendedPoint::new(start, cfg.tau), cfg.t_end, &opts) {
        Ok(t) => t,
        Err(IntegrationError::Geo(e)) => return Err(classify(e)),
        Err(e @ IntegrationError::Failure { .. }) => return Err(compute(e)),
    };
    let rep = verify_trajectory(m.as_ref(), &traj).map_err(classify)?;
    let n = m.dim();
    let mut cols: Vec<String> = vec!["t".into()];
    cols.extend((0..n).map(|i| coordinate_name(&cfg.model, i)));
    cols.extend(["tau".into(), "residual".into()]);
    let mut t = CsvTable::new(cols);
    for ((time, p), r) in traj.samples.iter().zip(&rep.residuals) {
        let mut row = vec![*time];
        row.extend(p.x.iter());
        row.push(p.tau);
        row.push(*r);
        t.push_numbers(&row);
    }
    if cfg.output.is_some() {
        emit(cfg, &t, out)?;
    }
    writeln!(out, "samples = {}", traj.len())?;
    writeln!(out, "steps = {}, rejected = {}", traj.stats.steps, traj.stats.rejected)?;
    writeln!(out, "max residual = {}", num(rep.max_residual))?;
    writeln!(out, "max unit-speed deviation = {}", num(rep.max_unit_speed_deviation))?;
    writeln!(out, "bound = {}", num(cfg.bound))?;
    if rep.max_residual > cfg.bound {
        writeln!(out, "FAIL: residual exceeds bound")?;
        Ok(EXIT_CHECK_FAILED)
    } else {
        writeln!(out, "PASS")?;
        Ok(EXIT_OK)
    }
}

/// Loads a config file.
pub fn read_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)?;
    RunConfig::from_text(&text).map_err(usage)
}
