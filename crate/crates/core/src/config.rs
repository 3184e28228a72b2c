//! Run configuration shared by the command line and config files.
//!
//! A config file holds one `key = value` per line; `#` starts a comment.
//! [`RunConfig::to_text`] and [`RunConfig::from_text`] round-trip exactly.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{GeoError, Result};
use crate::models::ModelParameters;
use crate::stretching::Objective;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    MetricEval,
    CurvatureEval,
    StretchSlice,
    SimSweep,
    FcmSlice,
    GeodesicVerify,
    Reproduce,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::MetricEval,
        Command::CurvatureEval,
        Command::StretchSlice,
        Command::SimSweep,
        Command::FcmSlice,
        Command::GeodesicVerify,
        Command::Reproduce,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::MetricEval => "metric eval",
            Command::CurvatureEval => "curvature eval",
            Command::StretchSlice => "stretch slice",
            Command::SimSweep => "sim sweep",
            Command::FcmSlice => "fcm slice",
            Command::GeodesicVerify => "geodesic verify",
            Command::Reproduce => "reproduce",
        }
    }
}

impl FromStr for Command {
    type Err = GeoError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.split_whitespace().collect::<Vec<_>>().join(" ");
        Command::ALL
            .into_iter()
            .find(|c| c.as_str() == norm)
            .ok_or_else(|| GeoError::Parameter(format!("unknown command `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    PaperFigures,
    Invariants,
}

impl Suite {
    pub fn as_str(self) -> &'static str {
        match self {
            Suite::PaperFigures => "paper-figures",
            Suite::Invariants => "invariants",
        }
    }
}

impl FromStr for Suite {
    type Err = GeoError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "paper-figures" => Ok(Suite::PaperFigures),
            "invariants" => Ok(Suite::Invariants),
            other => Err(GeoError::Parameter(format!("unknown suite `{other}`"))),
        }
    }
}

/// How the points of a [`RangeSpec`] are spaced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Spacing {
    Count(usize),
    Step(f64),
}

/// `name=lower:upper[:count|step]`.
///
/// The optional third field is read as a point count when it parses as an
/// unsigned integer and as a step width otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeSpec {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub spacing: Option<Spacing>,
}

impl RangeSpec {
    /// Sample points, using `default_count` when no spacing was given.
    pub fn points(&self, default_count: usize) -> Result<Vec<f64>> {
        match self.spacing.unwrap_or(Spacing::Count(default_count)) {
            Spacing::Count(n) => Ok(crate::search::uniform_grid(self.lower, self.upper, n)),
            Spacing::Step(h) => {
                if !(h > 0.0) {
                    return Err(GeoError::Parameter(format!("step must be positive in `{self}`")));
                }
                let n = ((self.upper - self.lower) / h + 1e-9).floor() as usize;
                let mut pts: Vec<f64> = (0..=n).map(|i| self.lower + h * i as f64).collect();
                if let Some(last) = pts.last_mut() {
                    if (*last - self.upper).abs() <= 1e-9 * h {
                        *last = self.upper;
                    }
                }
                Ok(pts)
            }
        }
    }
}

impl fmt::Display for RangeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}:{}", self.name, fmt_f64(self.lower), fmt_f64(self.upper))?;
        match self.spacing {
            Some(Spacing::Count(n)) => write!(f, ":{n}"),
            Some(Spacing::Step(h)) => {
                let s = fmt_f64(h);
                // keep a step distinguishable from a count
                if s.contains(['.', 'e', 'E']) {
                    write!(f, ":{s}")
                } else {
                    write!(f, ":{s}.0")
                }
            }
            None => Ok(()),
        }
    }
}

impl FromStr for RangeSpec {
    type Err = GeoError;

    fn from_str(s: &str) -> Result<Self> {
        let (name, rest) = s
            .split_once('=')
            .ok_or_else(|| GeoError::Parameter(format!("range `{s}` must look like name=lower:upper[:n]")))?;
        let parts: Vec<&str> = rest.split(':').map(str::trim).collect();
        if !(2..=3).contains(&parts.len()) {
            return Err(GeoError::Parameter(format!("range `{s}` must look like name=lower:upper[:n]")));
        }
        let lower = parse_f64(parts[0], s)?;
        let upper = parse_f64(parts[1], s)?;
        if !(lower < upper) {
            return Err(GeoError::Parameter(format!("range `{s}` is empty")));
        }
        let spacing = match parts.get(2) {
            None => None,
            Some(p) => match p.parse::<usize>() {
                Ok(n) if n >= 2 => Some(Spacing::Count(n)),
                Ok(_) => return Err(GeoError::Parameter(format!("range `{s}` needs at least 2 points"))),
                Err(_) => Some(Spacing::Step(parse_f64(p, s)?)),
            },
        };
        Ok(Self { name: name.trim().to_string(), lower, upper, spacing })
    }
}

/// `name=value`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub name: String,
    pub value: f64,
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.name, fmt_f64(self.value))
    }
}

impl FromStr for Assignment {
    type Err = GeoError;

    fn from_str(s: &str) -> Result<Self> {
        let (name, value) = s
            .split_once('=')
            .ok_or_else(|| GeoError::Parameter(format!("`{s}` must look like name=value")))?;
        Ok(Self { name: name.trim().to_string(), value: parse_f64(value.trim(), s)? })
    }
}

fn parse_f64(text: &str, context: &str) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .map_err(|_| GeoError::Parameter(format!("bad number `{text}` in `{context}`")))
}

/// Shortest decimal form that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn parse_list(text: &str, context: &str) -> Result<Vec<f64>> {
    text.split(',').map(|p| parse_f64(p, context)).collect()
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",")
}

/// Coordinate names of a model: `x1, x2, …`, plus `c3, c1` for the
/// Chiavazzo mechanism whose state is ordered `(c3, c1)`.
pub fn coordinate_index(model: &str, name: &str, dim: usize) -> Result<usize> {
    if model == "chiavazzo" {
        match name {
            "c3" => return Ok(0),
            "c1" => return Ok(1),
            _ => {}
        }
    }
    name.strip_prefix('x')
        .and_then(|k| k.parse::<usize>().ok())
        .filter(|&k| k >= 1 && k <= dim)
        .map(|k| k - 1)
        .ok_or_else(|| GeoError::Parameter(format!("unknown coordinate `{name}` for model {model}")))
}

pub fn coordinate_name(model: &str, index: usize) -> String {
    match (model, index) {
        ("chiavazzo", 0) => "c3".into(),
        ("chiavazzo", 1) => "c1".into(),
        _ => format!("x{}", index + 1),
    }
}

/// Default slow coordinate and search window for sweeps:
/// `(slow index, search index, lower, upper)`.
pub fn sweep_defaults(model: &str) -> Option<(usize, usize, f64, f64)> {
    match model {
        "linear" => Some((0, 1, 0.0, 2.0)),
        "davis-skodje" => Some((0, 1, 0.05, 0.95)),
        "michaelis-menten" => Some((1, 0, 0.01, 1.5)),
        "chiavazzo" => Some((1, 0, 0.05, 0.15)),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub model: String,
    pub params: Vec<Assignment>,
    pub point: Option<Vec<f64>>,
    pub tau: f64,
    pub fix: Vec<Assignment>,
    pub search: Option<RangeSpec>,
    pub slow: Option<RangeSpec>,
    pub objective: Objective,
    pub grid: usize,
    pub tol: f64,
    pub start: Option<Vec<f64>>,
    pub t_end: f64,
    pub stride: f64,
    pub bound: f64,
    pub suite: Suite,
    pub seed: u64,
    pub flip_riemann: bool,
    pub output: Option<PathBuf>,
    pub plot: bool,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        let (grid, tol) = match command {
            Command::FcmSlice => (256, 1e-10),
            Command::GeodesicVerify => (0, 1e-10),
            _ => (64, 1e-8),
        };
        Self {
            command,
            model: "linear".into(),
            params: Vec::new(),
            point: None,
            tau: 0.0,
            fix: Vec::new(),
            search: None,
            slow: None,
            objective: Objective::TanMin,
            grid,
            tol,
            start: None,
            t_end: 5.0,
            stride: 0.05,
            bound: 1e-6,
            suite: Suite::PaperFigures,
            seed: 7,
            flip_riemann: false,
            output: None,
            plot: false,
        }
    }

    /// Model parameters with the overrides applied in order.
    pub fn parameters(&self) -> Result<ModelParameters> {
        let mut p = ModelParameters::default();
        for a in &self.params {
            p.apply_override(&a.to_string())?;
        }
        Ok(p)
    }

    /// Serializes every field, one `key = value` per line.
    pub fn to_text(&self) -> String {
        let mut lines = vec![
            format!("command = {}", self.command.as_str()),
            format!("model = {}", self.model),
        ];
        for a in &self.params {
            lines.push(format!("param = {a}"));
        }
        if let Some(p) = &self.point {
            lines.push(format!("point = {}", fmt_list(p)));
        }
        lines.push(format!("tau = {}", fmt_f64(self.tau)));
        for a in &self.fix {
            lines.push(format!("fix = {a}"));
        }
        if let Some(r) = &self.search {
            lines.push(format!("search = {r}"));
        }
        if let Some(r) = &self.slow {
            lines.push(format!("slow = {r}"));
        }
        lines.push(format!("objective = {}", self.objective));
        lines.push(format!("grid = {}", self.grid));
        lines.push(format!("tol = {}", fmt_f64(self.tol)));
        if let Some(s) = &self.start {
            lines.push(format!("start = {}", fmt_list(s)));
        }
        lines.push(format!("t_end = {}", fmt_f64(self.t_end)));
        lines.push(format!("stride = {}", fmt_f64(self.stride)));
        lines.push(format!("bound = {}", fmt_f64(self.bound)));
        lines.push(format!("suite = {}", self.suite.as_str()));
        lines.push(format!("seed = {}", self.seed));
        lines.push(format!("flip_riemann = {}", self.flip_riemann));
        if let Some(o) = &self.output {
            lines.push(format!("output = {}", o.display()));
        }
        lines.push(format!("plot = {}", self.plot));
        lines.join("\n") + "\n"
    }

    /// Parses a config file. `#` starts a comment, blank lines are ignored,
    /// and a leading `# ` on every line (a CSV echo block) is accepted.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let line = line.strip_prefix("# ").unwrap_or(line);
            let line = match line.find('#') {
                Some(i) => &line[..i],
                None => line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| GeoError::Parameter(format!("line {}: expected `key = value`", lineno + 1)))?;
            entries.push((k.trim().to_string(), v.trim().to_string()));
        }
        let command = entries
            .iter()
            .find(|(k, _)| k == "command")
            .ok_or_else(|| GeoError::Parameter("config has no `command` key".into()))?
            .1
            .parse::<Command>()?;
        let mut cfg = RunConfig::new(command);
        for (k, v) in &entries {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| GeoError::Parameter(format!("key `{key}`: invalid {what} `{value}`"));
        match key {
            "command" => self.command = value.parse()?,
            "model" => self.model = value.to_string(),
            "param" => self.params.push(value.parse()?),
            "point" => self.point = Some(parse_list(value, key)?),
            "tau" => self.tau = parse_f64(value, key)?,
            "fix" => self.fix.push(value.parse()?),
            "search" => self.search = Some(value.parse()?),
            "slow" => self.slow = Some(value.parse()?),
            "objective" => self.objective = value.parse().map_err(|_| bad("objective"))?,
            "grid" => self.grid = value.parse().map_err(|_| bad("grid size"))?,
            "tol" => self.tol = parse_f64(value, key)?,
            "start" => self.start = Some(parse_list(value, key)?),
            "t_end" => self.t_end = parse_f64(value, key)?,
            "stride" => self.stride = parse_f64(value, key)?,
            "bound" => self.bound = parse_f64(value, key)?,
            "suite" => self.suite = value.parse()?,
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            "flip_riemann" => self.flip_riemann = value.parse().map_err(|_| bad("boolean"))?,
            "output" => self.output = Some(PathBuf::from(value)),
            "plot" => self.plot = value.parse().map_err(|_| bad("boolean"))?,
            other => return Err(GeoError::Parameter(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn range_third_field_is_count_or_step() {
        let r: RangeSpec = "c1=0.1:0.9:16".parse().unwrap();
        assert_eq!(r.spacing, Some(Spacing::Count(16)));
        assert_eq!(r.points(0).unwrap().len(), 16);
        let r: RangeSpec = "x2=0.495:0.505:0.0005".parse().unwrap();
        assert_eq!(r.spacing, Some(Spacing::Step(0.0005)));
        let p = r.points(0).unwrap();
        assert_eq!(p.len(), 21);
        assert_eq!(*p.last().unwrap(), 0.505);
        assert!("x2=1:0".parse::<RangeSpec>().is_err());
        assert!("x2=0:1:1".parse::<RangeSpec>().is_err());
        assert!("x2".parse::<RangeSpec>().is_err());
    }

    #[test]
    fn coordinates() {
        assert_eq!(coordinate_index("chiavazzo", "c1", 2).unwrap(), 1);
        assert_eq!(coordinate_index("davis-skodje", "x2", 2).unwrap(), 1);
        assert!(coordinate_index("davis-skodje", "x3", 2).is_err());
        assert_eq!(coordinate_name("chiavazzo", 0), "c3");
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_text("command = metric eval\nfrobnicate = 3\n").unwrap_err();
        assert!(err.to_string().contains("frobnicate"));
        assert!(RunConfig::from_text("model = linear\n").is_err());
    }

    #[test]
    fn full_round_trip() {
        let mut c = RunConfig::new(Command::SimSweep);
        c.model = "chiavazzo".into();
        c.params.push("eta=10".parse().unwrap());
        c.slow = Some("c1=0.1:0.9:16".parse().unwrap());
        c.search = Some("c3=0.05:0.15:0.25".parse().unwrap());
        c.point = Some(vec![0.1, 1.0 / 3.0]);
        c.output = Some("out.csv".into());
        c.plot = true;
        let text = c.to_text();
        assert_eq!(RunConfig::from_text(&text).unwrap(), c);
        let echoed: String = text.lines().map(|l| format!("# {l}\n")).collect();
        assert_eq!(RunConfig::from_text(&echoed).unwrap(), c);
    }

    proptest! {
        #[test]
        fn numeric_fields_round_trip(tol in 1e-300f64..1e3, t_end in 0.0f64..1e6, seed in any::<u64>(), lo in -1e3f64..0.0, hi in 0.0f64..1e3, step in 1e-9f64..10.0) {
            let mut c = RunConfig::new(Command::GeodesicVerify);
            c.tol = tol;
            c.t_end = t_end;
            c.seed = seed;
            c.search = Some(RangeSpec { name: "x2".into(), lower: lo, upper: hi + 1e-3, spacing: Some(Spacing::Step(step)) });
            prop_assert_eq!(RunConfig::from_text(&c.to_text()).unwrap(), c);
        }
    }
}
