//! Stretching rates and the slow-manifold locator built on them.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::curvature::{CurvatureBundle, RiemannConvention};
use crate::error::{GeoError, Result};
use crate::fmanifold::{ExtendedPoint, TangentVector};
use crate::models::VectorField;
use crate::search::{golden_section_min, uniform_grid};

/// Classical rate `⟨J v, v⟩ / ⟨v, v⟩` in euclidean state space.
pub fn classical_stretching(model: &dyn VectorField, x: &[f64], v: &[f64]) -> Result<f64> {
    let j = model.jacobian(x)?;
    if v.len() != j.ncols() {
        return Err(GeoError::Shape { expected: j.ncols(), got: v.len() });
    }
    let v = DVector::from_column_slice(v);
    let vv = v.norm_squared();
    if !(vv > 0.0) {
        return Err(GeoError::Degenerate("stretching rate of the zero vector".into()));
    }
    Ok((&j * &v).dot(&v) / vv)
}

/// Geodesic stretching `ϑ_p(v) = g(S v, v) / g(v, v)`.
pub fn geodesic_stretching(model: &dyn VectorField, p: &ExtendedPoint, v: &TangentVector) -> Result<f64> {
    CurvatureBundle::compute(model, p)?.geodesic_stretching(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisProvenance {
    Trajectory,
    UserSupplied,
}

/// Pure-state basis split into tangential and orthogonal families.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    pub tangential: Vec<TangentVector>,
    pub orthogonal: Vec<TangentVector>,
    pub provenance: BasisProvenance,
}

/// How the tangential subspace is chosen at a point.
#[derive(Debug, Clone, PartialEq)]
pub enum SubspaceCandidate {
    /// Planar systems only: tangent to the trajectory, `v1 = f`, `v2 = (f2, -f1)`.
    Trajectory,
    /// Fixed state-space vectors spanning the tangential subspace.
    User(Vec<Vec<f64>>),
}

const RANK_TOL: f64 = 1e-12;

pub fn subspace_split(model: &dyn VectorField, p: &ExtendedPoint, candidate: &SubspaceCandidate) -> Result<SubspaceBasis> {
    let n = model.dim();
    match candidate {
        SubspaceCandidate::Trajectory => {
            if n != 2 {
                return Err(GeoError::Parameter(format!(
                    "trajectory subspaces need a planar system, got dimension {n}"
                )));
            }
            let f = model.eval(p.state())?;
            if f.norm() == 0.0 {
                return Err(GeoError::Degenerate("trajectory direction undefined at an equilibrium".into()));
            }
            Ok(SubspaceBasis {
                tangential: vec![TangentVector::pure_state(&[f[0], f[1]])],
                orthogonal: vec![TangentVector::pure_state(&[f[1], -f[0]])],
                provenance: BasisProvenance::Trajectory,
            })
        }
        SubspaceCandidate::User(vectors) => {
            if vectors.is_empty() || vectors.len() >= n {
                return Err(GeoError::Rank(format!(
                    "need between 1 and {} tangential vectors, got {}",
                    n - 1,
                    vectors.len()
                )));
            }
            let mut orthonormal: Vec<DVector<f64>> = Vec::new();
            for v in vectors {
                if v.len() != n {
                    return Err(GeoError::Shape { expected: n, got: v.len() });
                }
                let reduced = orthogonalize(&DVector::from_column_slice(v), &orthonormal);
                let norm = reduced.norm();
                if norm <= RANK_TOL * DVector::from_column_slice(v).norm().max(1.0) {
                    return Err(GeoError::Rank("tangential vectors are linearly dependent".into()));
                }
                orthonormal.push(reduced / norm);
            }
            let mut orthogonal = Vec::new();
            for e in 0..n {
                if orthonormal.len() == n {
                    break;
                }
                let unit = DVector::from_fn(n, |i, _| if i == e { 1.0 } else { 0.0 });
                let reduced = orthogonalize(&unit, &orthonormal);
                let norm = reduced.norm();
                if norm > 1e-8 {
                    let u = reduced / norm;
                    orthogonal.push(TangentVector::pure_state(u.as_slice()));
                    orthonormal.push(u);
                }
            }
            Ok(SubspaceBasis {
                tangential: vectors.iter().map(|v| TangentVector::pure_state(v)).collect(),
                orthogonal,
                provenance: BasisProvenance::UserSupplied,
            })
        }
    }
}

fn orthogonalize(v: &DVector<f64>, basis: &[DVector<f64>]) -> DVector<f64> {
    let mut out = v.clone();
    // two passes of modified Gram-Schmidt
    for _ in 0..2 {
        for b in basis {
            let c = out.dot(b);
            out -= b * c;
        }
    }
    out
}

/// Maximum of `ϑ` over `span(vectors)`: the largest eigenvalue of the pencil
/// `(g(S·,·), g(·,·))` restricted to the subspace.
pub fn max_stretching_over(bundle: &CurvatureBundle, vectors: &[TangentVector]) -> Result<f64> {
    match vectors {
        [] => Err(GeoError::Degenerate("empty subspace".into())),
        [v] => bundle.geodesic_stretching(v),
        _ => {
            let k = vectors.len();
            let mut form = DMatrix::zeros(k, k);
            let mut gram = DMatrix::zeros(k, k);
            for a in 0..k {
                for b in 0..k {
                    let sab = bundle.deviation_form(&vectors[a], &vectors[b])?;
                    let sba = bundle.deviation_form(&vectors[b], &vectors[a])?;
                    form[(a, b)] = 0.5 * (sab + sba);
                    gram[(a, b)] = vectors[a].0.dot(&(&bundle.metric.g * &vectors[b].0));
                }
            }
            let chol = gram
                .cholesky()
                .ok_or_else(|| GeoError::Rank("subspace vectors are linearly dependent".into()))?;
            let l_inv = chol
                .l()
                .try_inverse()
                .ok_or_else(|| GeoError::Rank("subspace vectors are linearly dependent".into()))?;
            let reduced = &l_inv * form * l_inv.transpose();
            let sym = (&reduced + reduced.transpose()) * 0.5;
            let eig = SymmetricEigen::new(sym);
            Ok(eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        }
    }
}

/// `(Θ^tan, Θ^orth)`.
pub fn theta_extrema(bundle: &CurvatureBundle, basis: &SubspaceBasis) -> Result<(f64, f64)> {
    Ok((max_stretching_over(bundle, &basis.tangential)?, max_stretching_over(bundle, &basis.orthogonal)?))
}

/// What is extremized along a slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Objective {
    /// Minimize the tangential rate.
    #[default]
    TanMin,
    /// Maximize the orthogonal rate.
    OrthMax,
    /// Maximize `Θ^orth / |Θ^tan|`.
    RatioMax,
}

impl Objective {
    /// Value to be minimized, `None` where undefined.
    fn cost(self, tan: f64, orth: f64) -> Option<f64> {
        match self {
            Self::TanMin => Some(tan),
            Self::OrthMax => Some(-orth),
            Self::RatioMax => {
                if tan.abs() < 1e-300 {
                    None
                } else {
                    Some(-orth / tan.abs())
                }
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::TanMin => "tan-min",
            Self::OrthMax => "orth-max",
            Self::RatioMax => "ratio-max",
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Objective {
    type Err = GeoError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tan-min" => Ok(Self::TanMin),
            "orth-max" => Ok(Self::OrthMax),
            "ratio-max" => Ok(Self::RatioMax),
            other => Err(GeoError::Parameter(format!("unknown objective `{other}`"))),
        }
    }
}

/// A one-dimensional line through state space: all coordinates fixed except
/// `search_index`, which ranges over `[lower, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    /// Full state with the searched coordinate's entry ignored.
    pub base: Vec<f64>,
    pub search_index: usize,
    pub lower: f64,
    pub upper: f64,
}

impl Slice {
    pub fn new(base: Vec<f64>, search_index: usize, lower: f64, upper: f64) -> Result<Self> {
        if search_index >= base.len() {
            return Err(GeoError::Shape { expected: base.len(), got: search_index + 1 });
        }
        if !(lower < upper) {
            return Err(GeoError::Parameter(format!("empty search interval [{lower}, {upper}]")));
        }
        Ok(Self { base, search_index, lower, upper })
    }

    pub fn point(&self, s: f64) -> Vec<f64> {
        let mut x = self.base.clone();
        x[self.search_index] = s;
        x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocateOptions {
    pub objective: Objective,
    pub grid: usize,
    pub tolerance: f64,
    pub candidate: SubspaceCandidate,
    pub convention: RiemannConvention,
}

impl Default for LocateOptions {
    fn default() -> Self {
        Self {
            objective: Objective::TanMin,
            grid: 64,
            tolerance: 1e-8,
            candidate: SubspaceCandidate::Trajectory,
            convention: RiemannConvention::Standard,
        }
    }
}

/// Objective profile sampled on the coarse grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridProfile {
    pub coordinates: Vec<f64>,
    /// `NaN` where the objective is undefined.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Located {
    pub coordinate: f64,
    pub objective_value: f64,
    pub theta_tan: f64,
    pub theta_orth: f64,
    /// Refined coordinates of every interior extremum, best first.
    pub candidates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LocateError {
    #[error("no interior extremum on the slice (best grid point at {boundary:?})")]
    NoInteriorExtremum { boundary: Option<f64>, profile: GridProfile },
    #[error(transparent)]
    Geo(#[from] GeoError),
}

/// Stretching rates at one state.
pub fn slice_rates(model: &dyn VectorField, x: &[f64], candidate: &SubspaceCandidate) -> Result<(f64, f64)> {
    slice_rates_with(model, x, candidate, RiemannConvention::Standard)
}

pub fn slice_rates_with(
    model: &dyn VectorField,
    x: &[f64],
    candidate: &SubspaceCandidate,
    convention: RiemannConvention,
) -> Result<(f64, f64)> {
    let p = ExtendedPoint::new(x, 0.0);
    let bundle = CurvatureBundle::compute_with(model, &p, convention)?;
    let basis = subspace_split(model, &p, candidate)?;
    theta_extrema(&bundle, &basis)
}

pub fn locate_sim_point(
    model: &dyn VectorField,
    slice: &Slice,
    options: &LocateOptions,
) -> std::result::Result<Located, LocateError> {
    model.jet_depth().require(2, 0)?;
    if options.grid < 3 {
        return Err(GeoError::Parameter("locator grid needs at least 3 points".into()).into());
    }
    let eval = |s: f64| -> Option<f64> {
        let (tan, orth) = slice_rates_with(model, &slice.point(s), &options.candidate, options.convention).ok()?;
        options.objective.cost(tan, orth).filter(|v| v.is_finite())
    };
    let coords = uniform_grid(slice.lower, slice.upper, options.grid);
    let values: Vec<f64> = coords.iter().map(|&s| eval(s).unwrap_or(f64::NAN)).collect();
    let profile = GridProfile { coordinates: coords.clone(), values: values.clone() };

    let mut refined: Vec<(f64, f64)> = Vec::new();
    for i in 1..coords.len() - 1 {
        let (a, b, c) = (values[i - 1], values[i], values[i + 1]);
        if a.is_nan() || b.is_nan() || c.is_nan() {
            continue;
        }
        if b < a && b <= c {
            let cost = |s: f64| eval(s).unwrap_or(f64::INFINITY);
            let (s, v) = golden_section_min(cost, coords[i - 1], coords[i + 1], options.tolerance);
            let width = slice.upper - slice.lower;
            let interior = s - slice.lower > options.tolerance * 10.0 && slice.upper - s > options.tolerance * 10.0;
            if interior && width > 0.0 && v.is_finite() {
                refined.push((s, v));
            }
        }
    }
    if refined.is_empty() {
        let boundary = values
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_nan())
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| coords[i]);
        return Err(LocateError::NoInteriorExtremum { boundary, profile });
    }
    refined.sort_by(|a, b| {
        if (a.1 - b.1).abs() <= 1e-12 {
            a.0.total_cmp(&b.0)
        } else {
            a.1.total_cmp(&b.1)
        }
    });
    let (coordinate, objective_value) = refined[0];
    let (theta_tan, theta_orth) = slice_rates_with(model, &slice.point(coordinate), &options.candidate, options.convention)?;
    Ok(Located {
        coordinate,
        objective_value,
        theta_tan,
        theta_orth,
        candidates: refined.iter().map(|r| r.0).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordStatus {
    Ok,
    Boundary,
    Failed,
}

impl RecordStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::Boundary => "boundary",
            Self::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRecord {
    pub slow: f64,
    pub located: Option<f64>,
    pub theta_tan: Option<f64>,
    pub theta_orth: Option<f64>,
    pub status: RecordStatus,
    pub message: Option<String>,
}

/// Sweep over slow values; every slice searches `search_index` in
/// `[lower, upper]` with the remaining coordinates taken from `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub base: Vec<f64>,
    pub slow_index: usize,
    pub slow_values: Vec<f64>,
    pub search_index: usize,
    pub lower: f64,
    pub upper: f64,
    pub options: LocateOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimCurve {
    pub model: String,
    pub config: SweepConfig,
    pub records: Vec<SimRecord>,
}

impl SimCurve {
    pub fn located(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.records.iter().filter_map(|r| r.located.map(|l| (r.slow, l)))
    }
}

fn sweep_one(model: &dyn VectorField, cfg: &SweepConfig, slow: f64) -> SimRecord {
    let mut base = cfg.base.clone();
    base[cfg.slow_index] = slow;
    let slice = match Slice::new(base, cfg.search_index, cfg.lower, cfg.upper) {
        Ok(s) => s,
        Err(e) => {
            return SimRecord {
                slow,
                located: None,
                theta_tan: None,
                theta_orth: None,
                status: RecordStatus::Failed,
                message: Some(e.to_string()),
            }
        }
    };
    match locate_sim_point(model, &slice, &cfg.options) {
        Ok(l) => SimRecord {
            slow,
            located: Some(l.coordinate),
            theta_tan: Some(l.theta_tan),
            theta_orth: Some(l.theta_orth),
            status: RecordStatus::Ok,
            message: None,
        },
        Err(LocateError::NoInteriorExtremum { boundary, .. }) => SimRecord {
            slow,
            located: None,
            theta_tan: None,
            theta_orth: None,
            status: RecordStatus::Boundary,
            message: boundary.map(|b| format!("extremum at interval boundary {b}")),
        },
        Err(LocateError::Geo(e)) => SimRecord {
            slow,
            located: None,
            theta_tan: None,
            theta_orth: None,
            status: RecordStatus::Failed,
            message: Some(e.to_string()),
        },
    }
}

/// Locates one point per slow value. Slices run in parallel on the current
/// rayon pool; records come back in grid order.
pub fn sweep_sim_curve(model: &dyn VectorField, cfg: &SweepConfig) -> Result<SimCurve> {
    let n = model.dim();
    if cfg.base.len() != n {
        return Err(GeoError::Shape { expected: n, got: cfg.base.len() });
    }
    if cfg.slow_index >= n || cfg.search_index >= n || cfg.slow_index == cfg.search_index {
        return Err(GeoError::Parameter("slow and search coordinates must be distinct state indices".into()));
    }
    if cfg.slow_values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(GeoError::Parameter("slow grid must be strictly increasing".into()));
    }
    model.jet_depth().require(2, 0)?;
    let records = cfg.slow_values.par_iter().map(|&s| sweep_one(model, cfg, s)).collect();
    Ok(SimCurve { model: model.name().to_string(), config: cfg.clone(), records })
}

/// Sequential reference for [`sweep_sim_curve`].
pub fn sweep_sim_curve_sequential(model: &dyn VectorField, cfg: &SweepConfig) -> Result<SimCurve> {
    let records = cfg.slow_values.iter().map(|&s| sweep_one(model, cfg, s)).collect();
    Ok(SimCurve { model: model.name().to_string(), config: cfg.clone(), records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{builtin, ConstantField, Model, ModelParameters};
    use approx::assert_relative_eq;

    fn model(id: &str) -> std::sync::Arc<dyn VectorField> {
        builtin(id, &ModelParameters::default()).unwrap()
    }

    #[test]
    fn classical_rates_of_linear_model() {
        let lin = model("linear");
        assert_relative_eq!(classical_stretching(lin.as_ref(), &[0.2, 0.4], &[1.0, 1.0]).unwrap(), -1.0);
        assert_relative_eq!(classical_stretching(lin.as_ref(), &[0.2, 0.4], &[1.0, -1.0]).unwrap(), -7.0);
        let a = classical_stretching(lin.as_ref(), &[0.2, 0.4], &[0.3, 1.7]).unwrap();
        let b = classical_stretching(lin.as_ref(), &[0.2, 0.4], &[0.6, 3.4]).unwrap();
        assert!((a - b).abs() <= 1e-12);
        assert!(matches!(classical_stretching(lin.as_ref(), &[0.0, 0.0], &[0.0, 0.0]), Err(GeoError::Degenerate(_))));
    }

    #[test]
    fn davis_skodje_slice_values() {
        let ds = model("davis-skodje");
        let p = ExtendedPoint::new(&[1.0, 0.5], 0.0);
        let basis = subspace_split(ds.as_ref(), &p, &SubspaceCandidate::Trajectory).unwrap();
        assert_eq!(basis.tangential[0].0.as_slice(), &[-1.0, -0.25, 0.0]);
        assert_eq!(basis.orthogonal[0].0.as_slice(), &[-0.25, 1.0, 0.0]);
        let b = CurvatureBundle::compute(ds.as_ref(), &p).unwrap();
        let (tan, orth) = theta_extrema(&b, &basis).unwrap();
        assert!((tan - 0.947610294117647).abs() < 1e-9);
        assert!((orth - 9.33363970588235).abs() < 1e-9);
        assert_eq!(tan, b.geodesic_stretching(&basis.tangential[0]).unwrap());
    }

    #[test]
    fn trajectory_split_fails_at_equilibrium() {
        let ds = model("davis-skodje");
        let err = subspace_split(ds.as_ref(), &ExtendedPoint::new(&[0.0, 0.0], 0.0), &SubspaceCandidate::Trajectory);
        assert!(matches!(err, Err(GeoError::Degenerate(_))));
    }

    #[test]
    fn user_split_completes_axis_aligned_complement() {
        let m = Model::new(ConstantField { value: vec![1.0, 2.0, 3.0] });
        let p = ExtendedPoint::new(&[0.0, 0.0, 0.0], 0.0);
        let basis = subspace_split(&m, &p, &SubspaceCandidate::User(vec![vec![1.0, 0.0, 0.0]])).unwrap();
        assert_eq!(basis.orthogonal.len(), 2);
        assert_eq!(basis.orthogonal[0].0.as_slice(), &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(basis.orthogonal[1].0.as_slice(), &[0.0, 0.0, 1.0, 0.0]);
        let dep = SubspaceCandidate::User(vec![vec![1.0, 1.0, 0.0], vec![2.0, 2.0, 0.0]]);
        assert!(matches!(subspace_split(&m, &p, &dep), Err(GeoError::Rank(_))));
    }

    #[test]
    fn constant_field_has_zero_extrema() {
        let m = Model::new(ConstantField { value: vec![1.0, -0.5] });
        let p = ExtendedPoint::new(&[0.3, 0.3], 0.0);
        let b = CurvatureBundle::compute(&m, &p).unwrap();
        let basis = subspace_split(&m, &p, &SubspaceCandidate::Trajectory).unwrap();
        assert_eq!(theta_extrema(&b, &basis).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn locate_on_davis_skodje_slice() {
        let ds = model("davis-skodje");
        let slice = Slice::new(vec![1.0, 0.0], 1, 0.495, 0.505).unwrap();
        let l = locate_sim_point(ds.as_ref(), &slice, &LocateOptions::default()).unwrap();
        assert!((l.coordinate - 0.4985).abs() < 5e-4, "{}", l.coordinate);
    }

    #[test]
    fn locate_on_linear_slow_eigenline() {
        let lin = model("linear");
        let slice = Slice::new(vec![1.0, 0.0], 1, 0.0, 2.0).unwrap();
        let l = locate_sim_point(lin.as_ref(), &slice, &LocateOptions::default()).unwrap();
        assert!((l.coordinate - 1.0).abs() < 1e-3, "{}", l.coordinate);
    }

    #[test]
    fn boundary_extremum_is_reported() {
        let ds = model("davis-skodje");
        let slice = Slice::new(vec![1.0, 0.0], 1, 0.6, 0.9).unwrap();
        match locate_sim_point(ds.as_ref(), &slice, &LocateOptions::default()) {
            Err(LocateError::NoInteriorExtremum { boundary, profile }) => {
                assert_eq!(boundary, Some(0.6));
                assert_eq!(profile.values.len(), 64);
            }
            other => panic!("expected boundary report, got {other:?}"),
        }
    }

    #[test]
    fn multi_dimensional_subspace_maximum_dominates_members() {
        let m = crate::models::Model::new(crate::tests_support::Coupled3);
        let p = ExtendedPoint::new(&[0.4, -0.2, 0.7], 0.0);
        let b = CurvatureBundle::compute(&m, &p).unwrap();
        let vs = [TangentVector::pure_state(&[1.0, 0.2, 0.0]), TangentVector::pure_state(&[0.0, 1.0, -0.5])];
        let theta = max_stretching_over(&b, &vs).unwrap();
        for t in 0..50 {
            let a = (t as f64) * 0.13;
            let v = TangentVector(&vs[0].0 * a.cos() + &vs[1].0 * a.sin());
            assert!(b.geodesic_stretching(&v).unwrap() <= theta + 1e-10);
        }
    }
}
