//! Flow curvature method in the flat metric, and its Gramian form.
//!
//! The flow matrix collects the successive flat covariant derivatives
//! `∇_f^(0) f, …, ∇_f^(n-1) f`, which equal the time derivatives
//! `ẋ, …, x^(n)` along the solution. `Ψ = det M` vanishes on the
//! flow-curvature manifold.

use nalgebra::{DMatrix, DVector};

use crate::error::{GeoError, Result};
use crate::jet::{self, Dual, Taylor};
use crate::models::{FieldFn, VectorField};
use crate::search::{bisect, uniform_grid};
use crate::stretching::Slice;

/// `∇_f^(k) f` at `x`; `k = 0` gives `f(x)`.
pub fn covariant_flow_derivative(model: &dyn VectorField, x: &[f64], k: usize) -> Result<DVector<f64>> {
    model.jet_depth().require(0, k)?;
    if k == 0 {
        return model.eval(x);
    }
    let mut jets = model.flow_jet(x, k + 1)?;
    Ok(jets.swap_remove(k))
}

/// Columns `∇_f^(0) f, …, ∇_f^(n-1) f` at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMatrix {
    pub columns: DMatrix<f64>,
}

impl FlowMatrix {
    pub fn at(model: &dyn VectorField, x: &[f64]) -> Result<Self> {
        let n = model.dim();
        model.jet_depth().require(0, n.saturating_sub(1))?;
        let jets = model.flow_jet(x, n)?;
        Ok(Self { columns: DMatrix::from_columns(&jets) })
    }

    pub fn column(&self, k: usize) -> DVector<f64> {
        self.columns.column(k).into_owned()
    }

    pub fn psi(&self) -> f64 {
        self.columns.determinant()
    }
}

/// `Ψ(x) = det(ẋ, ẍ, …, x^(n))`.
pub fn psi(model: &dyn VectorField, x: &[f64]) -> Result<f64> {
    Ok(FlowMatrix::at(model, x)?.psi())
}

/// Gram matrix `(⟨v_i, v_j⟩)` of a family in the flat metric.
pub fn gramian(vectors: &[DVector<f64>]) -> Result<DMatrix<f64>> {
    let m = vectors.len();
    if let Some(first) = vectors.first() {
        if let Some(bad) = vectors.iter().find(|v| v.len() != first.len()) {
            return Err(GeoError::Shape { expected: first.len(), got: bad.len() });
        }
    }
    Ok(DMatrix::from_fn(m, m, |i, j| vectors[i].dot(&vectors[j])))
}

/// Round-off allowance for a negative Gram determinant.
pub const GRAM_NEGATIVE_TOL: f64 = 1e-12;

/// `D = sqrt(det G)` for `n` vectors of dimension `n`.
pub fn gramian_det(vectors: &[DVector<f64>]) -> Result<f64> {
    let n = vectors.len();
    if let Some(bad) = vectors.iter().find(|v| v.len() != n) {
        return Err(GeoError::Shape { expected: n, got: bad.len() });
    }
    let det = gramian(vectors)?.determinant();
    if det < -GRAM_NEGATIVE_TOL {
        return Err(GeoError::Numerical(format!("Gram determinant {det:e} is negative")));
    }
    Ok(det.max(0.0).sqrt())
}

/// Flat covariant derivative `∇_f h = J_h f`; the euclidean Christoffel
/// symbols vanish.
pub fn flat_covariant_derivative<H: FieldFn>(h: &H, f: &DVector<f64>, x: &[f64]) -> DVector<f64> {
    let n = x.len();
    let jac = jet::jacobian_by_duals(n, x, |v: &[Dual<f64>]| h.eval_generic(v));
    DVector::from_fn(jac.len(), |k, _| (0..n).map(|i| f[i] * jac[k][i]).sum::<f64>())
}

/// Flow derivative `d/dt h(x(t))` at `t = 0`, from the first-order Taylor
/// series of the solution through `x`.
pub fn flow_derivative_of<H: FieldFn>(h: &H, f: &DVector<f64>, x: &[f64]) -> DVector<f64> {
    let input: Vec<Taylor> = x.iter().zip(f.iter()).map(|(&xi, &fi)| Taylor::new(vec![xi, fi])).collect();
    let out = h.eval_generic(&input);
    DVector::from_iterator(out.len(), out.iter().map(|t| t.coeff(1)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootMethod {
    Bisect,
    Dip,
}

impl RootMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Bisect => "bisect",
            Self::Dip => "dip",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcmRoot {
    pub coordinate: f64,
    /// Sign of `dΨ/ds` across the root; zero for dips.
    pub slope_sign: i8,
    pub method: RootMethod,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiProfile {
    pub coordinates: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroSet {
    pub roots: Vec<FcmRoot>,
    pub profile: PsiProfile,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FcmError {
    #[error("Ψ vanishes identically on the slice (max |Ψ| = {max_abs:e})")]
    DegenerateSlice { max_abs: f64, profile: PsiProfile },
    #[error(transparent)]
    Geo(#[from] GeoError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FcmOptions {
    pub grid: usize,
    pub tolerance: f64,
}

impl Default for FcmOptions {
    fn default() -> Self {
        Self { grid: 256, tolerance: 1e-10 }
    }
}

pub const DEGENERATE_PSI: f64 = 1e-13;
pub const DIP_THRESHOLD: f64 = 1e-10;

/// Brackets sign changes of `Ψ` along the slice and refines them.
pub fn fcm_zero_set(model: &dyn VectorField, slice: &Slice, options: &FcmOptions) -> std::result::Result<ZeroSet, FcmError> {
    model.jet_depth().require(0, model.dim().saturating_sub(1))?;
    if options.grid < 2 {
        return Err(GeoError::Parameter("FCM grid needs at least 2 points".into()).into());
    }
    let eval = |s: f64| psi(model, &slice.point(s));
    let coords = uniform_grid(slice.lower, slice.upper, options.grid);
    let values = coords.iter().map(|&s| eval(s)).collect::<Result<Vec<f64>>>()?;
    let profile = PsiProfile { coordinates: coords.clone(), values: values.clone() };
    let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max_abs < DEGENERATE_PSI {
        return Err(FcmError::DegenerateSlice { max_abs, profile });
    }

    let mut roots = Vec::new();
    for i in 0..coords.len() {
        let v = values[i];
        if v == 0.0 {
            let before = if i > 0 { values[i - 1] } else { 0.0 };
            let after = if i + 1 < values.len() { values[i + 1] } else { 0.0 };
            let slope = (after - before).signum() as i8;
            roots.push(FcmRoot { coordinate: coords[i], slope_sign: slope, method: RootMethod::Bisect });
            continue;
        }
        if i + 1 < coords.len() {
            let w = values[i + 1];
            if w != 0.0 && (v < 0.0) != (w < 0.0) {
                let f = |s: f64| eval(s).unwrap_or(f64::NAN);
                let r = bisect(f, coords[i], coords[i + 1], options.tolerance);
                roots.push(FcmRoot {
                    coordinate: r,
                    slope_sign: if w > v { 1 } else { -1 },
                    method: RootMethod::Bisect,
                });
            }
        }
        if i > 0 && i + 1 < coords.len() && v.abs() < DIP_THRESHOLD {
            let (a, b) = (values[i - 1], values[i + 1]);
            let same_sign = (a < 0.0) == (v < 0.0) && (b < 0.0) == (v < 0.0);
            if same_sign && v.abs() <= a.abs() && v.abs() <= b.abs() {
                roots.push(FcmRoot { coordinate: coords[i], slope_sign: 0, method: RootMethod::Dip });
            }
        }
    }
    Ok(ZeroSet { roots, profile })
}

/// Both sides of `∇_f h = d/dt h(x(t))` at `x`.
pub fn lemma_pair<H: FieldFn>(h: &H, model: &dyn VectorField, x: &[f64]) -> Result<(DVector<f64>, DVector<f64>)> {
    let f = model.eval(x)?;
    Ok((flat_covariant_derivative(h, &f, x), flow_derivative_of(h, &f, x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{builtin, ConstantField, Model, ModelParameters};

    fn lin() -> std::sync::Arc<dyn VectorField> {
        builtin("linear", &ModelParameters::default()).unwrap()
    }

    #[test]
    fn covariant_derivatives_of_linear_model() {
        let m = lin();
        assert_eq!(covariant_flow_derivative(m.as_ref(), &[1.0, 0.0], 0).unwrap().as_slice(), &[-4.0, 3.0]);
        assert_eq!(covariant_flow_derivative(m.as_ref(), &[1.0, 0.0], 1).unwrap().as_slice(), &[25.0, -24.0]);
        let c = Model::new(ConstantField { value: vec![0.5, 2.0] });
        for k in 1..4 {
            assert_eq!(covariant_flow_derivative(&c, &[0.3, 0.1], k).unwrap().norm(), 0.0);
        }
    }

    #[test]
    fn psi_examples() {
        let m = lin();
        assert!((psi(m.as_ref(), &[1.0, 0.0]).unwrap() - 21.0).abs() < 1e-12);
        for c in [-2.0, 0.5, 3.0] {
            assert!(psi(m.as_ref(), &[c, c]).unwrap().abs() < 1e-12);
        }
        let c = Model::new(ConstantField { value: vec![0.5, 2.0] });
        assert_eq!(psi(&c, &[1.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn gramian_examples() {
        let e = [DVector::from_vec(vec![1.0, 0.0]), DVector::from_vec(vec![0.0, 1.0])];
        assert_eq!(gramian(&e).unwrap(), DMatrix::identity(2, 2));
        assert_eq!(gramian_det(&e).unwrap(), 1.0);
        let dep = [DVector::from_vec(vec![1.0, 2.0]), DVector::from_vec(vec![-2.0, -4.0])];
        assert_eq!(gramian_det(&dep).unwrap(), 0.0);
        let fm = FlowMatrix::at(lin().as_ref(), &[1.0, 0.0]).unwrap();
        let d = gramian_det(&[fm.column(0), fm.column(1)]).unwrap();
        assert!((d - 21.0).abs() < 1e-9);
        let bad = [DVector::from_vec(vec![1.0, 2.0]), DVector::from_vec(vec![1.0])];
        assert!(matches!(gramian_det(&bad), Err(GeoError::Shape { .. })));
    }

    #[test]
    fn zero_set_of_linear_slice() {
        let slice = Slice::new(vec![1.0, 0.0], 1, -2.0, 2.0).unwrap();
        let zs = fcm_zero_set(lin().as_ref(), &slice, &FcmOptions::default()).unwrap();
        let roots: Vec<f64> = zs.roots.iter().map(|r| r.coordinate).collect();
        assert_eq!(roots.len(), 2);
        assert!((roots[0] + 1.0).abs() < 1e-8);
        assert!((roots[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn constant_field_slice_is_degenerate() {
        let c = Model::new(ConstantField { value: vec![0.5, 2.0] });
        let slice = Slice::new(vec![1.0, 0.0], 1, -2.0, 2.0).unwrap();
        assert!(matches!(
            fcm_zero_set(&c, &slice, &FcmOptions::default()),
            Err(FcmError::DegenerateSlice { .. })
        ));
    }

    #[test]
    fn davis_skodje_flow_curvature_root() {
        let ds = builtin("davis-skodje", &ModelParameters::default()).unwrap();
        let slice = Slice::new(vec![1.0, 0.0], 1, 0.4, 0.6).unwrap();
        let zs = fcm_zero_set(ds.as_ref(), &slice, &FcmOptions::default()).unwrap();
        assert_eq!(zs.roots.len(), 1);
        // frozen from an independent symbolic evaluation of det(f, J f)
        assert!((zs.roots[0].coordinate - 0.5416666666666667).abs() < 1e-9);
    }
}
