//! The f-manifold: extended phase space `E × ℝ` with the metric built from `f`.
//!
//! In coordinates `(x_1, …, x_n, τ)` the metric reads
//!
//! ```text
//! g = [[ Id_n , -f      ],
//!      [ -fᵀ  , 1 + |f|² ]]
//! ```
//!
//! with inverse `[[Id_n + f fᵀ, f], [fᵀ, 1]]` and determinant one.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{GeoError, Result};
use crate::models::{FieldFn, JetDepth, VectorField};

/// A point `p = (x, τ)` of extended phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedPoint {
    pub x: DVector<f64>,
    pub tau: f64,
}

impl ExtendedPoint {
    pub fn new(x: &[f64], tau: f64) -> Self {
        Self { x: DVector::from_column_slice(x), tau }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn state(&self) -> &[f64] {
        self.x.as_slice()
    }

    /// Coordinates `(x_1, …, x_n, τ)`.
    pub fn coordinates(&self) -> DVector<f64> {
        let n = self.x.len();
        DVector::from_fn(n + 1, |i, _| if i < n { self.x[i] } else { self.tau })
    }
}

/// Components of a tangent vector in the basis `∂_1, …, ∂_n, ∂_τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector(pub DVector<f64>);

impl TangentVector {
    pub fn new(components: &[f64]) -> Self {
        Self(DVector::from_column_slice(components))
    }

    /// Lifts a state-space vector to the pure-state tangent vector with
    /// vanishing time component.
    pub fn pure_state(v: &[f64]) -> Self {
        let n = v.len();
        Self(DVector::from_fn(n + 1, |i, _| if i < n { v[i] } else { 0.0 }))
    }

    /// The coordinate basis vector `∂_i` of an `(n+1)`-dimensional tangent space.
    pub fn basis(n_plus_one: usize, i: usize) -> Self {
        Self(DVector::from_fn(n_plus_one, |k, _| if k == i { 1.0 } else { 0.0 }))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn time_component(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    pub fn is_pure_state(&self) -> bool {
        self.time_component() == 0.0
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(&self.0 * c)
    }

    pub fn components(&self) -> &DVector<f64> {
        &self.0
    }
}

/// Metric components at a point together with their inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricValue {
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
}

impl MetricValue {
    /// Metric of the f-manifold for a given field value `f(x)`.
    pub fn from_field_value(f: &DVector<f64>) -> Self {
        let n = f.len();
        let norm2 = f.norm_squared();
        let g = DMatrix::from_fn(n + 1, n + 1, |i, j| match (i < n, j < n) {
            (true, true) => {
                if i == j {
                    1.0
                } else {
                    0.0
                }
            }
            (true, false) => -f[i],
            (false, true) => -f[j],
            (false, false) => 1.0 + norm2,
        });
        let g_inv = DMatrix::from_fn(n + 1, n + 1, |i, j| match (i < n, j < n) {
            (true, true) => f[i] * f[j] + if i == j { 1.0 } else { 0.0 },
            (true, false) => f[i],
            (false, true) => f[j],
            (false, false) => 1.0,
        });
        Self { g, g_inv }
    }

    /// Flat metric of dimension `dim`.
    pub fn euclidean(dim: usize) -> Self {
        Self { g: DMatrix::identity(dim, dim), g_inv: DMatrix::identity(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn determinant(&self) -> f64 {
        self.g.determinant()
    }
}

impl fmt::Display for MetricValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.g.nrows() {
            let row: Vec<String> = (0..self.g.ncols()).map(|j| format!("{:.17e}", self.g[(i, j)])).collect();
            writeln!(f, "{}", row.join(","))?;
        }
        Ok(())
    }
}

pub fn metric_at(model: &dyn VectorField, p: &ExtendedPoint) -> Result<MetricValue> {
    let f = model.eval(p.state())?;
    Ok(MetricValue::from_field_value(&f))
}

/// `g(v, w) = vᵀ G w`.
pub fn metric_apply(gv: &MetricValue, v: &TangentVector, w: &TangentVector) -> Result<f64> {
    let n = gv.dim();
    for t in [v, w] {
        if t.dim() != n {
            return Err(GeoError::Shape { expected: n, got: t.dim() });
        }
    }
    Ok(v.0.dot(&(&gv.g * &w.0)))
}

/// The flow direction `𝒯 = Σ f_k ∂_k + ∂_τ`.
pub fn tangent_lift(model: &dyn VectorField, p: &ExtendedPoint) -> Result<TangentVector> {
    let f = model.eval(p.state())?;
    Ok(tangent_from_field_value(&f))
}

pub fn tangent_from_field_value(f: &DVector<f64>) -> TangentVector {
    let n = f.len();
    TangentVector(DVector::from_fn(n + 1, |i, _| if i < n { f[i] } else { 1.0 }))
}

/// Diagonal coordinate change `y_k = a_k x_k`, time left unscaled.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalRescaling {
    factors: Vec<f64>,
}

impl DiagonalRescaling {
    /// `factors` holds `a_1 … a_n`; the time factor is fixed to one.
    pub fn new(factors: &[f64]) -> Result<Self> {
        if let Some(i) = factors.iter().position(|a| *a == 0.0 || !a.is_finite()) {
            return Err(GeoError::Parameter(format!("rescaling factor a{} must be nonzero and finite", i + 1)));
        }
        Ok(Self { factors: factors.to_vec() })
    }

    pub fn state_factors(&self) -> &[f64] {
        &self.factors
    }

    /// All `n+1` factors, the last one being the time factor `1`.
    pub fn extended_factors(&self) -> Vec<f64> {
        let mut a = self.factors.clone();
        a.push(1.0);
        a
    }

    pub fn inverse(&self) -> Self {
        Self { factors: self.factors.iter().map(|a| 1.0 / a).collect() }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.factors).map(|(x, a)| x * a).collect()
    }

    pub fn unapply(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.factors).map(|(y, a)| y / a).collect()
    }
}

/// Components of the same metric tensor in the rescaled chart:
/// `g_ij / (a_i a_j)`.
pub fn rescale_coefficients(g: &DMatrix<f64>, r: &DiagonalRescaling) -> Result<DMatrix<f64>> {
    let a = r.extended_factors();
    if g.nrows() != a.len() || g.ncols() != a.len() {
        return Err(GeoError::Shape { expected: a.len(), got: g.nrows() });
    }
    Ok(DMatrix::from_fn(a.len(), a.len(), |i, j| g[(i, j)] / (a[i] * a[j])))
}

/// The system `ẏ = a · f(x(y))` declared as a new parent system.
#[derive(Debug)]
pub struct RescaledField<M> {
    inner: M,
    rescaling: DiagonalRescaling,
    name: String,
}

impl<M: VectorField> RescaledField<M> {
    pub fn new(inner: M, rescaling: DiagonalRescaling) -> Result<Self> {
        if rescaling.state_factors().len() != inner.dim() {
            return Err(GeoError::Shape { expected: inner.dim(), got: rescaling.state_factors().len() });
        }
        let name = format!("{}-rescaled", inner.name());
        Ok(Self { inner, rescaling, name })
    }

    pub fn rescaling(&self) -> &DiagonalRescaling {
        &self.rescaling
    }

    fn scale_vec(&self, v: DVector<f64>) -> DVector<f64> {
        DVector::from_fn(v.len(), |i, _| v[i] * self.rescaling.factors[i])
    }
}

impl<M: VectorField> VectorField for RescaledField<M> {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn jet_depth(&self) -> JetDepth {
        JetDepth { partial: 2, flow: self.inner.jet_depth().flow }
    }

    fn check_domain(&self, y: &[f64]) -> Result<()> {
        self.inner.check_domain(&self.rescaling.unapply(y))
    }

    fn eval(&self, y: &[f64]) -> Result<DVector<f64>> {
        Ok(self.scale_vec(self.inner.eval(&self.rescaling.unapply(y))?))
    }

    fn jacobian(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        let a = &self.rescaling.factors;
        let j = self.inner.jacobian(&self.rescaling.unapply(y))?;
        Ok(DMatrix::from_fn(j.nrows(), j.ncols(), |i, k| a[i] * j[(i, k)] / a[k]))
    }

    fn hessians(&self, y: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        let a = &self.rescaling.factors;
        let h = self.inner.hessians(&self.rescaling.unapply(y))?;
        Ok(h.into_iter()
            .enumerate()
            .map(|(k, hk)| DMatrix::from_fn(hk.nrows(), hk.ncols(), |i, j| a[k] * hk[(i, j)] / (a[i] * a[j])))
            .collect())
    }

    fn flow_jet(&self, y: &[f64], order: usize) -> Result<Vec<DVector<f64>>> {
        let jets = self.inner.flow_jet(&self.rescaling.unapply(y), order)?;
        Ok(jets.into_iter().map(|d| self.scale_vec(d)).collect())
    }

    fn partial_jet(&self, y: &[f64], order: usize) -> Result<crate::models::PartialJet> {
        if order > 2 {
            return Err(GeoError::Capability { requested: order, available: 2 });
        }
        Ok(crate::models::PartialJet {
            value: self.eval(y)?,
            jacobian: self.jacobian(y)?,
            second: if order >= 2 { Some(self.hessians(y)?) } else { None },
            third: None,
        })
    }
}

impl<F: FieldFn> crate::models::Model<F> {
    /// Wraps the model as the rescaled parent system `ẏ = a·f(x(y))`.
    pub fn rescaled(self, a: &[f64]) -> Result<RescaledField<Self>> {
        RescaledField::new(self, DiagonalRescaling::new(a)?)
    }
}
