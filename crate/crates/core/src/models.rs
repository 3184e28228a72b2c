//! Smooth vector fields `ẋ = f(x)` and their derivative oracle.
//!
//! Model formulas are written once, generically over [`Scalar`], so the same
//! code yields values, exact partials (nested duals) and flow jets (Taylor
//! series). The four built-in test models also carry closed-form Jacobians
//! and second derivatives.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{GeoError, Result};
use crate::jet::{self, Dual, Scalar, Taylor};

/// Highest order of mixed partial derivatives [`VectorField::partial_jet`]
/// can produce.
pub const MAX_PARTIAL_ORDER: usize = 3;

/// Derivative orders a model can supply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JetDepth {
    /// Mixed partials of `f` up to this order.
    pub partial: usize,
    /// Flow derivatives `∇_f^(k) f` for `k` up to this order.
    pub flow: usize,
}

impl JetDepth {
    pub const UNLIMITED_FLOW: usize = usize::MAX;

    /// Fails with a capability error when fewer than `partial` orders of
    /// mixed partials or `flow` orders of flow derivatives are available.
    pub fn require(&self, partial: usize, flow: usize) -> Result<()> {
        if partial > self.partial {
            return Err(GeoError::Capability { requested: partial, available: self.partial });
        }
        if flow > self.flow {
            return Err(GeoError::Capability { requested: flow, available: self.flow });
        }
        Ok(())
    }
}

/// All mixed partials of `f` at a point up to some order.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialJet {
    pub value: DVector<f64>,
    /// `∂f_i/∂x_j`.
    pub jacobian: DMatrix<f64>,
    /// `second[k][(i, j)] = ∂²f_k/∂x_i∂x_j`, present for order ≥ 2.
    pub second: Option<Vec<DMatrix<f64>>>,
    /// `third[k][i][j][l]`, present for order 3.
    pub third: Option<Vec<Vec<Vec<Vec<f64>>>>>,
}

impl PartialJet {
    pub fn order(&self) -> usize {
        if self.third.is_some() {
            3
        } else if self.second.is_some() {
            2
        } else {
            1
        }
    }
}

/// Object-safe interface every downstream computation consumes.
pub trait VectorField: Send + Sync + Debug {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn jet_depth(&self) -> JetDepth;

    /// Validates `x` against the model's domain.
    fn check_domain(&self, x: &[f64]) -> Result<()>;

    fn eval(&self, x: &[f64]) -> Result<DVector<f64>>;

    fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>>;

    /// One matrix per component `k`, entries `∂²f_k/∂x_i∂x_j`.
    fn hessians(&self, x: &[f64]) -> Result<Vec<DMatrix<f64>>>;

    /// `d^m x/dt^m` along the solution through `x`, for `m = 1..=order`.
    /// Entry `k` (zero based) is the flow derivative `∇_f^(k) f`.
    fn flow_jet(&self, x: &[f64], order: usize) -> Result<Vec<DVector<f64>>>;

    fn partial_jet(&self, x: &[f64], order: usize) -> Result<PartialJet>;
}

/// A field written generically over the scalar type.
pub trait FieldFn: Send + Sync + Debug {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn eval_generic<T: Scalar>(&self, x: &[T]) -> Vec<T>;

    fn check_domain(&self, x: &[f64]) -> Result<()> {
        check_finite(x)
    }

    fn closed_jacobian(&self, _x: &[f64]) -> Option<DMatrix<f64>> {
        None
    }

    fn closed_hessians(&self, _x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        None
    }
}

pub fn check_finite(x: &[f64]) -> Result<()> {
    match x.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(GeoError::Domain { coordinate: i, reason: format!("non-finite value {}", x[i]) }),
        None => Ok(()),
    }
}

/// Adapts a [`FieldFn`] into a [`VectorField`], deriving every jet by
/// forward-mode differentiation unless a closed form is supplied.
#[derive(Debug, Clone)]
pub struct Model<F> {
    field: F,
}

impl<F: FieldFn> Model<F> {
    pub fn new(field: F) -> Self {
        Self { field }
    }

    pub fn field(&self) -> &F {
        &self.field
    }

    fn guard(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.field.dim() {
            return Err(GeoError::Shape { expected: self.field.dim(), got: x.len() });
        }
        self.field.check_domain(x)
    }

    /// Jacobian by dual numbers, ignoring any closed form.
    pub fn jacobian_ad(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.guard(x)?;
        let n = self.field.dim();
        let j = jet::jacobian_by_duals(n, x, |v| self.field.eval_generic(v));
        Ok(DMatrix::from_fn(n, n, |i, k| j[i][k]))
    }

    /// Second partials by nested duals, ignoring any closed form.
    pub fn hessians_ad(&self, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        self.guard(x)?;
        let n = self.field.dim();
        let h = jet::hessians_by_duals(n, x, |v| self.field.eval_generic(v));
        Ok(h.into_iter().map(|hk| DMatrix::from_fn(n, n, |i, j| hk[i][j])).collect())
    }
}

impl<F: FieldFn> VectorField for Model<F> {
    fn name(&self) -> &str {
        self.field.name()
    }

    fn dim(&self) -> usize {
        self.field.dim()
    }

    fn jet_depth(&self) -> JetDepth {
        JetDepth { partial: MAX_PARTIAL_ORDER, flow: JetDepth::UNLIMITED_FLOW }
    }

    fn check_domain(&self, x: &[f64]) -> Result<()> {
        self.guard(x)
    }

    fn eval(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.guard(x)?;
        Ok(DVector::from_vec(self.field.eval_generic(x)))
    }

    fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.guard(x)?;
        match self.field.closed_jacobian(x) {
            Some(j) => Ok(j),
            None => self.jacobian_ad(x),
        }
    }

    fn hessians(&self, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        self.guard(x)?;
        match self.field.closed_hessians(x) {
            Some(h) => Ok(h),
            None => self.hessians_ad(x),
        }
    }

    fn flow_jet(&self, x: &[f64], order: usize) -> Result<Vec<DVector<f64>>> {
        self.guard(x)?;
        let n = self.field.dim();
        let d = jet::flow_derivatives(n, x, order, |v: &[Taylor]| self.field.eval_generic(v));
        Ok(d.into_iter().map(DVector::from_vec).collect())
    }

    fn partial_jet(&self, x: &[f64], order: usize) -> Result<PartialJet> {
        if order == 0 {
            return Err(GeoError::Parameter("jet order must be at least 1".into()));
        }
        if order > MAX_PARTIAL_ORDER {
            return Err(GeoError::Capability { requested: order, available: MAX_PARTIAL_ORDER });
        }
        let n = self.field.dim();
        let value = self.eval(x)?;
        let jacobian = self.jacobian(x)?;
        let second = if order >= 2 { Some(self.hessians(x)?) } else { None };
        let third = if order >= 3 {
            Some(jet::third_partials_by_duals(n, x, |v: &[Dual<Dual<Dual<f64>>>]| {
                self.field.eval_generic(v)
            }))
        } else {
            None
        };
        Ok(PartialJet { value, jacobian, second, third })
    }
}

/// `ẋ = A x` with `A = [[-1-γ, γ], [γ, -1-γ]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearModel {
    pub gamma: f64,
}

impl LinearModel {
    pub fn matrix(&self) -> DMatrix<f64> {
        let g = self.gamma;
        DMatrix::from_row_slice(2, 2, &[-1.0 - g, g, g, -1.0 - g])
    }
}

impl FieldFn for LinearModel {
    fn name(&self) -> &str {
        "linear"
    }

    fn dim(&self) -> usize {
        2
    }

    fn eval_generic<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        let d = -1.0 - self.gamma;
        vec![
            x[0].scale(d) + x[1].scale(self.gamma),
            x[0].scale(self.gamma) + x[1].scale(d),
        ]
    }

    fn closed_jacobian(&self, _x: &[f64]) -> Option<DMatrix<f64>> {
        Some(self.matrix())
    }

    fn closed_hessians(&self, _x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        Some(vec![DMatrix::zeros(2, 2); 2])
    }
}

/// Davis-Skodje model; `η > 1` sets the time-scale separation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DavisSkodje {
    pub eta: f64,
}

impl FieldFn for DavisSkodje {
    fn name(&self) -> &str {
        "davis-skodje"
    }

    fn dim(&self) -> usize {
        2
    }

    fn check_domain(&self, x: &[f64]) -> Result<()> {
        check_finite(x)?;
        if (1.0 + x[0]).abs() < 1e-12 {
            return Err(GeoError::Domain { coordinate: 0, reason: "pole at x1 = -1".into() });
        }
        Ok(())
    }

    fn eval_generic<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        let eta = self.eta;
        let x1 = x[0].clone();
        let num = x1.scale(eta - 1.0) + (x1.clone() * x1.clone()).scale(eta);
        let den = x1.add_f64(1.0).powi(2);
        vec![-x1, x[1].scale(-eta) + num / den]
    }

    fn closed_jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let (eta, x1) = (self.eta, x[0]);
        let dq = ((eta - 1.0) + (eta + 1.0) * x1) / (1.0 + x1).powi(3);
        Some(DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, dq, -eta]))
    }

    fn closed_hessians(&self, x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        let (eta, x1) = (self.eta, x[0]);
        let ddq = -2.0 * ((eta - 2.0) + (eta + 1.0) * x1) / (1.0 + x1).powi(4);
        Some(vec![
            DMatrix::zeros(2, 2),
            DMatrix::from_row_slice(2, 2, &[ddq, 0.0, 0.0, 0.0]),
        ])
    }
}

/// Michaelis-Menten enzyme kinetics, fast `x1`, slow `x2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MichaelisMenten {
    pub kappa: f64,
    pub lambda: f64,
    pub epsilon: f64,
}

impl FieldFn for MichaelisMenten {
    fn name(&self) -> &str {
        "michaelis-menten"
    }

    fn dim(&self) -> usize {
        2
    }

    fn eval_generic<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        let (x1, x2) = (x[0].clone(), x[1].clone());
        let f1 = x2.clone() - x2.add_f64(self.kappa) * x1.clone();
        let f2 = (-x2.clone() + x2.add_f64(self.kappa - self.lambda) * x1).scale(self.epsilon);
        vec![f1, f2]
    }

    fn closed_jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let (x1, x2) = (x[0], x[1]);
        let e = self.epsilon;
        Some(DMatrix::from_row_slice(
            2,
            2,
            &[-(x2 + self.kappa), 1.0 - x1, e * (x2 + self.kappa - self.lambda), e * (x1 - 1.0)],
        ))
    }

    fn closed_hessians(&self, _x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        let e = self.epsilon;
        Some(vec![
            DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[0.0, e, e, 0.0]),
        ])
    }
}

/// Reduced two-species mechanism with state ordering `(c3, c1)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Chiavazzo;

impl FieldFn for Chiavazzo {
    fn name(&self) -> &str {
        "chiavazzo"
    }

    fn dim(&self) -> usize {
        2
    }

    fn eval_generic<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        let (c3, c1) = (x[0].clone(), x[1].clone());
        let dc3 = (c3.clone() * c3.clone() - c3.scale(2.1)).add_f64(0.2);
        let dc1 = c3.scale(0.5) + c1.clone() * c3 - c1.scale(0.2);
        vec![dc3, dc1]
    }

    fn closed_jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let (c3, c1) = (x[0], x[1]);
        Some(DMatrix::from_row_slice(2, 2, &[2.0 * c3 - 2.1, 0.0, 0.5 + c1, c3 - 0.2]))
    }

    fn closed_hessians(&self, _x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        Some(vec![
            DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
        ])
    }
}

/// Constant field `f ≡ c`; its f-manifold is flat.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantField {
    pub value: Vec<f64>,
}

impl FieldFn for ConstantField {
    fn name(&self) -> &str {
        "constant"
    }

    fn dim(&self) -> usize {
        self.value.len()
    }

    fn eval_generic<T: Scalar>(&self, _x: &[T]) -> Vec<T> {
        self.value.iter().map(|&c| T::constant(c)).collect()
    }

    fn closed_jacobian(&self, _x: &[f64]) -> Option<DMatrix<f64>> {
        let n = self.value.len();
        Some(DMatrix::zeros(n, n))
    }

    fn closed_hessians(&self, _x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        let n = self.value.len();
        Some(vec![DMatrix::zeros(n, n); n])
    }
}

/// Named scalar model parameters, with the library defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    values: BTreeMap<String, f64>,
}

impl Default for ModelParameters {
    fn default() -> Self {
        let mut values = BTreeMap::new();
        values.insert("gamma".into(), 3.0);
        values.insert("eta".into(), 3.0);
        values.insert("kappa".into(), 0.5);
        values.insert("lambda".into(), 1.0);
        values.insert("epsilon".into(), 1.0 / 3.0);
        Self { values }
    }
}

impl ModelParameters {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.values.insert(canonical_param(name).to_string(), value);
    }

    /// Applies a `name=value` override.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (name, value) = spec
            .split_once('=')
            .ok_or_else(|| GeoError::Parameter(format!("expected name=value, got `{spec}`")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| GeoError::Parameter(format!("`{}` is not a number", value.trim())))?;
        self.set(name.trim(), value);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.values.iter().map(|(k, v)| (k.as_str(), *v))
    }

    fn require(&self, name: &str) -> Result<f64> {
        self.get(name).ok_or_else(|| GeoError::Parameter(format!("missing parameter `{name}`")))
    }
}

fn canonical_param(name: &str) -> &str {
    match name {
        "γ" | "g" => "gamma",
        "η" => "eta",
        "κ" | "k" => "kappa",
        "λ" | "l" => "lambda",
        "ε" | "eps" => "epsilon",
        other => other,
    }
}

/// Built-in model identifiers accepted by [`builtin`].
pub const BUILTIN_IDS: [&str; 5] = ["linear", "davis-skodje", "michaelis-menten", "chiavazzo", "constant"];

/// Builds a built-in model by id, validating its parameter constraints.
///
/// `constant` reads its components from `c1`, `c2`, … (default `(1, 0.5)`).
pub fn builtin(id: &str, params: &ModelParameters) -> Result<Arc<dyn VectorField>> {
    match id {
        "linear" => {
            let gamma = params.require("gamma")?;
            if !gamma.is_finite() {
                return Err(GeoError::Parameter("gamma must be a real number".into()));
            }
            Ok(Arc::new(Model::new(LinearModel { gamma })))
        }
        "davis-skodje" => {
            let eta = params.require("eta")?;
            if !(eta > 1.0 && eta.is_finite()) {
                return Err(GeoError::Parameter(format!("Davis-Skodje needs eta > 1, got {eta}")));
            }
            Ok(Arc::new(Model::new(DavisSkodje { eta })))
        }
        "michaelis-menten" => {
            let kappa = params.require("kappa")?;
            let lambda = params.require("lambda")?;
            let epsilon = params.require("epsilon")?;
            if !(lambda > kappa && kappa > 0.0 && epsilon > 0.0) {
                return Err(GeoError::Parameter(format!(
                    "Michaelis-Menten needs lambda > kappa > 0 and epsilon > 0, got kappa={kappa}, lambda={lambda}, epsilon={epsilon}"
                )));
            }
            Ok(Arc::new(Model::new(MichaelisMenten { kappa, lambda, epsilon })))
        }
        "chiavazzo" => Ok(Arc::new(Model::new(Chiavazzo))),
        "constant" => {
            let mut value = Vec::new();
            for i in 1.. {
                match params.get(&format!("c{i}")) {
                    Some(v) => value.push(v),
                    None => break,
                }
            }
            if value.is_empty() {
                value = vec![1.0, 0.5];
            }
            Ok(Arc::new(Model::new(ConstantField { value })))
        }
        other => Err(GeoError::UnknownModel(other.to_string())),
    }
}

/// Exact slow manifold of Davis-Skodje, `x2 = x1/(1+x1)`.
pub fn ds_sim_graph(x1: f64) -> Result<f64> {
    if !(x1 > -1.0) || !x1.is_finite() {
        return Err(GeoError::Domain { coordinate: 0, reason: format!("graph defined for x1 > -1, got {x1}") });
    }
    Ok(x1 / (1.0 + x1))
}

/// Three-term slow-manifold series `h0 + ε h1 + ε² h2` of Michaelis-Menten,
/// giving the fast coordinate `x1` as a function of the slow `x2`.
pub fn mm_truncated_series(x2: f64, params: &MichaelisMenten) -> Result<f64> {
    let (k, l, e) = (params.kappa, params.lambda, params.epsilon);
    let s = x2 + k;
    if s.abs() < 1e-14 {
        return Err(GeoError::Domain { coordinate: 1, reason: "pole at x2 = -kappa".into() });
    }
    let h0 = x2 / s;
    let h1 = k * l * x2 / s.powi(4);
    let h2 = k * l * x2 * (2.0 * k * l - 3.0 * l * x2 - k * x2 - k * k) / s.powi(7);
    Ok(h0 + e * h1 + e * e * h2)
}

/// Convenience: evaluate any model's field.
pub fn eval_field(model: &dyn VectorField, x: &[f64]) -> Result<DVector<f64>> {
    model.eval(x)
}

/// Mixed partials of `f` up to `order`.
pub fn eval_jets(model: &dyn VectorField, x: &[f64], order: usize) -> Result<PartialJet> {
    model.partial_jet(x, order)
}
