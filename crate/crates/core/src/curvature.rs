//! Levi-Civita connection and curvature of the f-manifold.
//!
//! Index conventions (all indices zero based, `N = n + 1`, last index is τ):
//!
//! - `Γ^k_ij` is stored as `christoffel[(k, i, j)]`.
//! - `R(u, v)w = ∇_u∇_v w − ∇_v∇_u w − ∇_[u,v] w`, with components
//!   `R(∂_i, ∂_j)∂_k = R^l_ijk ∂_l` stored as `riemann[(l, i, j, k)]` and
//!   `R^l_ijk = ∂_iΓ^l_jk − ∂_jΓ^l_ik + Γ^l_im Γ^m_jk − Γ^l_jm Γ^m_ik`.
//! - The f-deviation is `S(v) = R(𝒯, v)𝒯`.
//!
//! With this sign the Davis-Skodje slice at `η = 3, x = (1, 0.5)` gives the
//! positive tangential rate `0.947610294117647`; the opposite convention
//! flips every stretching value.

use nalgebra::{DMatrix, DVector};

use crate::error::{GeoError, Result};
use crate::fmanifold::{tangent_from_field_value, ExtendedPoint, MetricValue, TangentVector};
use crate::models::VectorField;

/// Dense rank-3 array `a[(k, i, j)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dim: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim * dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn idx(&self, k: usize, i: usize, j: usize) -> usize {
        (k * self.dim + i) * self.dim + j
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// The `N × N` slice at fixed first index.
    pub fn slice(&self, k: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self[(k, i, j)])
    }
}

impl std::ops::Index<(usize, usize, usize)> for Tensor3 {
    type Output = f64;
    fn index(&self, (k, i, j): (usize, usize, usize)) -> &f64 {
        &self.data[self.idx(k, i, j)]
    }
}

impl std::ops::IndexMut<(usize, usize, usize)> for Tensor3 {
    fn index_mut(&mut self, (k, i, j): (usize, usize, usize)) -> &mut f64 {
        let at = self.idx(k, i, j);
        &mut self.data[at]
    }
}

/// Dense rank-4 array `a[(a, b, c, d)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    dim: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim.pow(4)] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn idx(&self, a: usize, b: usize, c: usize, d: usize) -> usize {
        ((a * self.dim + b) * self.dim + c) * self.dim + d
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

impl std::ops::Index<(usize, usize, usize, usize)> for Tensor4 {
    type Output = f64;
    fn index(&self, (a, b, c, d): (usize, usize, usize, usize)) -> &f64 {
        &self.data[self.idx(a, b, c, d)]
    }
}

impl std::ops::IndexMut<(usize, usize, usize, usize)> for Tensor4 {
    fn index_mut(&mut self, (a, b, c, d): (usize, usize, usize, usize)) -> &mut f64 {
        let at = self.idx(a, b, c, d);
        &mut self.data[at]
    }
}

/// Sign convention for the curvature operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RiemannConvention {
    /// `R(u,v) = ∇_u∇_v − ∇_v∇_u − ∇_[u,v]`.
    #[default]
    Standard,
    /// The negated operator. Only useful to demonstrate sign sensitivity.
    Flipped,
}

impl RiemannConvention {
    fn sign(self) -> f64 {
        match self {
            Self::Standard => 1.0,
            Self::Flipped => -1.0,
        }
    }
}

/// Pointwise jet data of `f` that all closed forms are built from.
struct FieldJet {
    f: DVector<f64>,
    jac: DMatrix<f64>,
    hess: Vec<DMatrix<f64>>,
}

impl FieldJet {
    fn first(model: &dyn VectorField, x: &[f64]) -> Result<Self> {
        Ok(Self { f: model.eval(x)?, jac: model.jacobian(x)?, hess: Vec::new() })
    }

    fn second(model: &dyn VectorField, x: &[f64]) -> Result<Self> {
        model.jet_depth().require(2, 0)?;
        Ok(Self { f: model.eval(x)?, jac: model.jacobian(x)?, hess: model.hessians(x)? })
    }

    fn n(&self) -> usize {
        self.f.len()
    }

    /// `w_j = Σ_μ f_μ (∂_μ f_j + ∂_j f_μ)`.
    fn w(&self, j: usize) -> f64 {
        (0..self.n()).map(|mu| self.f[mu] * (self.jac[(j, mu)] + self.jac[(mu, j)])).sum()
    }

    /// `∂_m w_j`.
    fn dw(&self, j: usize, m: usize) -> f64 {
        (0..self.n())
            .map(|mu| {
                self.jac[(mu, m)] * (self.jac[(j, mu)] + self.jac[(mu, j)])
                    + self.f[mu] * (self.hess[j][(mu, m)] + self.hess[mu][(j, m)])
            })
            .sum()
    }

    /// `c = fᵀ J f`.
    fn c(&self) -> f64 {
        self.f.dot(&(&self.jac * &self.f))
    }

    /// `∂_m (fᵀ J f)`.
    fn dc(&self, m: usize) -> f64 {
        let n = self.n();
        let mut acc = 0.0;
        for a in 0..n {
            for b in 0..n {
                acc += self.jac[(a, m)] * self.jac[(a, b)] * self.f[b]
                    + self.f[a] * self.hess[a][(b, m)] * self.f[b]
                    + self.f[a] * self.jac[(a, b)] * self.jac[(b, m)];
            }
        }
        acc
    }
}

fn christoffel_from_jet(jet: &FieldJet) -> Tensor3 {
    let n = jet.n();
    let big = n + 1;
    let (f, jac) = (&jet.f, &jet.jac);
    let c = jet.c();
    let w: Vec<f64> = (0..n).map(|j| jet.w(j)).collect();
    let mut gamma = Tensor3::zeros(big);
    for k in 0..big {
        // For the time row the state factor f_k is replaced by one.
        let (fk, state) = if k < n { (f[k], true) } else { (1.0, false) };
        for i in 0..n {
            for j in 0..n {
                gamma[(k, i, j)] = -0.5 * fk * (jac[(i, j)] + jac[(j, i)]);
            }
            let mut mixed = 0.5 * fk * w[i];
            if state {
                mixed += 0.5 * (jac[(i, k)] - jac[(k, i)]);
            }
            gamma[(k, i, n)] = mixed;
            gamma[(k, n, i)] = mixed;
        }
        gamma[(k, n, n)] = if state {
            -fk * c - (0..n).map(|mu| f[mu] * jac[(mu, k)]).sum::<f64>()
        } else {
            -c
        };
    }
    gamma
}

/// `∂_m Γ^k_ij` stored as `d[(m, k, i, j)]`; the τ-derivative row is zero.
fn christoffel_derivatives_from_jet(jet: &FieldJet) -> Tensor4 {
    let n = jet.n();
    let big = n + 1;
    let (f, jac, hess) = (&jet.f, &jet.jac, &jet.hess);
    let c = jet.c();
    let w: Vec<f64> = (0..n).map(|j| jet.w(j)).collect();
    let mut d = Tensor4::zeros(big);
    for m in 0..n {
        let dc = jet.dc(m);
        for k in 0..big {
            let state = k < n;
            let (fk, dfk) = if state { (f[k], jac[(k, m)]) } else { (1.0, 0.0) };
            for i in 0..n {
                for j in 0..n {
                    d[(m, k, i, j)] = -0.5 * dfk * (jac[(i, j)] + jac[(j, i)])
                        - 0.5 * fk * (hess[i][(j, m)] + hess[j][(i, m)]);
                }
                let mut mixed = 0.5 * dfk * w[i] + 0.5 * fk * jet.dw(i, m);
                if state {
                    mixed += 0.5 * (hess[i][(k, m)] - hess[k][(i, m)]);
                }
                d[(m, k, i, n)] = mixed;
                d[(m, k, n, i)] = mixed;
            }
            d[(m, k, n, n)] = if state {
                -dfk * c
                    - fk * dc
                    - (0..n).map(|mu| jac[(mu, m)] * jac[(mu, k)] + f[mu] * hess[mu][(k, m)]).sum::<f64>()
            } else {
                -dc
            };
        }
    }
    d
}

fn riemann_from(gamma: &Tensor3, dgamma: &Tensor4) -> Tensor4 {
    let big = gamma.dim();
    let mut r = Tensor4::zeros(big);
    for l in 0..big {
        for i in 0..big {
            for j in 0..big {
                for k in 0..big {
                    let mut v = dgamma[(i, l, j, k)] - dgamma[(j, l, i, k)];
                    for m in 0..big {
                        v += gamma[(l, i, m)] * gamma[(m, j, k)] - gamma[(l, j, m)] * gamma[(m, i, k)];
                    }
                    r[(l, i, j, k)] = v;
                }
            }
        }
    }
    r
}

/// Christoffel symbols `Γ^k_ij` at `p` from the closed forms in `f` and `J_f`.
pub fn christoffel_at(model: &dyn VectorField, p: &ExtendedPoint) -> Result<Tensor3> {
    Ok(christoffel_from_jet(&FieldJet::first(model, p.state())?))
}

/// `∂_m Γ^k_ij` at `p` as `d[(m, k, i, j)]`, from second derivatives of `f`.
pub fn christoffel_derivatives_at(model: &dyn VectorField, p: &ExtendedPoint) -> Result<Tensor4> {
    Ok(christoffel_derivatives_from_jet(&FieldJet::second(model, p.state())?))
}

/// Riemann components `R^l_ijk` at `p`.
pub fn riemann_at(model: &dyn VectorField, p: &ExtendedPoint) -> Result<Tensor4> {
    let jet = FieldJet::second(model, p.state())?;
    Ok(riemann_from(&christoffel_from_jet(&jet), &christoffel_derivatives_from_jet(&jet)))
}

/// Lowers the first index: `R_{ijkl} = g(R(∂_i, ∂_j)∂_k, ∂_l)` stored at
/// `[(i, j, k, l)]`.
pub fn lower_riemann(riemann: &Tensor4, g: &DMatrix<f64>) -> Tensor4 {
    let big = riemann.dim();
    let mut out = Tensor4::zeros(big);
    for i in 0..big {
        for j in 0..big {
            for k in 0..big {
                for l in 0..big {
                    out[(i, j, k, l)] = (0..big).map(|m| g[(l, m)] * riemann[(m, i, j, k)]).sum();
                }
            }
        }
    }
    out
}

/// Matrix of `v ↦ R(t, v)t` in the coordinate basis.
pub fn deviation_matrix(riemann: &Tensor4, t: &DVector<f64>) -> DMatrix<f64> {
    let big = riemann.dim();
    DMatrix::from_fn(big, big, |l, j| {
        let mut acc = 0.0;
        for i in 0..big {
            for k in 0..big {
                acc += t[i] * t[k] * riemann[(l, i, j, k)];
            }
        }
        acc
    })
}

/// Every curvature quantity at one point.
#[derive(Debug, Clone)]
pub struct CurvatureBundle {
    pub point: ExtendedPoint,
    pub metric: MetricValue,
    pub tangent: TangentVector,
    pub christoffel: Tensor3,
    /// `∂_m Γ^k_ij` at `[(m, k, i, j)]`.
    pub christoffel_derivatives: Tensor4,
    /// `R^l_ijk` at `[(l, i, j, k)]`.
    pub riemann: Tensor4,
    /// Matrix of the f-deviation `S`.
    pub deviation: DMatrix<f64>,
}

impl CurvatureBundle {
    pub fn compute(model: &dyn VectorField, p: &ExtendedPoint) -> Result<Self> {
        Self::compute_with(model, p, RiemannConvention::Standard)
    }

    pub fn compute_with(model: &dyn VectorField, p: &ExtendedPoint, convention: RiemannConvention) -> Result<Self> {
        let jet = FieldJet::second(model, p.state())?;
        let christoffel = christoffel_from_jet(&jet);
        let christoffel_derivatives = christoffel_derivatives_from_jet(&jet);
        let mut riemann = riemann_from(&christoffel, &christoffel_derivatives);
        if convention == RiemannConvention::Flipped {
            riemann.data.iter_mut().for_each(|v| *v *= convention.sign());
        }
        let tangent = tangent_from_field_value(&jet.f);
        let deviation = deviation_matrix(&riemann, &tangent.0);
        Ok(Self {
            point: p.clone(),
            metric: MetricValue::from_field_value(&jet.f),
            tangent,
            christoffel,
            christoffel_derivatives,
            riemann,
            deviation,
        })
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn apply_deviation(&self, v: &TangentVector) -> Result<TangentVector> {
        self.check(v)?;
        Ok(TangentVector(&self.deviation * &v.0))
    }

    /// `g(S v, w)`.
    pub fn deviation_form(&self, v: &TangentVector, w: &TangentVector) -> Result<f64> {
        self.check(v)?;
        self.check(w)?;
        Ok((&self.deviation * &v.0).dot(&(&self.metric.g * &w.0)))
    }

    /// `g(S v, v) / g(v, v)`.
    pub fn geodesic_stretching(&self, v: &TangentVector) -> Result<f64> {
        self.check(v)?;
        let gvv = v.0.dot(&(&self.metric.g * &v.0));
        if !(gvv > 0.0) {
            return Err(GeoError::Degenerate("stretching rate of the zero vector".into()));
        }
        Ok(self.deviation_form(v, v)? / gvv)
    }

    /// Sectional curvature of `span(𝒯, v)`, written as
    /// `g(R(𝒯,v)𝒯, v) / (g(v,v) g(𝒯,𝒯) − g(𝒯,v)²)`.
    pub fn sectional_curvature(&self, v: &TangentVector) -> Result<f64> {
        self.check(v)?;
        let g = &self.metric.g;
        let t = &self.tangent.0;
        let gvv = v.0.dot(&(g * &v.0));
        let gtt = t.dot(&(g * t));
        let gtv = t.dot(&(g * &v.0));
        let denom = gvv * gtt - gtv * gtv;
        if !(denom > SECTIONAL_DEGENERACY * gvv) {
            return Err(GeoError::Degenerate("plane spanned by the flow direction and v is degenerate".into()));
        }
        Ok(self.deviation_form(v, v)? / denom)
    }

    fn check(&self, v: &TangentVector) -> Result<()> {
        if v.dim() != self.dim() {
            return Err(GeoError::Shape { expected: self.dim(), got: v.dim() });
        }
        Ok(())
    }
}

/// Relative threshold on the Gram determinant of `(𝒯, v)`.
pub const SECTIONAL_DEGENERACY: f64 = 1e-14;

pub fn f_deviation_at(model: &dyn VectorField, p: &ExtendedPoint) -> Result<DMatrix<f64>> {
    Ok(CurvatureBundle::compute(model, p)?.deviation)
}

pub fn sectional_curvature(model: &dyn VectorField, p: &ExtendedPoint, v: &TangentVector) -> Result<f64> {
    CurvatureBundle::compute(model, p)?.sectional_curvature(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{builtin, ConstantField, FieldFn, Model, ModelParameters};
    use crate::jet::Scalar;
    use approx::assert_relative_eq;

    #[derive(Debug)]
    struct Decay;

    impl FieldFn for Decay {
        fn name(&self) -> &str {
            "decay"
        }
        fn dim(&self) -> usize {
            1
        }
        fn eval_generic<T: Scalar>(&self, x: &[T]) -> Vec<T> {
            vec![-x[0].clone()]
        }
    }

    #[test]
    fn one_dimensional_decay_symbols() {
        let m = Model::new(Decay);
        let g = christoffel_at(&m, &ExtendedPoint::new(&[1.0], 0.0)).unwrap();
        assert_relative_eq!(g[(0, 0, 0)], -1.0);
        for x in [-3.0, 0.0, 2.5] {
            let g = christoffel_at(&m, &ExtendedPoint::new(&[x], 0.0)).unwrap();
            assert_relative_eq!(g[(1, 0, 0)], 1.0);
        }
    }

    #[test]
    fn constant_field_is_flat() {
        let m = Model::new(ConstantField { value: vec![0.7, -1.3] });
        let p = ExtendedPoint::new(&[0.1, 0.2], 0.0);
        let b = CurvatureBundle::compute(&m, &p).unwrap();
        assert_eq!(b.christoffel.max_abs(), 0.0);
        assert_eq!(b.riemann.max_abs(), 0.0);
        assert_eq!(b.deviation.norm(), 0.0);
        for v in [[1.0, 0.0, 0.0], [0.3, -2.0, 0.0], [0.0, 1.0, 0.4]] {
            assert_eq!(b.sectional_curvature(&TangentVector::new(&v)).unwrap(), 0.0);
        }
    }

    #[test]
    fn riemann_antisymmetric_in_first_pair() {
        let ds = builtin("davis-skodje", &ModelParameters::default()).unwrap();
        let r = riemann_at(ds.as_ref(), &ExtendedPoint::new(&[0.8, 0.3], 0.0)).unwrap();
        for l in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        assert!((r[(l, i, j, k)] + r[(l, j, i, k)]).abs() <= 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn deviation_annihilates_flow_direction() {
        let ds = builtin("davis-skodje", &ModelParameters::default()).unwrap();
        let b = CurvatureBundle::compute(ds.as_ref(), &ExtendedPoint::new(&[1.0, 0.5], 0.0)).unwrap();
        let st = b.apply_deviation(&b.tangent).unwrap();
        assert!(st.0.norm() < 1e-12);
    }

    #[test]
    fn davis_skodje_tangential_sectional_curvature() {
        let ds = builtin("davis-skodje", &ModelParameters::default()).unwrap();
        let b = CurvatureBundle::compute(ds.as_ref(), &ExtendedPoint::new(&[1.0, 0.5], 0.0)).unwrap();
        let v = TangentVector::new(&[-1.0, -0.25, 0.0]);
        assert!((b.sectional_curvature(&v).unwrap() - 0.947610294117647).abs() < 1e-9);
        assert!((b.geodesic_stretching(&v).unwrap() - 0.947610294117647).abs() < 1e-9);
        let flipped = CurvatureBundle::compute_with(
            ds.as_ref(),
            &ExtendedPoint::new(&[1.0, 0.5], 0.0),
            RiemannConvention::Flipped,
        )
        .unwrap();
        assert!((flipped.geodesic_stretching(&v).unwrap() + 0.947610294117647).abs() < 1e-9);
    }

    #[test]
    fn sectional_curvature_is_scale_invariant_and_rejects_flow_direction() {
        let ds = builtin("davis-skodje", &ModelParameters::default()).unwrap();
        let b = CurvatureBundle::compute(ds.as_ref(), &ExtendedPoint::new(&[0.4, 0.9], 1.0)).unwrap();
        let v = TangentVector::new(&[0.3, -0.7, 0.2]);
        let k1 = b.sectional_curvature(&v).unwrap();
        let k2 = b.sectional_curvature(&v.scaled(2.0)).unwrap();
        assert!((k1 - k2).abs() <= 1e-12 * k1.abs().max(1.0));
        assert!(matches!(b.sectional_curvature(&b.tangent.scaled(3.0)), Err(GeoError::Degenerate(_))));
    }

    #[test]
    fn derivatives_match_differenced_symbols() {
        let ds = builtin("davis-skodje", &ModelParameters::default()).unwrap();
        let x = [1.0, 0.5];
        let d = christoffel_derivatives_at(ds.as_ref(), &ExtendedPoint::new(&x, 0.0)).unwrap();
        let h = 1e-5;
        for m in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[m] += h;
            xm[m] -= h;
            let gp = christoffel_at(ds.as_ref(), &ExtendedPoint::new(&xp, 0.0)).unwrap();
            let gm = christoffel_at(ds.as_ref(), &ExtendedPoint::new(&xm, 0.0)).unwrap();
            for k in 0..3 {
                for i in 0..3 {
                    for j in 0..3 {
                        let fd = (gp[(k, i, j)] - gm[(k, i, j)]) / (2.0 * h);
                        assert!((fd - d[(m, k, i, j)]).abs() < 1e-7, "m={m} k={k} i={i} j={j}");
                    }
                }
            }
        }
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    assert_eq!(d[(2, k, i, j)], 0.0);
                }
            }
        }
    }
}
