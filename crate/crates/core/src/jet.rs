//! Forward-mode differentiation over model evaluation code.
//!
//! Two number types carry derivative information through a generic
//! evaluation of `f`:
//!
//! - [`Dual`] is a first-order dual number. Nesting it (`Dual<Dual<f64>>`)
//!   yields exact mixed second partials, three levels yield third partials.
//! - [`Taylor`] is a univariate truncated Taylor series. Evaluating `f` on the
//!   series of a solution curve `x(t)` gives the successive time derivatives
//!   of the flow, i.e. the jets of `f` along itself.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Arithmetic needed by model formulas.
pub trait Scalar:
    Clone
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn constant(v: f64) -> Self;

    /// Primal (zeroth order) value.
    fn value(&self) -> f64;

    fn scale(&self, s: f64) -> Self {
        self.clone() * Self::constant(s)
    }

    fn add_f64(&self, s: f64) -> Self {
        self.clone() + Self::constant(s)
    }

    fn powi(&self, n: u32) -> Self {
        let mut acc = Self::constant(1.0);
        for _ in 0..n {
            acc = acc * self.clone();
        }
        acc
    }
}

impl Scalar for f64 {
    fn constant(v: f64) -> Self {
        v
    }

    fn value(&self) -> f64 {
        *self
    }

    fn scale(&self, s: f64) -> Self {
        self * s
    }

    fn add_f64(&self, s: f64) -> Self {
        self + s
    }

    fn powi(&self, n: u32) -> Self {
        f64::powi(*self, n as i32)
    }
}

/// Dual number `re + eps·ε` with `ε² = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub eps: T,
}

impl<T: Scalar> Dual<T> {
    pub fn new(re: T, eps: T) -> Self {
        Self { re, eps }
    }

    pub fn variable(re: T) -> Self {
        Self { re, eps: T::constant(1.0) }
    }
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Dual::new(self.re + rhs.re, self.eps + rhs.eps)
    }
}

impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Dual::new(self.re - rhs.re, self.eps - rhs.eps)
    }
}

impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let eps = self.re.clone() * rhs.eps + self.eps * rhs.re.clone();
        Dual::new(self.re * rhs.re, eps)
    }
}

impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let re = self.re / rhs.re.clone();
        let eps = (self.eps - re.clone() * rhs.eps) / rhs.re;
        Dual::new(re, eps)
    }
}

impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual::new(-self.re, -self.eps)
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    fn constant(v: f64) -> Self {
        Dual::new(T::constant(v), T::constant(0.0))
    }

    fn value(&self) -> f64 {
        self.re.value()
    }

    fn scale(&self, s: f64) -> Self {
        Dual::new(self.re.scale(s), self.eps.scale(s))
    }

    fn add_f64(&self, s: f64) -> Self {
        Dual::new(self.re.add_f64(s), self.eps.clone())
    }
}

/// Truncated univariate Taylor series `Σ c_k t^k`.
///
/// Operands of different lengths are padded with zeros; the result has the
/// longer length. A constant is a series of length one.
#[derive(Clone, Debug, PartialEq)]
pub struct Taylor {
    pub coeffs: Vec<f64>,
}

impl Taylor {
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "Taylor series needs at least one coefficient");
        Self { coeffs }
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }
}

impl Add for Taylor {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let len = self.len().max(rhs.len());
        Taylor::new((0..len).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Sub for Taylor {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let len = self.len().max(rhs.len());
        Taylor::new((0..len).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl Mul for Taylor {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let len = self.len().max(rhs.len());
        let out = (0..len)
            .map(|k| (0..=k).map(|j| self.coeff(j) * rhs.coeff(k - j)).sum())
            .collect();
        Taylor::new(out)
    }
}

impl Div for Taylor {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let len = self.len().max(rhs.len());
        let b0 = rhs.coeff(0);
        let mut out: Vec<f64> = Vec::with_capacity(len);
        for k in 0..len {
            let conv: f64 = (1..=k).map(|j| rhs.coeff(j) * out[k - j]).sum();
            out.push((self.coeff(k) - conv) / b0);
        }
        Taylor::new(out)
    }
}

impl Neg for Taylor {
    type Output = Self;
    fn neg(self) -> Self {
        Taylor::new(self.coeffs.into_iter().map(|c| -c).collect())
    }
}

impl Scalar for Taylor {
    fn constant(v: f64) -> Self {
        Taylor::new(vec![v])
    }

    fn value(&self) -> f64 {
        self.coeff(0)
    }

    fn scale(&self, s: f64) -> Self {
        Taylor::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    fn add_f64(&self, s: f64) -> Self {
        let mut c = self.coeffs.clone();
        c[0] += s;
        Taylor::new(c)
    }
}

/// Evaluates the generic map `eval` on the truncated solution series of
/// `ẋ = f(x)` through `x(0) = x0`, returning the time derivatives
/// `d^m x/dt^m` for `m = 1..=order`.
///
/// Uses the Taylor-series recursion `(k+1)·x_{k+1} = [f(x(t))]_k`.
pub fn flow_derivatives<E>(dim: usize, x0: &[f64], order: usize, eval: E) -> Vec<Vec<f64>>
where
    E: Fn(&[Taylor]) -> Vec<Taylor>,
{
    let mut series: Vec<Vec<f64>> = x0.iter().map(|&v| vec![v]).collect();
    for k in 0..order {
        let input: Vec<Taylor> = series.iter().map(|c| Taylor::new(c.clone())).collect();
        let fx = eval(&input);
        debug_assert_eq!(fx.len(), dim);
        for (s, fi) in series.iter_mut().zip(fx.iter()) {
            s.push(fi.coeff(k) / (k as f64 + 1.0));
        }
    }
    let mut factorial = 1.0;
    (1..=order)
        .map(|m| {
            factorial *= m as f64;
            series.iter().map(|s| s[m] * factorial).collect()
        })
        .collect()
}

/// Jacobian `J[i][j] = ∂f_i/∂x_j` by one dual sweep per input direction.
pub fn jacobian_by_duals<E>(dim: usize, x: &[f64], eval: E) -> Vec<Vec<f64>>
where
    E: Fn(&[Dual<f64>]) -> Vec<Dual<f64>>,
{
    let mut jac = vec![vec![0.0; dim]; dim];
    for j in 0..dim {
        let input: Vec<Dual<f64>> = x
            .iter()
            .enumerate()
            .map(|(i, &v)| Dual::new(v, if i == j { 1.0 } else { 0.0 }))
            .collect();
        for (i, out) in eval(&input).into_iter().enumerate() {
            jac[i][j] = out.eps;
        }
    }
    jac
}

/// Second partials `H[k][i][j] = ∂²f_k/∂x_i∂x_j` from nested duals.
pub fn hessians_by_duals<E>(dim: usize, x: &[f64], eval: E) -> Vec<Vec<Vec<f64>>>
where
    E: Fn(&[Dual<Dual<f64>>]) -> Vec<Dual<Dual<f64>>>,
{
    let mut hess = vec![vec![vec![0.0; dim]; dim]; dim];
    for i in 0..dim {
        for j in i..dim {
            let input: Vec<Dual<Dual<f64>>> = x
                .iter()
                .enumerate()
                .map(|(m, &v)| {
                    let outer = if m == i { 1.0 } else { 0.0 };
                    let inner = if m == j { 1.0 } else { 0.0 };
                    Dual::new(Dual::new(v, inner), Dual::new(outer, 0.0))
                })
                .collect();
            for (k, out) in eval(&input).into_iter().enumerate() {
                hess[k][i][j] = out.eps.eps;
                hess[k][j][i] = out.eps.eps;
            }
        }
    }
    hess
}

/// Third partials `T[k][i][j][l]`, filled from the sorted index triple so the
/// result is symmetric in the differentiation indices by construction.
pub fn third_partials_by_duals<E>(dim: usize, x: &[f64], eval: E) -> Vec<Vec<Vec<Vec<f64>>>>
where
    E: Fn(&[Dual<Dual<Dual<f64>>>]) -> Vec<Dual<Dual<Dual<f64>>>>,
{
    let mut out = vec![vec![vec![vec![0.0; dim]; dim]; dim]; dim];
    for i in 0..dim {
        for j in i..dim {
            for l in j..dim {
                let seed = |m: usize, v: f64| {
                    let a = if m == i { 1.0 } else { 0.0 };
                    let b = if m == j { 1.0 } else { 0.0 };
                    let c = if m == l { 1.0 } else { 0.0 };
                    Dual::new(
                        Dual::new(Dual::new(v, c), Dual::new(b, 0.0)),
                        Dual::new(Dual::new(a, 0.0), Dual::new(0.0, 0.0)),
                    )
                };
                let input: Vec<_> = x.iter().enumerate().map(|(m, &v)| seed(m, v)).collect();
                for (k, val) in eval(&input).into_iter().enumerate() {
                    let d = val.eps.eps.eps;
                    for (p, q, r) in [(i, j, l), (i, l, j), (j, i, l), (j, l, i), (l, i, j), (l, j, i)] {
                        out[k][p][q][r] = d;
                    }
                }
            }
        }
    }
    out
}
