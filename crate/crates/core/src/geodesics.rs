//! Integration of the extended system `ẋ = f(x), τ̇ = 1` and the residual of
//! the geodesic equation along its solutions.

use nalgebra::DVector;

use crate::curvature::christoffel_at;
use crate::error::{GeoError, Result};
use crate::fmanifold::{metric_at, metric_apply, tangent_lift, ExtendedPoint};
use crate::models::VectorField;

/// Smallest step the integrator accepts before giving up.
pub const MIN_STEP: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    /// Local error tolerance, applied as `tol·(1 + |y|)` per component.
    pub tol: f64,
    /// Time between output samples.
    pub stride: f64,
    pub max_steps: usize,
}

impl IntegrateOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self { tol: 1e-10, stride: 0.05, max_steps: 1_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IntegratorStats {
    pub steps: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `(t, γ(t))` with strictly increasing `t`.
    pub samples: Vec<(f64, ExtendedPoint)>,
    pub stats: IntegratorStats,
    pub tol: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> Option<&(f64, ExtendedPoint)> {
        self.samples.last()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IntegrationError {
    #[error("integration failed at t = {t}: {reason}")]
    Failure { reason: String, t: f64, last: ExtendedPoint, partial: Trajectory },
    #[error(transparent)]
    Geo(#[from] GeoError),
}

// Dormand-Prince 5(4) tableau. The system is autonomous, so the nodes are
// not needed.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn extended_rhs(model: &dyn VectorField, y: &DVector<f64>) -> Result<DVector<f64>> {
    let n = y.len() - 1;
    let f = model.eval(&y.as_slice()[..n])?;
    let mut out = DVector::from_element(n + 1, 1.0);
    out.rows_mut(0, n).copy_from(&f);
    Ok(out)
}

/// One trial step; returns the fifth-order solution and the error norm.
fn dopri_step(model: &dyn VectorField, y: &DVector<f64>, k1: &DVector<f64>, h: f64, tol: f64) -> Result<(DVector<f64>, DVector<f64>, f64)> {
    let mut k: Vec<DVector<f64>> = vec![k1.clone()];
    for s in 1..7 {
        let mut ys = y.clone();
        for (j, kj) in k.iter().enumerate() {
            if A[s][j] != 0.0 {
                ys.axpy(h * A[s][j], kj, 1.0);
            }
        }
        k.push(extended_rhs(model, &ys)?);
    }
    let mut y5 = y.clone();
    let mut err = DVector::zeros(y.len());
    for s in 0..7 {
        y5.axpy(h * B5[s], &k[s], 1.0);
        err.axpy(h * (B5[s] - B4[s]), &k[s], 1.0);
    }
    let norm = (err
        .iter()
        .zip(y.iter().zip(y5.iter()))
        .map(|(e, (a, b))| {
            let sc = tol * (1.0 + a.abs().max(b.abs()));
            (e / sc).powi(2)
        })
        .sum::<f64>()
        / y.len() as f64)
        .sqrt();
    // k[6] is f(y5) (first-same-as-last)
    Ok((y5, k.swap_remove(6), norm))
}

/// Integrates the extended system from `start` over `t ∈ [0, t_end]`,
/// emitting a sample every `options.stride` plus the end point.
pub fn integrate_extended(
    model: &dyn VectorField,
    start: &ExtendedPoint,
    t_end: f64,
    options: &IntegrateOptions,
) -> std::result::Result<Trajectory, IntegrationError> {
    if !(options.tol > 0.0) {
        return Err(GeoError::Parameter(format!("tolerance must be positive, got {}", options.tol)).into());
    }
    if !(options.stride > 0.0) {
        return Err(GeoError::Parameter(format!("sample stride must be positive, got {}", options.stride)).into());
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(GeoError::Parameter(format!("end time must be finite and non-negative, got {t_end}")).into());
    }
    model.check_domain(start.state())?;

    let n = start.dim();
    let mut y = start.coordinates();
    let mut k1 = extended_rhs(model, &y)?;
    let mut stats = IntegratorStats { evaluations: 1, ..Default::default() };
    let mut traj = Trajectory { samples: vec![(0.0, start.clone())], stats, tol: options.tol };

    let to_point = |y: &DVector<f64>| ExtendedPoint::new(&y.as_slice()[..n], y[n]);
    let fail = |reason: String, t: f64, y: &DVector<f64>, traj: &Trajectory, stats: IntegratorStats| {
        let mut partial = traj.clone();
        partial.stats = stats;
        IntegrationError::Failure { reason, t, last: to_point(y), partial }
    };

    let sample_count = (t_end / options.stride).ceil() as usize;
    let sample_time = |i: usize| if i >= sample_count { t_end } else { i as f64 * options.stride };
    let mut t = 0.0;
    let mut h = (options.stride).min(0.01).min(t_end.max(MIN_STEP));
    let mut next = 1;

    while next <= sample_count {
        let target = sample_time(next);
        let remaining = target - t;
        let mut clipped = false;
        let mut step = h;
        if step >= remaining {
            step = remaining;
            clipped = true;
        }
        if stats.steps + stats.rejected >= options.max_steps {
            return Err(fail(format!("step budget {} exhausted", options.max_steps), t, &y, &traj, stats));
        }
        match dopri_step(model, &y, &k1, step, options.tol) {
            Ok((y5, k7, err)) => {
                stats.evaluations += 6;
                if err <= 1.0 {
                    stats.steps += 1;
                    t = if clipped { target } else { t + step };
                    y = y5;
                    k1 = k7;
                    if clipped {
                        traj.samples.push((t, to_point(&y)));
                        next += 1;
                    }
                    let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    // a clipped step says nothing about the natural size
                    if !clipped || factor < 1.0 {
                        h = step * factor;
                    }
                } else {
                    stats.rejected += 1;
                    h = step * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                }
            }
            Err(e) => {
                stats.rejected += 1;
                h = step * 0.5;
                if h < MIN_STEP {
                    return Err(fail(format!("left the model domain: {e}"), t, &y, &traj, stats));
                }
                continue;
            }
        }
        if h < MIN_STEP && t < t_end {
            return Err(fail(format!("step size collapsed below {MIN_STEP:e}"), t, &y, &traj, stats));
        }
    }
    traj.stats = stats;
    Ok(traj)
}

/// Geodesic-equation residual `‖(J_f f, 0) + Γ(𝒯, 𝒯)‖` at a single point.
pub fn residual_at(model: &dyn VectorField, p: &ExtendedPoint) -> Result<f64> {
    let x = p.state();
    let n = x.len();
    let f = model.eval(x)?;
    let jf = model.jacobian(x)? * &f;
    let gamma = christoffel_at(model, p)?;
    let t = tangent_lift(model, p)?;
    let t = t.components();
    let mut sum = 0.0;
    for k in 0..=n {
        let mut r = if k < n { jf[k] } else { 0.0 };
        for i in 0..=n {
            for j in 0..=n {
                r += gamma[(k, i, j)] * t[i] * t[j];
            }
        }
        sum += r * r;
    }
    Ok(sum.sqrt())
}

/// `|g(𝒯, 𝒯) − 1|` at a point.
pub fn unit_speed_deviation(model: &dyn VectorField, p: &ExtendedPoint) -> Result<f64> {
    let g = metric_at(model, p)?;
    let t = tangent_lift(model, p)?;
    Ok((metric_apply(&g, &t, &t)? - 1.0).abs())
}

/// Residual norm at every sample of the trajectory.
pub fn geodesic_residual(model: &dyn VectorField, traj: &Trajectory) -> Result<Vec<f64>> {
    traj.samples.iter().map(|(_, p)| residual_at(model, p)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicReport {
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub max_unit_speed_deviation: f64,
    /// Largest `|τ − (t + τ₀)|` over the samples.
    pub max_clock_drift: f64,
}

pub fn verify_trajectory(model: &dyn VectorField, traj: &Trajectory) -> Result<GeodesicReport> {
    let residuals = geodesic_residual(model, traj)?;
    let max_residual = residuals.iter().cloned().fold(0.0, f64::max);
    let mut max_unit = 0.0f64;
    let mut drift = 0.0f64;
    let tau0 = traj.samples.first().map(|(_, p)| p.tau).unwrap_or(0.0);
    for (t, p) in &traj.samples {
        max_unit = max_unit.max(unit_speed_deviation(model, p)?);
        drift = drift.max((p.tau - (t + tau0)).abs());
    }
    Ok(GeodesicReport { residuals, max_residual, max_unit_speed_deviation: max_unit, max_clock_drift: drift })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{builtin, ds_sim_graph, ConstantField, Model, ModelParameters};

    fn model(id: &str) -> std::sync::Arc<dyn VectorField> {
        builtin(id, &ModelParameters::default()).unwrap()
    }

    #[test]
    fn linear_eigensolution() {
        let m = model("linear");
        let tr = integrate_extended(m.as_ref(), &ExtendedPoint::new(&[1.0, 1.0], 0.0), 1.0, &IntegrateOptions::with_tol(1e-12)).unwrap();
        let (t, p) = tr.last().unwrap();
        assert_eq!(*t, 1.0);
        let e = (-1.0f64).exp();
        assert!((p.x[0] - e).abs() < 1e-8 && (p.x[1] - e).abs() < 1e-8);
        assert!((p.tau - 1.0).abs() < 1e-12);
        assert!(tr.samples.windows(2).all(|w| w[1].0 > w[0].0));
    }

    #[test]
    fn equilibrium_stays_put() {
        let m = model("linear");
        let tr = integrate_extended(m.as_ref(), &ExtendedPoint::new(&[0.0, 0.0], 2.0), 3.0, &IntegrateOptions::default()).unwrap();
        for (t, p) in &tr.samples {
            assert_eq!(p.x.as_slice(), &[0.0, 0.0]);
            assert!((p.tau - 2.0 - t).abs() < 1e-12);
        }
    }

    #[test]
    fn davis_skodje_approaches_graph() {
        let m = model("davis-skodje");
        let tr = integrate_extended(m.as_ref(), &ExtendedPoint::new(&[2.0, 0.9], 0.0), 5.0, &IntegrateOptions::default()).unwrap();
        let gaps: Vec<f64> = tr.samples.iter().map(|(_, p)| (p.x[1] - ds_sim_graph(p.x[0]).unwrap()).abs()).collect();
        let after = &gaps[gaps.len() / 5..];
        assert!(after.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(*gaps.last().unwrap() < 1e-3);
        let rep = verify_trajectory(m.as_ref(), &tr).unwrap();
        assert!(rep.max_residual <= 1e-6, "{}", rep.max_residual);
        assert!(rep.max_unit_speed_deviation <= 1e-12);
    }

    #[test]
    fn constant_field_residual_vanishes() {
        let c = Model::new(ConstantField { value: vec![0.5, 2.0] });
        let tr = integrate_extended(&c, &ExtendedPoint::new(&[0.0, 0.0], 0.0), 2.0, &IntegrateOptions::default()).unwrap();
        assert!(geodesic_residual(&c, &tr).unwrap().iter().all(|r| *r < 1e-14));
    }

    #[test]
    fn time_shift_invariance() {
        let m = model("davis-skodje");
        let opts = IntegrateOptions::default();
        let a = integrate_extended(m.as_ref(), &ExtendedPoint::new(&[2.0, 0.9], 0.0), 2.0, &opts).unwrap();
        let b = integrate_extended(m.as_ref(), &ExtendedPoint::new(&[2.0, 0.9], 3.0), 2.0, &opts).unwrap();
        let ra = geodesic_residual(m.as_ref(), &a).unwrap();
        let rb = geodesic_residual(m.as_ref(), &b).unwrap();
        assert_eq!(ra.len(), rb.len());
        for (x, y) in ra.iter().zip(&rb) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[derive(Debug)]
    struct Blowup;

    impl crate::models::FieldFn for Blowup {
        fn name(&self) -> &str {
            "blowup"
        }
        fn dim(&self) -> usize {
            1
        }
        fn eval_generic<T: crate::jet::Scalar>(&self, x: &[T]) -> Vec<T> {
            vec![x[0].clone() * x[0].clone()]
        }
    }

    #[test]
    fn finite_time_blowup_is_reported() {
        let m = Model::new(Blowup);
        let r = integrate_extended(&m, &ExtendedPoint::new(&[1.0], 0.0), 2.0, &IntegrateOptions::default());
        match r {
            Err(IntegrationError::Failure { t, partial, .. }) => {
                assert!(t < 1.0 && t > 0.9);
                assert!(!partial.is_empty());
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_options() {
        let m = model("linear");
        let p = ExtendedPoint::new(&[1.0, 0.0], 0.0);
        assert!(integrate_extended(m.as_ref(), &p, 1.0, &IntegrateOptions::with_tol(0.0)).is_err());
        assert!(integrate_extended(m.as_ref(), &p, f64::NAN, &IntegrateOptions::default()).is_err());
    }
}
