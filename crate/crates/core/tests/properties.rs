use geostretch::curvature::CurvatureBundle;
use geostretch::fcm::lemma_pair;
use geostretch::fmanifold::{rescale_coefficients, DiagonalRescaling, ExtendedPoint, MetricValue, TangentVector};
use geostretch::models::{builtin, DavisSkodje, MichaelisMenten, Model, ModelParameters, VectorField};
use geostretch::stretching::{classical_stretching, geodesic_stretching, max_stretching_over};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn ds(eta: f64) -> std::sync::Arc<dyn VectorField> {
    let mut p = ModelParameters::default();
    p.set("eta", eta);
    builtin("davis-skodje", &p).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn metric_has_unit_determinant_and_exact_inverse(f in prop::collection::vec(-20.0f64..20.0, 1..5)) {
        let m = MetricValue::from_field_value(&DVector::from_vec(f.clone()));
        let n = f.len() + 1;
        prop_assert!((m.determinant() - 1.0).abs() <= 1e-9 * (1.0 + f.iter().map(|v| v * v).sum::<f64>()).powi(2));
        let prod = &m.g * &m.g_inv;
        let scale = m.g.amax() * m.g_inv.amax();
        prop_assert!((prod - DMatrix::identity(n, n)).amax() <= 1e-13 * scale);
        let eig = m.g.clone().symmetric_eigen();
        prop_assert!(eig.eigenvalues.iter().all(|l| *l > 0.0));
    }

    #[test]
    fn stretching_is_scale_invariant_and_matches_sectional_curvature(
        x1 in 0.0f64..3.0, x2 in 0.0f64..2.0, v1 in -1.0f64..1.0, v2 in -1.0f64..1.0, c in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0], eta in 1.5f64..12.0,
    ) {
        prop_assume!(v1.abs() + v2.abs() > 1e-3);
        let m = ds(eta);
        let p = ExtendedPoint::new(&[x1, x2], 0.0);
        let v = TangentVector::pure_state(&[v1, v2]);
        let b = CurvatureBundle::compute(m.as_ref(), &p).unwrap();
        let theta = b.geodesic_stretching(&v).unwrap();
        prop_assert!(rel(theta, b.geodesic_stretching(&v.scaled(c)).unwrap()) <= 1e-12);
        prop_assert!(rel(theta, b.sectional_curvature(&v).unwrap()) <= 1e-10);
        prop_assert!(rel(theta, geodesic_stretching(m.as_ref(), &p, &v).unwrap()) <= 1e-14);
    }

    #[test]
    fn curvature_does_not_depend_on_time(x1 in 0.0f64..3.0, x2 in 0.0f64..2.0, tau in -100.0f64..100.0) {
        let m = ds(3.0);
        let a = CurvatureBundle::compute(m.as_ref(), &ExtendedPoint::new(&[x1, x2], 0.0)).unwrap();
        let b = CurvatureBundle::compute(m.as_ref(), &ExtendedPoint::new(&[x1, x2], tau)).unwrap();
        prop_assert_eq!(a.christoffel, b.christoffel);
        prop_assert_eq!(a.riemann, b.riemann);
        prop_assert_eq!(a.deviation, b.deviation);
    }

    #[test]
    fn rescaling_round_trips(a1 in 0.1f64..10.0, a2 in -10.0f64..-0.1, f1 in -5.0f64..5.0, f2 in -5.0f64..5.0) {
        let g = MetricValue::from_field_value(&DVector::from_vec(vec![f1, f2])).g;
        let r = DiagonalRescaling::new(&[a1, a2]).unwrap();
        let there = rescale_coefficients(&g, &r).unwrap();
        let back = rescale_coefficients(&there, &r.inverse()).unwrap();
        prop_assert!((back - &g).amax() <= 1e-12 * g.amax());
        let x = [0.3, -1.7];
        let y = r.apply(&x);
        let xx = r.unapply(&y);
        prop_assert!((xx[0] - x[0]).abs() <= 1e-15 && (xx[1] - x[1]).abs() <= 1e-15);
    }

    #[test]
    fn covariant_derivative_equals_flow_derivative(x1 in 0.0f64..2.0, x2 in 0.05f64..1.5, eta in 1.5f64..10.0, eps in 0.01f64..1.0) {
        // h is one field, f another: the identity holds for any pair
        let f = Model::new(MichaelisMenten { kappa: 0.5, lambda: 1.0, epsilon: eps });
        let h = DavisSkodje { eta };
        let (cov, flow) = lemma_pair(&h, &f, &[x1, x2]).unwrap();
        prop_assert!((&cov - &flow).amax() <= 1e-12 * cov.amax().max(1.0));
    }

    #[test]
    fn subspace_maximum_bounds_each_member(x1 in 0.1f64..2.0, x2 in 0.1f64..1.0, a in -1.0f64..1.0, b in -1.0f64..1.0) {
        prop_assume!(a.abs() + b.abs() > 1e-3);
        let m = ds(3.0);
        let p = ExtendedPoint::new(&[x1, x2], 0.0);
        let bundle = CurvatureBundle::compute(m.as_ref(), &p).unwrap();
        let e1 = TangentVector::pure_state(&[1.0, 0.0]);
        let e2 = TangentVector::pure_state(&[0.0, 1.0]);
        let top = max_stretching_over(&bundle, &[e1, e2]).unwrap();
        let v = TangentVector::pure_state(&[a, b]);
        prop_assert!(bundle.geodesic_stretching(&v).unwrap() <= top + 1e-9 * top.abs().max(1.0));
    }

    #[test]
    fn classical_rate_is_rayleigh_quotient(x1 in -2.0f64..2.0, x2 in -2.0f64..2.0, v1 in -1.0f64..1.0, v2 in -1.0f64..1.0) {
        prop_assume!(v1.abs() + v2.abs() > 1e-3);
        let lin = builtin("linear", &ModelParameters::default()).unwrap();
        let w = classical_stretching(lin.as_ref(), &[x1, x2], &[v1, v2]).unwrap();
        // eigenvalues of the symmetric part are -1 and -7
        prop_assert!((-7.0 - 1e-12..=-1.0 + 1e-12).contains(&w));
    }
}
