use formation_core::cyclic::{
    assemble_l, contraction_rate, cyclic_control, theorem4_margin, CyclicParams, InternalDynamics,
};
use formation_core::extensions::collision::{collision_control, rpf_force, rpf_value, CollisionParams};
use formation_core::extensions::robustness::{robustness_bound, RobustnessModel};
use formation_core::extensions::size::{size_recursion, Shaping, SizeParams};
use formation_core::linalg::{
    block3, circulant_eigenvalues, circulant_eigenvector, kron, similarity_rotate, stack_points, CirculantSpec,
    Complex64, Rotation3,
};
use formation_core::subspace::{build_polygon_v, formation_error, regular_polygon, PolygonSpec};
use nalgebra::{DMatrix, DVector, Vector3};
use proptest::prelude::*;

fn axis() -> impl Strategy<Value = Vector3<f64>> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter("nonzero axis", |(x, y, z)| x * x + y * y + z * z > 1e-2)
        .prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

fn rotation() -> impl Strategy<Value = Rotation3> {
    (axis(), -3.0..3.0f64).prop_map(|(a, t)| Rotation3::new(a, t).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn circulant_eigenpairs(row in prop::collection::vec(-2.0..2.0f64, 3..9)) {
        let n = row.len();
        let spec = CirculantSpec::new(row).unwrap();
        let m = spec.matrix().map(|v| Complex64::new(v, 0.0));
        for (k, lam) in circulant_eigenvalues(&spec).iter().enumerate() {
            let v = circulant_eigenvector(n, k);
            prop_assert!((&m * &v - &v * *lam).norm() < 1e-10);
        }
    }

    #[test]
    fn kron_mixed_product(a in prop::collection::vec(-1.0..1.0f64, 4), b in prop::collection::vec(-1.0..1.0f64, 9)) {
        let a = DMatrix::from_vec(2, 2, a);
        let b = DMatrix::from_vec(3, 3, b);
        let ab = kron(&a, &b);
        let sq = kron(&(&a * &a), &(&b * &b));
        prop_assert!((&ab * &ab - sq).amax() < 1e-12);
    }

    #[test]
    fn rotation_algebra(r in rotation(), s in rotation()) {
        let m = r.matrix();
        prop_assert!((m.transpose() * m - nalgebra::Matrix3::identity()).amax() < 1e-12);
        prop_assert!((m.determinant() - 1.0).abs() < 1e-12);
        prop_assert!((r.compose(&s).matrix() - m * s.matrix()).amax() < 1e-12);
        prop_assert!((r.inverse().matrix() - m.transpose()).amax() < 1e-12);
        prop_assert!((m * r.plane_normal() - Vector3::z()).norm() < 1e-12);
        let z = Rotation3::about_z(0.4);
        let sim = similarity_rotate(&r, &z);
        prop_assert!((sim * r.plane_normal() - r.plane_normal()).norm() < 1e-12);
    }

    #[test]
    fn regular_polygons_lie_in_the_subspace(
        n in 3usize..9, frame in rotation(), radius in 0.1..5.0f64, phase in -3.0..3.0f64,
        c in (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64),
    ) {
        let cm = build_polygon_v(&PolygonSpec::new(n, frame).unwrap()).unwrap();
        prop_assert_eq!(cm.nullity(), 5);
        let x = regular_polygon(n, &Vector3::new(c.0, c.1, c.2), radius, phase, &frame);
        prop_assert!(formation_error(&cm, &x).unwrap() < 1e-10 * (1.0 + x.norm()));
        let p = CyclicParams::uniform(n, 1, 1.0, frame).unwrap();
        prop_assert!(cyclic_control(&x, &p).unwrap().norm() < 1e-10 * (1.0 + x.norm()));
    }

    #[test]
    fn gain_scaling_scales_the_rate(n in 4usize..9, k in 0.1..3.0f64, c in 0.2..4.0f64, frame in rotation()) {
        let p = CyclicParams::uniform(n, 1, k, frame).unwrap();
        let cm = build_polygon_v(&PolygonSpec::new(n, frame).unwrap()).unwrap();
        let r1 = contraction_rate(&cm, &assemble_l(&p).unwrap());
        let r2 = contraction_rate(&cm, &assemble_l(&p.scaled(c).unwrap()).unwrap());
        prop_assert!((r2 - c * r1).abs() < 1e-9 * (1.0 + r2));
        let t4 = theorem4_margin(&p, &InternalDynamics::none()).unwrap();
        prop_assert!(t4.certified);
    }

    #[test]
    fn control_matches_matrix_form(n in 3usize..8, frame in rotation(), x in prop::collection::vec(-2.0..2.0f64, 24)) {
        let p = CyclicParams::uniform(n, 1, 1.3, frame).unwrap();
        let x = DVector::from_column_slice(&x[..3 * n]);
        let u = cyclic_control(&x, &p).unwrap();
        prop_assert!((u + assemble_l(&p).unwrap() * &x).norm() < 1e-10);
    }

    #[test]
    fn rpf_is_decreasing_and_nonnegative(r1 in 0.1..1.0f64, w in 0.1..2.0f64, s in 0.01..0.99f64) {
        let cp = CollisionParams::hard(r1, r1 + w).unwrap();
        let d = r1 + s * w;
        let d2 = r1 + (s + 0.005).min(1.0) * w;
        prop_assert!(rpf_value(d, &cp).unwrap() >= rpf_value(d2, &cp).unwrap() - 1e-12);
        prop_assert!(rpf_value(d, &cp).unwrap() >= -1e-12);
        prop_assert!(rpf_force(d, &cp).unwrap() >= 0.0);
        prop_assert!(rpf_value(r1, &cp).is_err());
    }

    #[test]
    fn collision_terms_cancel_pairwise(pts in prop::collection::vec((-1.5..1.5f64, -1.5..1.5f64, -1.5..1.5f64), 3..7)) {
        let pts: Vec<Vector3<f64>> = pts.into_iter().map(|(a, b, c)| Vector3::new(a, b, c)).collect();
        let x = stack_points(&pts);
        let cp = CollisionParams::hard(0.05, 1.0).unwrap();
        if let Ok(u) = collision_control(&x, None, &cp) {
            let total: Vector3<f64> = (0..pts.len()).map(|i| block3(&u, i)).sum();
            prop_assert!(total.norm() < 1e-9 * (1.0 + u.norm()));
        }
    }

    #[test]
    fn robustness_bound_is_monotone(lam in 0.1..10.0f64, d in 0.0..1.0f64, t in 0.0..10.0f64) {
        let rm = RobustnessModel::new(lam, d).unwrap();
        let a = robustness_bound(&rm, t).unwrap();
        let b = robustness_bound(&rm, t + 0.1).unwrap();
        prop_assert!(a <= b + 1e-15 && b <= rm.steady_state() + 1e-15);
    }

    #[test]
    fn size_recursion_contracts(p0 in -0.9..0.9f64) {
        let size = SizeParams::new(2.0, 5.0f64.to_radians(), Shaping::Tanh, 0.1).unwrap();
        let seq = size_recursion(p0, 2000, 1.0, &size);
        prop_assert!(seq.last().unwrap().abs() <= p0.abs() * 0.01 + 1e-12);
    }
}
