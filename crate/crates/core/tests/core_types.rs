use exterior_ma::fa::{default_ladder, validate_fa};
use exterior_ma::{BoundaryData, InnerDomain, ProblemSpec, QuadraticFarField, RightHandSide};
use nalgebra::{DMatrix, DVector};

#[test]
fn unit_source_has_zero_suprema() {
    let rep = validate_fa(&RightHandSide::one(3), 3.0, &default_ladder(), 3).unwrap();
    assert!(rep.pass);
    assert!(rep.suprema.iter().flatten().all(|&s| s == 0.0));
}

#[test]
fn cubic_perturbation_has_unit_k0_suprema() {
    let f = RightHandSide::radial_perturbation(3, 1.0, 3.0, (1.0, 1.5)).unwrap();
    let rep = validate_fa(&f, 3.0, &default_ladder(), 3).unwrap();
    assert!(rep.pass, "{:?}", rep.pass_per_k);
    for s in &rep.suprema[0] {
        assert!((s - 1.0).abs() < 1e-9, "{s}");
    }
}

#[test]
fn sharpness_fails_above_its_exponent() {
    let f = RightHandSide::sharpness(2).unwrap();
    let rep = validate_fa(&f, 2.5, &default_ladder(), 0).unwrap();
    assert!(!rep.pass);
    assert!((rep.growth_exponents[0] - 0.5).abs() < 1e-6);
    let rep = validate_fa(&f, 2.0, &default_ladder(), 3).unwrap();
    assert!(rep.pass);
}

#[test]
fn sharpness_bridge_values() {
    let f = RightHandSide::sharpness(3).unwrap();
    assert_eq!(f.eval(&[0.5, 0.0, 0.0]), 1.0);
    assert_eq!(f.eval(&[0.0, 3.0, 0.0]), 1.0 + 1.0 / 9.0);
    for k in 0..=100 {
        let r = 1.0 + k as f64 / 100.0;
        assert!(f.eval(&[r, 0.0, 0.0]) > 0.0);
    }
}

#[test]
fn far_field_rejects_bad_matrices() {
    let b = DVector::zeros(2);
    assert!(QuadraticFarField::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]), b.clone(), 0.0, 0.0).is_err());
    assert!(QuadraticFarField::new(DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 0.5]), b.clone(), 0.0, 0.0).is_err());
    assert!(QuadraticFarField::new(DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]), b, 0.0, 0.0).is_err());
    let a3 = DMatrix::identity(3, 3);
    assert!(QuadraticFarField::new(a3, DVector::zeros(3), 0.0, 1.0).is_err());
}

#[test]
fn far_field_is_exactly_quadratic_without_log() {
    let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
    let q = QuadraticFarField::new(a, DVector::from_vec(vec![1.0, -1.0]), 3.0, 0.0).unwrap();
    let h = 0.5;
    for x in [[1.0, 2.0], [-3.0, 0.5], [7.0, -7.0]] {
        let dxx = q.evaluate(&[x[0] + h, x[1]]) - 2.0 * q.evaluate(&x) + q.evaluate(&[x[0] - h, x[1]]);
        assert!((dxx / (h * h) - 2.0).abs() < 1e-10);
    }
    assert!((q.evaluate(&[1.0, 0.0]) - (1.0 + 1.0 + 3.0)).abs() < 1e-14);
}

#[test]
fn problem_json_round_trip_and_truncation_check() {
    let text = r#"{
        "n": 2,
        "rhs": {"kind": "compact_bump", "params": {"amplitude": 1.0, "center": [0.0, 0.0], "width": 2.0}},
        "domain": {"kind": "ball", "center": [0.0, 0.0], "radius": 1.0},
        "phi": {"expr": "0.5"},
        "far_field": {"A": [1.0, 0.0, 0.0, 1.0], "b": [0.0, 0.0], "c": 0.0, "d": 0.0},
        "R_out": 8.0
    }"#;
    let p = ProblemSpec::from_json(text).unwrap();
    assert_eq!(p.n, 2);
    let again = ProblemSpec::from_config(&p.to_config()).unwrap();
    assert_eq!(again, p);
    let d = InnerDomain::ball(vec![0.0, 0.0], 1.0).unwrap();
    let small = ProblemSpec::new(RightHandSide::one(2), Some(d), BoundaryData::constant(0.0), QuadraticFarField::identity(2, 0.0).unwrap(), 3.0);
    assert!(small.is_err());
}

#[test]
fn ellipse_is_strictly_convex_and_contains_its_inner_ball() {
    let e = InnerDomain::ellipse([0.5, -0.2], (2.0, 1.0), 0.4).unwrap();
    assert!(e.min_curvature() > 0.0);
    for p in e.boundary_samples(200) {
        assert!(p.curvature >= e.min_curvature() - 1e-12);
    }
    let rho = e.inradius();
    for k in 0..64 {
        let t = k as f64 * std::f64::consts::TAU / 64.0;
        assert!(e.contains(&[0.5 + 0.999 * rho * t.cos(), -0.2 + 0.999 * rho * t.sin()]));
    }
}
