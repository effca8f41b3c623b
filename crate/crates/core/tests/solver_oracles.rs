use std::sync::Arc;

use exterior_ma::domain::InnerDomain;
use exterior_ma::radial::exact_radial_solution;
use exterior_ma::rhs::ConstantRadial;
use exterior_ma::solver::*;
use exterior_ma::{BoundaryData, ProblemSpec, QuadraticFarField, RightHandSide};

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn unit_hole() -> InnerDomain {
    InnerDomain::ball(vec![0.0, 0.0], 1.0).unwrap()
}

fn annulus_problem(rhs: RightHandSide) -> ProblemSpec {
    ProblemSpec::new(rhs, Some(unit_hole()), BoundaryData::constant(0.5), QuadraticFarField::identity(2, 0.0).unwrap(), 4.0).unwrap()
}

fn solve_from_paraboloid(grid: Arc<Grid>, data: DirichletData, kind: InitKind, opts: &SolverOptions) -> DiscreteSolution {
    let (lam, shift) = paraboloid_start(&grid, &data, kind).unwrap();
    let start = move |x: &[f64]| 0.5 * lam * norm(x).powi(2) + shift;
    let init = match kind {
        InitKind::Subsolution => Init::Subsolution(&start),
        _ => Init::Supersolution(&start),
    };
    solve_with_data(grid, data, init, opts).unwrap()
}

#[test]
fn operator_matches_the_sharpness_profile() {
    let f = RightHandSide::sharpness(2).unwrap();
    let prof = exact_radial_solution(Arc::new(f.to_radial().unwrap()), 2, 0.0, 0.0, 0.0).unwrap();
    let mut errors = Vec::new();
    for (h, w) in [(0.25, 3), (0.125, 5)] {
        let g = Grid::new(2, None, 8.0, h, w).unwrap();
        let values: Vec<f64> = (0..g.len()).map(|i| prof.u(norm(&g.point(i)[..2]))).collect();
        let boundary = g.boundary_values(|p, _| prof.u(norm(p)));
        let node = g.node_at(&[(5.0 / h) as i64, 0]).unwrap();
        let e = (ma_operator(&values, &g, &boundary, node) - 1.04).abs();
        errors.push(e);
    }
    assert!(errors[1] < errors[0], "{errors:?}");
    assert!(errors[1] < 5e-3, "{errors:?}");
}

#[test]
fn paraboloid_on_the_annulus() {
    let p = annulus_problem(RightHandSide::one(2));
    for (h, w) in [(0.25, 1), (0.125, 3)] {
        let g = Arc::new(Grid::new(2, Some(&unit_hole()), 4.0, h, w).unwrap());
        let data = DirichletData::from_problem(&p, &g).unwrap();
        let sol = solve_from_paraboloid(g, data, InitKind::Subsolution, &SolverOptions::default());
        assert!(sol.start_verified);
        assert!(sol.residual_norm() <= sol.tol);
        assert!(sol.max_error(|x| 0.5 * norm(x).powi(2)) < 1e-7);
        assert!(sol.is_convex());
    }
}

#[test]
fn radial_bump_tracks_its_oracle() {
    let h = 0.125;
    let g = Arc::new(Grid::new(2, Some(&unit_hole()), 4.0, h, 5).unwrap());
    let bump = RightHandSide::compact_bump(2, 1.0, vec![0.0, 0.0], 2.0).unwrap();
    let mut errors = Vec::new();
    for rhs in [RightHandSide::one(2), bump] {
        let prof = exact_radial_solution(Arc::new(rhs.to_radial().unwrap()), 2, 2.0, 1.0, 0.0).unwrap();
        let data = DirichletData {
            source: (0..g.len()).map(|i| rhs.eval(&g.point(i)[..2])).collect(),
            boundary: g.boundary_values(|p, _| prof.u(norm(p).max(1.0))),
        };
        let sol = solve_from_paraboloid(g.clone(), data, InitKind::Subsolution, &SolverOptions::default());
        errors.push(sol.max_error(|x| prof.u(norm(x).max(1.0))));
    }
    assert!(errors[0] > 0.0);
    assert!(errors[1] <= 3.0 * errors[0], "{errors:?}");
}

#[test]
fn two_sided_starts_meet() {
    let p = annulus_problem(RightHandSide::compact_bump(2, 0.5, vec![0.0, 0.0], 3.0).unwrap());
    let g = Arc::new(Grid::new(2, Some(&unit_hole()), 4.0, 0.125, 3).unwrap());
    let data = DirichletData::from_problem(&p, &g).unwrap();
    let opts = SolverOptions::default();
    let a = solve_from_paraboloid(g.clone(), data.clone(), InitKind::Subsolution, &opts);
    let b = solve_from_paraboloid(g, data, InitKind::Supersolution, &opts);
    assert!(a.start_verified && b.start_verified);
    let gap = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(gap <= 10.0 * opts.tol, "{gap}");
}

#[test]
fn comparison_examples() {
    let g = Arc::new(Grid::new(2, Some(&unit_hole()), 4.0, 0.125, 3).unwrap());
    let opts = SolverOptions::default();
    let f_big = RightHandSide::constant(2, 1.2).unwrap();
    let f_one = RightHandSide::one(2);
    let solve = |rhs: &RightHandSide, lift: f64| {
        let p = annulus_problem(rhs.clone());
        let mut data = DirichletData::from_problem(&p, &g).unwrap();
        for (v, (_, kind)) in data.boundary.iter_mut().zip(g.boundary_points()) {
            if *kind == BoundaryKind::Outer {
                *v += lift;
            }
        }
        solve_from_paraboloid(g.clone(), data, InitKind::Subsolution, &opts)
    };
    let same_a = solve(&f_one, 0.0);
    let same_b = solve(&f_one, 0.0);
    let rep = comparison_check(&same_a, &same_b, &f_one, &f_one).unwrap();
    assert!(rep.worst_violation.abs() <= 2.0 * opts.tol);
    let big = solve(&f_big, 0.0);
    let rep = comparison_check(&big, &same_a, &f_big, &f_one).unwrap();
    assert!(rep.ordered && rep.worst_violation < 0.0);
    let lifted = solve(&f_one, 1.0);
    let rep = comparison_check(&same_a, &lifted, &f_one, &f_one).unwrap();
    assert!(rep.ordered);
    let other = Arc::new(Grid::new(2, Some(&unit_hole()), 4.0, 0.25, 3).unwrap());
    let p = annulus_problem(f_one.clone());
    let coarse = solve_from_paraboloid(other.clone(), DirichletData::from_problem(&p, &other).unwrap(), InitKind::Subsolution, &opts);
    assert!(comparison_check(&coarse, &same_a, &f_one, &f_one).is_err());
}

#[test]
fn big_ball_sandwich_with_a_bump() {
    let f = RightHandSide::compact_bump(2, 1.0, vec![0.0, 0.0], 2.0).unwrap();
    let mut centres = Vec::new();
    for r in [4.0, 8.0] {
        let g = Arc::new(Grid::new(2, None, r, 0.25, 3).unwrap());
        let bb = solve_big_ball(&f, 2, r, g, &SolverOptions::default()).unwrap();
        assert!(bb.sandwich.passed);
        assert!(bb.sandwich.lower_margin >= -bb.sandwich.slack);
        let c = bb.solution.grid.node_at(&[0, 0]).unwrap();
        centres.push(bb.solution.values[c]);
    }
    // in the plane u_R(0) drifts like -m log R, m = 0.4
    let drift = centres[1] - centres[0];
    assert!((drift + 0.4 * 2f64.ln()).abs() < 0.05, "{drift}");
}

#[test]
fn export_writes_csv_and_metadata() {
    let p = annulus_problem(RightHandSide::one(2));
    let g = Arc::new(Grid::new(2, Some(&unit_hole()), 4.0, 0.5, 1).unwrap());
    let data = DirichletData::from_problem(&p, &g).unwrap();
    let sol = solve_from_paraboloid(g, data, InitKind::Subsolution, &SolverOptions::default());
    let dir = tempfile::tempdir().unwrap();
    let (c, j) = (dir.path().join("u.csv"), dir.path().join("u.json"));
    sol.export(&c, &j).unwrap();
    let text = std::fs::read_to_string(&c).unwrap();
    assert!(text.starts_with("x,y,value,residual"));
    assert_eq!(text.lines().count(), sol.values.len() + 1);
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&j).unwrap()).unwrap();
    assert_eq!(meta["stencil_width"], 1);
    assert_eq!(meta["init"], "subsolution");
}

#[test]
fn constant_radial_is_a_valid_profile_source() {
    let p = exact_radial_solution(Arc::new(ConstantRadial(1.0)), 2, 1.0, 1.0, 0.5).unwrap();
    assert!((p.u(3.0) - 4.5).abs() < 1e-10);
}

mod randomized {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn operator_is_monotone(seed in 0u64..1000, node in 0usize..200, bump in 0.001f64..0.5) {
            let g = Grid::new(2, Some(&unit_hole()), 3.0, 0.25, 2).unwrap();
            let id = node % g.len();
            let (a, b) = (1.0 + (seed % 7) as f64 * 0.1, 0.05 * (seed % 5) as f64);
            let u = |x: &[f64]| 0.5 * a * x[0] * x[0] + 0.5 * x[1] * x[1] + b * x[0] * x[1] + 0.01 * (seed as f64 * x[0]).sin();
            let mut v: Vec<f64> = (0..g.len()).map(|i| u(&g.point(i)[..2])).collect();
            let bd = g.boundary_values(|p, _| u(p));
            let before = ma_operator(&v, &g, &bd, id);
            for (j, x) in v.iter_mut().enumerate() {
                if j != id && (j as u64 + seed) % 3 == 0 {
                    *x += bump;
                }
            }
            prop_assert!(ma_operator(&v, &g, &bd, id) >= before - 1e-12);
            v[id] += bump;
            let after = ma_operator(&v, &g, &bd, id);
            let mut w = v.clone();
            w[id] -= bump;
            prop_assert!(after <= ma_operator(&w, &g, &bd, id) + 1e-12);
        }

        #[test]
        fn larger_constant_source_lies_below(lo in 0.5f64..1.5, extra in 0.05f64..1.0) {
            let g = Arc::new(Grid::new(2, Some(&unit_hole()), 4.0, 0.25, 2).unwrap());
            let opts = SolverOptions::default();
            let (f1, f2) = (RightHandSide::constant(2, lo + extra).unwrap(), RightHandSide::constant(2, lo).unwrap());
            let solve = |f: &RightHandSide| {
                let p = annulus_problem(f.clone());
                solve_from_paraboloid(g.clone(), DirichletData::from_problem(&p, &g).unwrap(), InitKind::Subsolution, &opts)
            };
            let rep = comparison_check(&solve(&f1), &solve(&f2), &f1, &f2).unwrap();
            prop_assert!(rep.ordered, "{rep:?}");
        }
    }
}
