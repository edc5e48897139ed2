mod common;

use common::{manufactured_problem, scaled_problem, R_IN};
use prescurv::mesh::{build_rectangle, inner_product, random_interior_field, ScalarField};
use prescurv::metric::{curvature_conformal, cusp_factor, flat_metric};
use prescurv::problem::{residual_noise_floor, CurvatureProblem, LinearizedOperator};
use prescurv::solver::{
    extend_by_zero, gradient_descent_solve, newton_solve, newton_solve_with, quadratic_tail, solve, standard_seeds,
    uniqueness_check, LineSearch, Method, Seed, SolverConfig,
};
use prescurv::Error;

fn cfg() -> SolverConfig<f64> {
    SolverConfig::default()
}

fn zeros(p: &CurvatureProblem<f64>) -> ScalarField<f64> {
    ScalarField::zeros(p.grid())
}

#[test]
fn background_target_needs_no_iterations() {
    let p = scaled_problem(65, 32, 1.0, 0.1);
    for method in [Method::Newton, Method::Gradient] {
        let res = solve(&p, &zeros(&p), &SolverConfig { method, ..cfg() }).unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations(), 0);
        assert_eq!(res.final_record().s, 0.0);
        assert_eq!(res.sigma.max_abs(), 0.0);
    }
}

#[test]
fn newton_recovers_manufactured_solution() {
    let (p, star) = manufactured_problem(128, 256, -0.3);
    let res = newton_solve(&p, &zeros(&p), &SolverConfig { tol_b: 1e-10, ..cfg() }).unwrap();
    assert!(res.converged);
    assert!(res.iterations() <= 10);
    assert!(res.sigma.max_abs_diff(&star) <= 1e-8);
    assert!(res.final_record().s <= 1e-20);
    let floor = residual_noise_floor(&res.sigma, &p).unwrap();
    let tail = quadratic_tail(&res.history, 3, floor);
    assert!(tail.bounded_by(1.0), "{tail:?}");
    assert_eq!(res.boundary.max_sigma, 0.0);
}

#[test]
fn newton_steps_see_a_positive_operator() {
    let p = scaled_problem(65, 64, 2.0, 0.1);
    let w = p.metric().area_weights().clone();
    let mut checked = 0;
    let res = newton_solve_with(&p, &zeros(&p), &cfg(), |_, sigma| {
        let op = LinearizedOperator::at(sigma, &p).unwrap();
        for seed in 0..3 {
            let u = random_interior_field(p.grid(), 1.0, 100 + seed);
            assert!(inner_product(&op.apply(&u), &u, &w).unwrap() > 0.0);
        }
        checked += 1;
    })
    .unwrap();
    assert!(res.converged);
    assert_eq!(checked, res.history.len());
}

#[test]
fn attainment_leaves_residual_below_tolerance() {
    for (scale, collar) in [(2.0, 0.1), (1.5, 0.2), (3.0, 0.1)] {
        let p = scaled_problem(65, 64, scale, collar);
        let tol = 1e-10;
        let res = newton_solve(&p, &zeros(&p), &SolverConfig { tol_b: tol, ..cfg() }).unwrap();
        assert!(res.converged);
        assert!(res.final_record().s <= tol * tol * p.metric().area());
        assert_eq!(res.boundary.max_sigma, 0.0);
        assert!(res.boundary.max_normal_derivative.is_finite());
        assert!(res.boundary.max_laplacian.is_finite());
    }
}

#[test]
fn gradient_descent_on_manufactured_problem() {
    let (p, star) = manufactured_problem(33, 64, -0.3);
    let gcfg = SolverConfig {
        method: Method::Gradient,
        tol_b: 1e-6,
        max_iter: 100_000,
        ..cfg()
    };
    let res = gradient_descent_solve(&p, &zeros(&p), &gcfg).unwrap();
    assert!(res.converged);
    assert!(res.final_record().s <= 1e-12);
    assert!(res.sigma.max_abs_diff(&star) <= 1e-4);
    for w in res.history.windows(2) {
        assert!(w[1].s < w[0].s);
    }
}

#[test]
fn newton_and_gradient_descent_agree() {
    let p = scaled_problem(33, 64, 2.0, 0.1);
    let tol = 1e-8;
    let newton = newton_solve(&p, &zeros(&p), &SolverConfig { tol_b: 1e-12, ..cfg() }).unwrap();
    let gd = gradient_descent_solve(
        &p,
        &zeros(&p),
        &SolverConfig {
            method: Method::Gradient,
            tol_b: tol,
            max_iter: 100_000,
            ..cfg()
        },
    )
    .unwrap();
    assert!(gd.converged);
    assert!(gd.sigma.max_abs_diff(&newton.sigma) <= 10.0 * tol);
}

#[test]
fn solutions_are_unique_across_seeds() {
    let p = scaled_problem(65, 64, 2.0, 0.1);
    let report = uniqueness_check(&p, &standard_seeds(), &cfg()).unwrap();
    assert_eq!(report.solutions.len(), 4);
    assert!(report.max_distance <= 1e-8, "{}", report.max_distance);
    assert!(report.energy.holds(), "{:?}", report.energy);

    let single = uniqueness_check(&p, &[Seed::Zero], &cfg()).unwrap();
    assert_eq!(single.max_distance, 0.0);
}

#[test]
fn every_seed_recovers_manufactured_solution() {
    let (p, star) = manufactured_problem(65, 64, -0.3);
    let report = uniqueness_check(&p, &standard_seeds(), &cfg()).unwrap();
    for s in &report.solutions {
        assert!(s.sigma.max_abs_diff(&star) <= 1e-8);
    }
}

#[test]
fn seed_failure_is_reported() {
    let p = scaled_problem(65, 64, 2.0, 0.1);
    let tight = SolverConfig { max_iter: 1, ..cfg() };
    assert!(matches!(
        uniqueness_check(&p, &[Seed::Uniform(0.3)], &tight),
        Err(Error::SeedNotConverged { seed: 0, .. })
    ));
}

#[test]
fn extension_of_trivial_solution_is_zero() {
    let p = scaled_problem(65, 32, 1.0, 0.1);
    let res = newton_solve(&p, &zeros(&p), &cfg()).unwrap();
    let ext = extend_by_zero(&res, &p, 0.02, cusp_factor).unwrap();
    assert_eq!(ext.sigma.max_abs(), 0.0);
    assert_eq!(ext.seam.sigma_jump, 0.0);
    assert_eq!(ext.seam.normal_derivative_jump, 0.0);
}

#[test]
fn extension_keeps_background_curvature_off_the_domain() {
    let p = scaled_problem(65, 64, 2.0, 0.1);
    let res = newton_solve(&p, &zeros(&p), &cfg()).unwrap();
    let ext = extend_by_zero(&res, &p, 0.02, cusp_factor).unwrap();
    assert!(ext.grid.axis1()[0] < R_IN);
    assert_eq!(ext.seam.sigma_jump, 0.0);
    assert!(ext.seam.normal_derivative_jump.is_finite());
    let k = curvature_conformal(&ext.conformal_factor()).unwrap();
    let k0 = ext.metric.curvature();
    // nodes whose stencil stays outside the original domain
    for i in 0..ext.seam_index - 1 {
        for j in 0..ext.grid.n2() {
            assert_eq!(k.at(i, j), k0.at(i, j));
            assert_eq!(ext.sigma.at(i, j), 0.0);
        }
    }
    for i in 0..p.grid().n1() {
        for j in 0..p.grid().n2() {
            assert_eq!(ext.sigma.at(i + ext.seam_index, j), res.sigma.at(i, j));
        }
    }
}

#[test]
fn extension_needs_an_annulus() {
    let g = build_rectangle::<f64>(1.0, 1.0, 17, 17).unwrap();
    let m = flat_metric(&g).scaled(1.0).unwrap();
    let k = ScalarField::constant(&g, -1.0);
    // flat background has K0 = 0 on the boundary, which the problem rejects
    assert!(matches!(
        CurvatureProblem::new(m, k, 0.0),
        Err(Error::BoundaryCurvatureNotNegative { .. })
    ));
}

#[test]
fn mesh_refinement_is_second_order() {
    // nested grids: node (i, j) of a level is node (2i, 2j) of the next
    let levels: Vec<_> = [(65, 64), (129, 128), (257, 256)]
        .iter()
        .map(|&(n_r, n_t)| {
            let p = scaled_problem(n_r, n_t, 2.0, 0.1);
            newton_solve(&p, &zeros(&p), &cfg()).unwrap().sigma
        })
        .collect();
    let diff = |c: &ScalarField<f64>, f: &ScalarField<f64>| {
        let mut d: f64 = 0.0;
        for i in 0..c.grid().n1() {
            for j in 0..c.grid().n2() {
                d = d.max((c.at(i, j) - f.at(2 * i, 2 * j)).abs());
            }
        }
        d
    };
    let e0 = diff(&levels[0], &levels[1]);
    let e1 = diff(&levels[1], &levels[2]);
    assert!(e0 / e1 >= 3.0, "{e0} {e1}");
}

#[test]
fn invalid_configurations_are_rejected() {
    let p = scaled_problem(65, 32, 2.0, 0.1);
    let bad = [
        SolverConfig { tol_b: 0.0, ..cfg() },
        SolverConfig { cg_tol: -1.0, ..cfg() },
        SolverConfig {
            line_search: LineSearch {
                c1: 0.7,
                ..LineSearch::default()
            },
            ..cfg()
        },
        SolverConfig {
            line_search: LineSearch {
                backtrack: 1.0,
                ..LineSearch::default()
            },
            ..cfg()
        },
    ];
    for c in bad {
        assert!(matches!(
            newton_solve(&p, &zeros(&p), &c),
            Err(Error::InvalidParameter(_))
        ));
    }
}

#[test]
fn start_must_vanish_on_the_boundary() {
    let p = scaled_problem(65, 32, 2.0, 0.1);
    let s0 = ScalarField::constant(p.grid(), 0.1);
    assert!(matches!(
        newton_solve(&p, &s0, &cfg()),
        Err(Error::BoundaryNotZero { .. })
    ));
}

#[test]
fn iteration_cap_yields_unconverged_result() {
    let p = scaled_problem(65, 32, 2.0, 0.1);
    let res = newton_solve(&p, &zeros(&p), &SolverConfig { max_iter: 1, ..cfg() }).unwrap();
    assert!(!res.converged);
    assert_eq!(res.history.len(), 2);
}

#[test]
fn single_precision_solve() {
    let g = prescurv::mesh::build_annulus::<f32>(0.05, 0.5, 65, 32).unwrap();
    let m = prescurv::metric::cusp_metric(&g).unwrap();
    let k = prescurv::problem::blend_target(&m, &prescurv::problem::InnerTarget::Scale(2.0), 0.045).unwrap();
    let p = CurvatureProblem::new(m, k, 0.045).unwrap();
    let cfg = SolverConfig::<f32> {
        tol_b: 1e-3,
        ..SolverConfig::default()
    };
    let res = newton_solve(&p, &ScalarField::zeros(p.grid()), &cfg).unwrap();
    assert!(res.converged);

    let g64 = common::cusp_grid(65, 32);
    let p64 = scaled_problem(65, 32, 2.0, 0.1);
    let res64 = newton_solve(&p64, &zeros(&p64), &SolverConfig::default()).unwrap();
    let gap = (0..g64.len())
        .map(|k| (f64::from(res.sigma.get(k)) - res64.sigma.get(k)).abs())
        .fold(0.0, f64::max);
    assert!(gap < 1e-3, "{gap}");
}
