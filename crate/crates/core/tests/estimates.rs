mod common;

use common::{cusp_grid, scaled_problem, R_IN, R_OUT};
use prescurv::estimates::{
    b_terms_report, convergence_monitor, dz_modulus, g_field, integration_by_parts, omega_partition,
};
use prescurv::mesh::{build_rectangle, random_interior_field, ScalarField};
use prescurv::metric::cusp_metric;
use prescurv::problem::{blend_target, CurvatureProblem, InnerTarget};
use prescurv::solver::{newton_solve_with, IterationRecord, SolverConfig};
use prescurv::Error;
use proptest::prelude::*;

fn record(iter: usize, s: f64, lap: f64) -> IterationRecord<f64> {
    IterationRecord {
        iter,
        s,
        b_l2: s.sqrt(),
        grad_norm: 0.0,
        step: 1.0,
        lap_sigma_l2: lap,
        cg_iterations: 0,
    }
}

#[test]
fn g_of_linear_curvature_is_exact() {
    let g = build_rectangle::<f64>(1.0, 1.0, 17, 17).unwrap();
    let k = ScalarField::from_fn(&g, |x, _| -1.0 - x);
    let gf = g_field(&k).unwrap();
    for i in 0..g.len() {
        let (x, _) = g.coords(i);
        let want = if g.is_boundary(i) { 0.0 } else { -0.5 / (1.0 + x) };
        assert!((gf[i].re - want).abs() <= 1e-12);
        assert!(gf[i].im.abs() <= 1e-12);
    }
}

#[test]
fn g_of_exponential_in_y_is_constant() {
    let g = build_rectangle::<f64>(1.0, 1.0, 129, 129).unwrap();
    let k = ScalarField::from_fn(&g, |_, y| -y.exp());
    let gf = g_field(&k).unwrap();
    for i in 0..g.len() {
        if !g.is_boundary(i) {
            assert!(gf[i].re.abs() <= 1e-12);
            assert!((gf[i].im + 0.5).abs() <= 1e-4);
        }
    }
}

#[test]
fn g_needs_negative_curvature() {
    let g = build_rectangle::<f64>(1.0, 1.0, 9, 9).unwrap();
    let k = ScalarField::constant(&g, -1.0).with_value(40, 0.0);
    assert!(matches!(g_field(&k), Err(Error::NonNegativeCurvature { .. })));
}

#[test]
fn constant_curvature_leaves_third_region_empty() {
    let g = cusp_grid(33, 32);
    let k = ScalarField::constant(&g, -1.0);
    let sigma = random_interior_field(&g, 0.2, 4);
    let part = omega_partition(&sigma, &k).unwrap();
    let (n1, n2, n3) = part.sizes();
    assert_eq!(n3, 0);
    assert_eq!(n1 + n2, g.interior_count());
    let zero = omega_partition(&ScalarField::zeros(&g), &k).unwrap();
    assert_eq!(zero.sizes(), (0, g.interior_count(), 0));
}

#[test]
fn steep_curvature_populates_third_region() {
    // |g| = 5/2 and |K| e^σ = e^{5x}, so Ω₃ is x ≤ ln(6.25)/5
    let g = build_rectangle::<f64>(1.0, 1.0, 65, 65).unwrap();
    let k = ScalarField::from_fn(&g, |x, _| -(5.0 * x).exp());
    let part = omega_partition(&ScalarField::zeros(&g), &k).unwrap();
    let cut = 6.25f64.ln() / 5.0;
    for i in 0..g.len() {
        let (x, _) = g.coords(i);
        let l = part.labels[i];
        if g.is_boundary(i) {
            assert_eq!(l, 0);
        } else if x < cut - 0.02 {
            assert_eq!(l, 3);
        } else if x > cut + 0.02 {
            assert_eq!(l, 2);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn partition_matches_brute_force(seed in 0u64..1000, amp in 0.01f64..2.0, slope in 0.1f64..8.0) {
        let g = cusp_grid(17, 16);
        let k = ScalarField::from_cartesian_fn(&g, |x, y| -(slope * (x - 0.3 * y)).exp());
        let sigma = random_interior_field(&g, amp, seed);
        let part = omega_partition(&sigma, &k).unwrap();
        let gf = g_field(&k).unwrap();
        let dz = dz_modulus(&sigma);
        for i in 0..g.len() {
            let want = if g.is_boundary(i) {
                0
            } else {
                let gm = gf[i].norm();
                match (dz.get(i) > gm, -k.get(i) * sigma.get(i).exp() > gm * gm) {
                    (true, _) => 1,
                    (false, true) => 2,
                    (false, false) => 3,
                }
            };
            prop_assert_eq!(part.labels[i], want);
        }
        let (a, b, c) = part.sizes();
        prop_assert_eq!(a + b + c, g.interior_count());
    }
}

#[test]
fn integration_by_parts_is_second_order() {
    let gap = |n_r: usize, n_t: usize| {
        let g = cusp_grid(n_r, n_t);
        let sigma = ScalarField::from_fn(&g, |r, t| 0.3 * (r * 4.0).sin() * (1.0 + 0.2 * t.cos()));
        let k = ScalarField::from_fn(&g, |r, t| -(1.0 + r * r + 0.1 * (2.0 * t).sin()));
        integration_by_parts(&sigma, &k).unwrap().relative_gap()
    };
    let (a, b, c) = (gap(65, 64), gap(129, 128), gap(257, 256));
    assert!(a / b >= 3.5 && b / c >= 3.5, "{a} {b} {c}");
}

#[test]
fn estimates_hold_along_newton_iterates() {
    let p = scaled_problem(65, 64, 2.0, 0.1);
    let mut reports = Vec::new();
    let res = newton_solve_with(
        &p,
        &ScalarField::zeros(p.grid()),
        &SolverConfig::default(),
        |_, sigma| {
            reports.push(b_terms_report(sigma, &p).unwrap());
        },
    )
    .unwrap();
    assert!(res.converged);
    assert_eq!(reports.len(), res.history.len());
    for r in &reports {
        assert!(r.all_ok(), "{r:?}");
        let (a, b, c) = r.partition_sizes;
        assert_eq!(a + b + c, p.grid().interior_count());
    }
}

#[test]
fn steep_target_breaks_region_sign_and_is_flagged() {
    // The sign of B₂ is only guaranteed after integrating by parts over all of
    // M; restricted to Ω₂ the literal integrand can go negative.
    let g = cusp_grid(65, 64);
    let m = cusp_metric(&g).unwrap();
    let w = 0.1 * (R_OUT - R_IN);
    let inner = ScalarField::from_cartesian_fn(&g, |x, y| -2.0 * (3.0 * x + y).exp());
    let k = blend_target(&m, &InnerTarget::Field(inner), w).unwrap();
    let p = CurvatureProblem::new(m, k, w).unwrap();
    let res = prescurv::solver::newton_solve(&p, &ScalarField::zeros(p.grid()), &SolverConfig::default()).unwrap();
    assert!(res.converged);
    let r = b_terms_report(&res.sigma, &p).unwrap();
    assert!(r.partition_identity_gap <= 1e-10);
    assert!(r.bound_ok && r.energy_ok && r.b1_ok);
    assert!(r.b2 < -r.eps_q);
    assert!(!r.b2_ok && !r.all_ok());
}

#[test]
fn background_target_puts_all_mass_in_second_region() {
    let g = prescurv::mesh::build_annulus::<f64>(0.1, 0.8, 65, 64).unwrap();
    let m = prescurv::metric::poincare_metric(&g).unwrap();
    let k = m.curvature().clone();
    let p = CurvatureProblem::new(m, k, 0.0).unwrap();
    let r = b_terms_report(&ScalarField::zeros(&g), &p).unwrap();
    assert_eq!((r.b1, r.b3), (0.0, 0.0));
    assert_eq!(r.partition_sizes, (0, g.interior_count(), 0));
    let dmu = p.metric().area_weights();
    let k0 = p.metric().curvature();
    let want: f64 = (0..g.len())
        .filter(|&i| !g.is_boundary(i))
        .map(|i| dmu.get(i) * k0.get(i) * k0.get(i))
        .sum();
    assert!((r.b2 - want).abs() <= 1e-12 * want);
    assert!(r.bound_ok);
    assert!(r.all_ok());
}

#[test]
fn manufactured_profile_has_gradient_region() {
    let g = cusp_grid(65, 64);
    let sigma = common::radial_bump(&g, -0.3);
    let k = ScalarField::from_cartesian_fn(&g, |x, _| -1.0 - x);
    let part = omega_partition(&sigma, &k).unwrap();
    let gf = g_field(&k).unwrap();
    let dz = dz_modulus(&sigma);
    assert!(part.sizes().0 > 0);
    for i in 0..g.len() {
        if !g.is_boundary(i) && dz.get(i) > gf[i].norm() {
            assert_eq!(part.labels[i], 1);
        }
    }
}

#[test]
fn monitor_accepts_monotone_settled_history() {
    let h: Vec<_> = (0..8)
        .map(|i| record(i, 10f64.powi(-(2 * i as i32)), 1.0 + 1e-4 / (i + 1) as f64))
        .collect();
    let rep = convergence_monitor(&h, 1e-6);
    assert!(!rep.degenerate);
    assert!(rep.all_ok(), "{rep:?}");
    assert_eq!(rep.first_increase, None);
}

#[test]
fn monitor_flags_increase_and_oscillation() {
    let h = vec![
        record(0, 1.0, 1.0),
        record(1, 0.5, 2.0),
        record(2, 0.7, 1.0),
        record(3, 0.1, 2.0),
    ];
    let rep = convergence_monitor(&h, 1e-6);
    assert!(!rep.s_non_increasing);
    assert_eq!(rep.first_increase, Some(2));
    assert!(!rep.tail_settled);
    assert!((rep.tail_oscillation - 2.0 / 3.0).abs() <= 1e-12);
    assert!(!rep.final_s_ok);
}

#[test]
fn monitor_with_single_record_is_degenerate() {
    let rep = convergence_monitor(&[record(0, 0.0, 0.0)], 1e-6);
    assert!(rep.degenerate && rep.all_ok());
    let empty = convergence_monitor::<f64>(&[], 1e-6);
    assert_eq!(empty.records, 0);
}
