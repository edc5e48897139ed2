use std::f64::consts::PI;

use proptest::prelude::*;

use prescurv::mesh::{
    boundary_flux, build_annulus, build_rectangle, flat_area_weights, flat_laplacian, inner_product, integrate,
    random_interior_field, ScalarField,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rectangle_stencil_is_exact_on_cubics(c in prop::array::uniform10(-2.0f64..2.0)) {
        let g = build_rectangle::<f64>(1.3, 0.7, 17, 13).unwrap();
        let f = ScalarField::from_cartesian_fn(&g, |x, y| {
            c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y
                + c[6] * x * x * x + c[7] * x * x * y + c[8] * x * y * y + c[9] * y * y * y
        });
        let lap = flat_laplacian(&f);
        let exact = ScalarField::from_cartesian_fn(&g, |x, y| {
            2.0 * c[3] + 2.0 * c[5] + 6.0 * c[6] * x + 2.0 * c[7] * y + 2.0 * c[8] * x + 6.0 * c[9] * y
        });
        // boundary values are one-sided and exact on cubics as well
        prop_assert!(lap.max_abs_diff(&exact) < 1e-9);
    }

    #[test]
    fn theta_shift_commutes_with_laplacian(seed in 0u64..1000, s in 1usize..31) {
        let g = build_annulus::<f64>(0.3, 1.2, 12, 32).unwrap();
        let f = random_interior_field(&g, 1.0, seed);
        let a = flat_laplacian(&f.roll_second_axis(s));
        let b = flat_laplacian(&f).roll_second_axis(s);
        prop_assert_eq!(a.values(), b.values());
    }

    #[test]
    fn inner_product_is_symmetric_and_positive(seed in 0u64..1000) {
        let g = build_annulus::<f64>(0.3, 1.2, 12, 16).unwrap();
        let w = flat_area_weights(&g);
        let f = random_interior_field(&g, 1.0, seed);
        let h = random_interior_field(&g, 1.0, seed + 1);
        prop_assert_eq!(inner_product(&f, &h, &w).unwrap(), inner_product(&h, &f, &w).unwrap());
        prop_assert!(inner_product(&f, &f, &w).unwrap() > 0.0);
    }
}

#[test]
fn unit_inner_product_is_area() {
    let g = build_annulus::<f64>(1.0, 2.0, 128, 256).unwrap();
    let w = flat_area_weights(&g);
    let one = ScalarField::constant(&g, 1.0);
    assert_eq!(inner_product(&one, &one, &w).unwrap(), integrate(&one, &w).unwrap());
    assert!((integrate(&one, &w).unwrap() - 3.0 * PI).abs() < 1e-3);
}

#[test]
fn cusp_area_matches_closed_form() {
    let g = build_annulus::<f64>(0.05, 0.5, 128, 256).unwrap();
    let m = prescurv::metric::cusp_metric(&g).unwrap();
    let exact = 2.0 * PI * (1.0 / 2f64.ln() - 1.0 / 20f64.ln());
    assert!((m.area() - exact).abs() < 1e-2, "{}", m.area());
}

#[test]
fn quadrature_converges_at_second_order() {
    let f = |x: f64, y: f64| (x * y).exp() * (1.0 + x);
    // reference from a much finer grid
    let reference = {
        let g = build_rectangle::<f64>(1.0, 1.0, 1025, 1025).unwrap();
        integrate(&ScalarField::from_cartesian_fn(&g, f), &flat_area_weights(&g)).unwrap()
    };
    let err = |n: usize| {
        let g = build_rectangle::<f64>(1.0, 1.0, n, n).unwrap();
        (integrate(&ScalarField::from_cartesian_fn(&g, f), &flat_area_weights(&g)).unwrap() - reference).abs()
    };
    let (e0, e1) = (err(33), err(65));
    assert!(e0 / e1 >= 3.5, "{e0} {e1}");

    let polar = |n: usize| {
        let g = build_annulus::<f64>(0.5, 1.5, n, 64).unwrap();
        let v = integrate(&ScalarField::from_fn(&g, |r, _| r.ln() + r * r), &flat_area_weights(&g)).unwrap();
        // ∫ (log r + r²) r dr dθ
        let a = |r: f64| r * r / 2.0 * r.ln() - r * r / 4.0 + r.powi(4) / 4.0;
        (v - 2.0 * PI * (a(1.5) - a(0.5))).abs()
    };
    assert!(polar(33) / polar(65) >= 3.5);
}

#[test]
fn divergence_identity_converges() {
    let gap = |n: usize| {
        let g = build_annulus::<f64>(0.5, 1.5, n, 2 * n).unwrap();
        let f = ScalarField::from_cartesian_fn(&g, |x, y| (x * x * y).sin() + x.exp() * y);
        let w = flat_area_weights(&g);
        (integrate(&flat_laplacian(&f), &w).unwrap() - boundary_flux(&f, None).unwrap()).abs()
    };
    // the one-sided boundary formulas make the discrete identity hold to
    // rounding on the annulus; either way it must not stall above O(Δ²)
    let (a, b) = (gap(33), gap(65));
    assert!(b <= a / 3.5 || b < 1e-11, "{a} {b}");

    let gap_rect = |n: usize| {
        let g = build_rectangle::<f64>(1.0, 1.0, n, n).unwrap();
        let f = ScalarField::from_cartesian_fn(&g, |x, y| (2.0 * x + y).sin() * (x * y).exp());
        let w = flat_area_weights(&g);
        (integrate(&flat_laplacian(&f), &w).unwrap() - boundary_flux(&f, None).unwrap()).abs()
    };
    let (a, b) = (gap_rect(33), gap_rect(65));
    assert!(b <= a / 3.5 || b < 1e-11, "{a} {b}");
}

#[test]
fn log_r_laplacian_small_at_unit_radius() {
    let g = build_annulus::<f64>(0.8, 1.2, 115, 64).unwrap();
    assert!((g.d1() - 3.5e-3).abs() < 1e-4);
    let lap = flat_laplacian(&ScalarField::from_fn(&g, |r, _| r.ln()));
    let i = g.axis1().iter().position(|&r| (r - 1.0).abs() < g.d1() / 2.0).unwrap();
    assert!(lap.at(i, 3).abs() < 1e-4);
    assert!(lap.max_abs_interior() < 1e-4);
}
