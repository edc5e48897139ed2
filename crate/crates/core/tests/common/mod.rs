#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use prescurv::mesh::{build_annulus, Grid, ScalarField};
use prescurv::metric::cusp_metric;
use prescurv::problem::{blend_target, manufactured_target, CurvatureProblem, InnerTarget};

pub const R_IN: f64 = 0.05;
pub const R_OUT: f64 = 0.5;

pub fn cusp_grid(n_r: usize, n_theta: usize) -> Arc<Grid<f64>> {
    build_annulus::<f64>(R_IN, R_OUT, n_r, n_theta).unwrap()
}

/// Cusp background with `K = K0` within `collar_frac · (r_out - r_in)` of the
/// boundary and `scale · K0` in the core.
pub fn scaled_problem(n_r: usize, n_theta: usize, scale: f64, collar_frac: f64) -> CurvatureProblem<f64> {
    let g = cusp_grid(n_r, n_theta);
    let m = cusp_metric(&g).unwrap();
    let w = collar_frac * (R_OUT - R_IN);
    let k = blend_target(&m, &InnerTarget::Scale(scale), w).unwrap();
    CurvatureProblem::new(m, k, w).unwrap()
}

/// `s · sin(π (r - r_in) / (r_out - r_in))`, zero on both circles.
pub fn radial_bump(g: &Arc<Grid<f64>>, s: f64) -> ScalarField<f64> {
    ScalarField::from_fn(g, |r, _| s * (PI * (r - R_IN) / (R_OUT - R_IN)).sin()).interior_only()
}

/// Problem whose exact discrete solution is [`radial_bump`] with amplitude `s`.
pub fn manufactured_problem(n_r: usize, n_theta: usize, s: f64) -> (CurvatureProblem<f64>, ScalarField<f64>) {
    let g = cusp_grid(n_r, n_theta);
    let m = cusp_metric(&g).unwrap();
    let star = radial_bump(&g, s);
    let k = manufactured_target(&m, &star).unwrap();
    (CurvatureProblem::new(m, k, 0.0).unwrap(), star)
}
