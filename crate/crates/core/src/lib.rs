//! Conformal metrics of prescribed negative Gaussian curvature.
//!
//! Given a background metric `h |dz|²` on an annulus or rectangle and a
//! negative target `K` that matches the background curvature near the
//! boundary, the solvers find `σ` with `σ = 0` on the boundary such that
//! `e^σ h |dz|²` has curvature `K`. Everything is generic over [`Real`]
//! (`f32` or `f64`); the aliases below fix the scalar to `f64`.
//!
//! ```
//! use prescurv::{mesh, metric, problem, solver};
//!
//! let grid = mesh::build_annulus(0.05, 0.5, 65, 64).unwrap();
//! let m = metric::cusp_metric(&grid).unwrap();
//! let collar = 0.045;
//! let k = problem::blend_target(&m, &problem::InnerTarget::Scale(2.0), collar).unwrap();
//! let p = problem::CurvatureProblem::new(m, k, collar).unwrap();
//! let sigma0 = mesh::ScalarField::zeros(p.grid());
//! let res = solver::newton_solve(&p, &sigma0, &solver::SolverConfig::default()).unwrap();
//! assert!(res.converged);
//! ```

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimates;
pub mod mesh;
pub mod metric;
pub mod problem;
pub mod scalar;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use mesh::{build_annulus, build_rectangle, Grid, GridKind, Node, ScalarField};
pub use metric::ConformalMetric;
pub use problem::CurvatureProblem;
pub use scalar::Real;
pub use solver::{SolveResult, SolverConfig};

pub type Grid64 = Grid<f64>;
pub type Field64 = ScalarField<f64>;
pub type ConformalMetric64 = ConformalMetric<f64>;
pub type CurvatureProblem64 = CurvatureProblem<f64>;
pub type SolverConfig64 = SolverConfig<f64>;
pub type SolveResult64 = SolveResult<f64>;
pub type Spectrum64 = spectral::Spectrum<f64>;
pub type EstimateReport64 = estimates::EstimateReport<f64>;

pub type Grid32 = Grid<f32>;
pub type Field32 = ScalarField<f32>;
pub type ConformalMetric32 = ConformalMetric<f32>;
pub type CurvatureProblem32 = CurvatureProblem<f32>;
pub type SolverConfig32 = SolverConfig<f32>;
pub type SolveResult32 = SolveResult<f32>;
