//! Solvers for `½Δ_hσ = K0 - K e^σ` with `σ = 0` on the boundary: damped
//! Newton on the residual, and steepest descent on `S`. Both confine updates
//! to interior nodes and stop on `b_l2`.

mod cg;
mod descent;
mod extend;
mod newton;
mod uniqueness;

pub use cg::{cg_solve, probe_operator, CgConfig, CgOutcome, FnOperator, LinearOperator};
pub use descent::{gradient_descent_solve, gradient_descent_solve_with};
pub use extend::{extend_by_zero, ExtendedSolution, SeamReport};
pub use newton::{newton_solve, newton_solve_with, quadratic_tail, QuadraticTail};
pub use uniqueness::{uniqueness_check, EnergyIdentity, UniquenessReport};

use crate::error::{Error, Result};
use crate::mesh::{inner_product, normal_derivative, random_interior_field, Grid, ScalarField};
use crate::problem::{gradient_from_residual, laplace_beltrami, CurvatureProblem, Residual};
use crate::scalar::Real;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Newton,
    Gradient,
}

/// Armijo backtracking on `S`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearch<T> {
    pub c1: T,
    pub backtrack: T,
    pub max_halvings: usize,
}

impl<T: Real> Default for LineSearch<T> {
    fn default() -> Self {
        Self {
            c1: T::lit(1e-4),
            backtrack: T::lit(0.5),
            max_halvings: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig<T> {
    pub method: Method,
    /// Converged once `b_l2 ≤ tol_b`.
    pub tol_b: T,
    pub max_iter: usize,
    pub cg_tol: T,
    pub cg_max_iter: usize,
    pub line_search: LineSearch<T>,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            method: Method::Newton,
            tol_b: T::lit(1e-10).max(T::epsilon() * T::lit(1e3)),
            max_iter: 50,
            cg_tol: cg::default_cg_tol(),
            cg_max_iter: 5000,
            line_search: LineSearch::default(),
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let ls = &self.line_search;
        if !(self.tol_b > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "tol_b must be positive, got {}",
                self.tol_b
            )));
        }
        if !(self.cg_tol > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "cg_tol must be positive, got {}",
                self.cg_tol
            )));
        }
        if !(ls.c1 > T::zero() && ls.c1 < T::lit(0.5)) {
            return Err(Error::InvalidParameter(format!(
                "armijo c1 must lie in (0, 1/2), got {}",
                ls.c1
            )));
        }
        if !(ls.backtrack > T::zero() && ls.backtrack < T::one()) {
            return Err(Error::InvalidParameter(format!(
                "backtrack factor must lie in (0, 1), got {}",
                ls.backtrack
            )));
        }
        Ok(())
    }

    pub(crate) fn cg(&self) -> CgConfig<T> {
        CgConfig {
            tol: self.cg_tol,
            max_iter: self.cg_max_iter,
            check_operator: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord<T> {
    pub iter: usize,
    pub s: T,
    pub b_l2: T,
    /// `‖∇S‖_dμ`.
    pub grad_norm: T,
    /// Step length that produced this iterate (0 for the initial guess).
    pub step: T,
    /// `‖Δ_hσ‖_dμ` over interior nodes.
    pub lap_sigma_l2: T,
    /// Inner CG iterations spent on this step (Newton only).
    pub cg_iterations: usize,
}

/// Boundary behaviour of a solution: `σ` is pinned, the other two are monitored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryReport<T> {
    pub max_sigma: T,
    pub max_normal_derivative: T,
    pub max_laplacian: T,
}

impl<T: Real> BoundaryReport<T> {
    pub fn of(sigma: &ScalarField<T>, p: &CurvatureProblem<T>) -> Result<Self> {
        let lap = laplace_beltrami(sigma, p.metric())?;
        Ok(Self {
            max_sigma: sigma.max_abs_boundary(),
            max_normal_derivative: normal_derivative(sigma).max_abs(),
            max_laplacian: lap.max_abs_boundary(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult<T> {
    pub method: Method,
    pub sigma: ScalarField<T>,
    pub history: Vec<IterationRecord<T>>,
    pub converged: bool,
    pub boundary: BoundaryReport<T>,
}

impl<T: Real> SolveResult<T> {
    pub fn final_record(&self) -> &IterationRecord<T> {
        self.history.last().expect("history holds at least the initial iterate")
    }

    pub fn iterations(&self) -> usize {
        self.final_record().iter
    }
}

/// Dispatches on `cfg.method`.
pub fn solve<T: Real>(
    p: &CurvatureProblem<T>,
    sigma0: &ScalarField<T>,
    cfg: &SolverConfig<T>,
) -> Result<SolveResult<T>> {
    match cfg.method {
        Method::Newton => newton_solve(p, sigma0, cfg),
        Method::Gradient => gradient_descent_solve(p, sigma0, cfg),
    }
}

/// Starting guesses; all vanish on the boundary.
#[derive(Debug, Clone)]
pub enum Seed<T> {
    Zero,
    /// Constant on interior nodes.
    Uniform(T),
    /// Independent uniform values in `[-amplitude, amplitude]` on interior nodes.
    Random {
        amplitude: T,
        seed: u64,
    },
    Field(ScalarField<T>),
}

impl<T: Real> Seed<T> {
    pub fn field(&self, grid: &Arc<Grid<T>>) -> Result<ScalarField<T>> {
        Ok(match self {
            Seed::Zero => ScalarField::zeros(grid),
            Seed::Uniform(c) => ScalarField::constant(grid, *c).interior_only(),
            Seed::Random { amplitude, seed } => random_interior_field(grid, *amplitude, *seed),
            Seed::Field(f) => {
                let g = ScalarField::zeros(grid);
                f.ensure_same_grid(&g)?;
                f.interior_only()
            }
        })
    }
}

/// The four standard uniqueness seeds: zero, `±0.3` uniform, random `±0.5`.
pub fn standard_seeds<T: Real>() -> Vec<Seed<T>> {
    vec![
        Seed::Zero,
        Seed::Uniform(T::lit(0.3)),
        Seed::Uniform(T::lit(-0.3)),
        Seed::Random {
            amplitude: T::lit(0.5),
            seed: 7,
        },
    ]
}

pub(crate) fn check_start<T: Real>(p: &CurvatureProblem<T>, sigma0: &ScalarField<T>) -> Result<ScalarField<T>> {
    sigma0.ensure_same_grid(p.target())?;
    sigma0.check_finite()?;
    let grid = p.grid();
    if let Some(k) = (0..grid.len()).find(|&k| grid.is_boundary(k) && sigma0.get(k) != T::zero()) {
        return Err(Error::BoundaryNotZero {
            node: grid.node(k),
            value: sigma0.get(k).as_f64(),
        });
    }
    Ok(sigma0.clone())
}

pub(crate) fn make_record<T: Real>(
    iter: usize,
    sigma: &ScalarField<T>,
    res: &Residual<T>,
    p: &CurvatureProblem<T>,
    step: T,
    cg_iterations: usize,
) -> (IterationRecord<T>, ScalarField<T>) {
    let w = p.metric().area_weights();
    let grad = gradient_from_residual(sigma, &res.b, p);
    let grad_norm = inner_product(&grad, &grad, w).expect("same grid").max(T::zero()).sqrt();
    let lap = laplace_beltrami(sigma, p.metric()).expect("same grid").interior_only();
    let lap_sigma_l2 = inner_product(&lap, &lap, w).expect("same grid").max(T::zero()).sqrt();
    (
        IterationRecord {
            iter,
            s: res.s,
            b_l2: res.b_l2,
            grad_norm,
            step,
            lap_sigma_l2,
            cg_iterations,
        },
        grad,
    )
}

/// `σ - t d` on interior nodes.
pub(crate) fn step_interior<T: Real>(sigma: &ScalarField<T>, t: T, d: &ScalarField<T>) -> ScalarField<T> {
    sigma.axpy(-t, &d.interior_only())
}

/// Residual of a trial point, or `None` if it overflowed.
pub(crate) fn trial_residual<T: Real>(sigma: &ScalarField<T>, p: &CurvatureProblem<T>) -> Option<Residual<T>> {
    if sigma.values().iter().any(|v| !v.is_finite()) {
        return None;
    }
    crate::problem::residual_b(sigma, p).ok().filter(|r| r.s.is_finite())
}
