use super::cg::cg_solve;
use super::{
    check_start, make_record, step_interior, trial_residual, BoundaryReport, IterationRecord, Method, SolveResult,
    SolverConfig,
};
use crate::error::{Error, Result};
use crate::mesh::ScalarField;
use crate::problem::{residual_b, CurvatureProblem, LinearizedOperator};
use crate::scalar::Real;

/// Damped Newton iteration on the residual. Each step solves
/// `(-½Δ_h - K e^σ) δ = b` by CG and moves to `σ - tδ`, where `t` is the
/// first of `1, ½, ¼, ...` satisfying `S(σ - tδ) ≤ (1 - 2 c1 t) S(σ)`
/// (the Newton direction has `⟨∇S, -δ⟩ = -2S`).
pub fn newton_solve<T: Real>(
    p: &CurvatureProblem<T>,
    sigma0: &ScalarField<T>,
    cfg: &SolverConfig<T>,
) -> Result<SolveResult<T>> {
    newton_solve_with(p, sigma0, cfg, |_, _| {})
}

/// As [`newton_solve`], calling `observer` on every accepted iterate.
pub fn newton_solve_with<T: Real>(
    p: &CurvatureProblem<T>,
    sigma0: &ScalarField<T>,
    cfg: &SolverConfig<T>,
    mut observer: impl FnMut(&IterationRecord<T>, &ScalarField<T>),
) -> Result<SolveResult<T>> {
    cfg.validate()?;
    let mut sigma = check_start(p, sigma0)?;
    let mut res = residual_b(&sigma, p)?;
    let mut history = Vec::new();
    let (rec, _) = make_record(0, &sigma, &res, p, T::zero(), 0);
    observer(&rec, &sigma);
    history.push(rec);
    let ls = cfg.line_search;
    let cg_cfg = cfg.cg();
    let w = p.metric().area_weights();

    let mut converged = res.b_l2 <= cfg.tol_b;
    let mut iter = 0;
    while !converged && iter < cfg.max_iter {
        iter += 1;
        let op = LinearizedOperator::at(&sigma, p)?;
        let dir = cg_solve(&op, &res.b, w, &cg_cfg, None)?;
        let mut t = T::one();
        let mut halvings = 0;
        let (next, next_res) = loop {
            let trial = step_interior(&sigma, t, &dir.x);
            if let Some(r) = trial_residual(&trial, p) {
                if r.s <= (T::one() - T::lit(2.0) * ls.c1 * t) * res.s {
                    break (trial, r);
                }
            }
            if halvings == ls.max_halvings {
                return Err(Error::LineSearchFailed { iter, halvings });
            }
            halvings += 1;
            t = t * ls.backtrack;
        };
        sigma = next;
        res = next_res;
        let (rec, _) = make_record(iter, &sigma, &res, p, t, dir.iterations);
        observer(&rec, &sigma);
        history.push(rec);
        converged = res.b_l2 <= cfg.tol_b;
    }

    Ok(SolveResult {
        method: Method::Newton,
        boundary: BoundaryReport::of(&sigma, p)?,
        sigma,
        history,
        converged,
    })
}

/// Convergence-order diagnostic on the last transitions of a residual history.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticTail<T> {
    /// `b_{k+1} / b_k²` for each examined transition, oldest first.
    pub ratios: Vec<T>,
    /// Whether each transition landed above the noise floor and was tested.
    pub tested: Vec<bool>,
    /// Largest ratio among tested transitions.
    pub fitted_c: T,
}

impl<T: Real> QuadraticTail<T> {
    /// At least one transition tested and every tested ratio at most `c`.
    pub fn bounded_by(&self, c: T) -> bool {
        self.tested.iter().any(|&t| t) && self.fitted_c <= c
    }
}

/// Examines the transitions among the last `points` residuals. A transition
/// whose result lies below `floor` is limited by rounding, not by the
/// iteration, and is reported but not tested.
pub fn quadratic_tail<T: Real>(history: &[IterationRecord<T>], points: usize, floor: T) -> QuadraticTail<T> {
    let start = history.len().saturating_sub(points);
    let tail = &history[start..];
    let mut ratios = Vec::new();
    let mut tested = Vec::new();
    let mut fitted_c = T::zero();
    for w in tail.windows(2) {
        let ratio = w[1].b_l2 / (w[0].b_l2 * w[0].b_l2);
        let above = w[1].b_l2 > floor;
        if above {
            fitted_c = fitted_c.max(ratio);
        }
        ratios.push(ratio);
        tested.push(above);
    }
    QuadraticTail {
        ratios,
        tested,
        fitted_c,
    }
}
