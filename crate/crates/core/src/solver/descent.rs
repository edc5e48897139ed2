use super::{
    check_start, make_record, step_interior, trial_residual, BoundaryReport, IterationRecord, Method, SolveResult,
    SolverConfig,
};
use crate::error::{Error, Result};
use crate::mesh::{inner_product, ScalarField};
use crate::problem::{residual_b, CurvatureProblem};
use crate::scalar::Real;

/// Steepest descent on `S` along `-∇S` (the `L²(dμ)` gradient).
///
/// The trial step is the Barzilai-Borwein length from the previous two
/// iterates; Armijo backtracking from there makes every accepted step
/// strictly decrease `S`.
pub fn gradient_descent_solve<T: Real>(
    p: &CurvatureProblem<T>,
    sigma0: &ScalarField<T>,
    cfg: &SolverConfig<T>,
) -> Result<SolveResult<T>> {
    gradient_descent_solve_with(p, sigma0, cfg, |_, _| {})
}

pub fn gradient_descent_solve_with<T: Real>(
    p: &CurvatureProblem<T>,
    sigma0: &ScalarField<T>,
    cfg: &SolverConfig<T>,
    mut observer: impl FnMut(&IterationRecord<T>, &ScalarField<T>),
) -> Result<SolveResult<T>> {
    cfg.validate()?;
    let w = p.metric().area_weights();
    let dot = |a: &ScalarField<T>, b: &ScalarField<T>| inner_product(a, b, w).expect("same grid");
    let mut sigma = check_start(p, sigma0)?;
    let mut res = residual_b(&sigma, p)?;
    let (rec, mut grad) = make_record(0, &sigma, &res, p, T::zero(), 0);
    observer(&rec, &sigma);
    let mut history = vec![rec];
    let ls = cfg.line_search;

    // first trial: the step that would zero S along a linear model
    let g2 = dot(&grad, &grad);
    let mut t_trial = if g2 > T::zero() { res.s / g2 } else { T::one() };
    let mut converged = res.b_l2 <= cfg.tol_b;
    let mut iter = 0;
    while !converged && iter < cfg.max_iter {
        iter += 1;
        let g2 = dot(&grad, &grad);
        let mut t = t_trial;
        let mut halvings = 0;
        let (next, next_res) = loop {
            let trial = step_interior(&sigma, t, &grad);
            if let Some(r) = trial_residual(&trial, p) {
                if r.s <= res.s - ls.c1 * t * g2 && r.s < res.s {
                    break (trial, r);
                }
            }
            if halvings == ls.max_halvings {
                return Err(Error::LineSearchFailed { iter, halvings });
            }
            halvings += 1;
            t = t * ls.backtrack;
        };
        let (rec, next_grad) = make_record(iter, &next, &next_res, p, t, 0);
        let s_vec = next.axpy(-T::one(), &sigma);
        let y_vec = next_grad.axpy(-T::one(), &grad);
        let sy = dot(&s_vec, &y_vec);
        t_trial = if sy > T::zero() {
            dot(&s_vec, &s_vec) / sy
        } else {
            t * T::lit(2.0)
        };
        sigma = next;
        res = next_res;
        grad = next_grad;
        observer(&rec, &sigma);
        history.push(rec);
        converged = res.b_l2 <= cfg.tol_b;
    }

    Ok(SolveResult {
        method: Method::Gradient,
        boundary: BoundaryReport::of(&sigma, p)?,
        sigma,
        history,
        converged,
    })
}
