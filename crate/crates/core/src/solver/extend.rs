use std::sync::Arc;

use super::SolveResult;
use crate::error::{Error, Result};
use crate::mesh::{build_annulus, Grid, GridKind, ScalarField};
use crate::metric::ConformalMetric;
use crate::problem::CurvatureProblem;
use crate::scalar::Real;

/// Mismatch across the inner circle after extending `σ` by zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeamReport<T> {
    /// `max |σ|` on the seam; zero by construction.
    pub sigma_jump: T,
    /// `max |∂_rσ|` at the seam from inside the original domain; the outside
    /// derivative is zero, so this is the jump of the normal derivative.
    pub normal_derivative_jump: T,
}

#[derive(Debug, Clone)]
pub struct ExtendedSolution<T> {
    pub grid: Arc<Grid<T>>,
    /// Background metric on the enlarged annulus.
    pub metric: ConformalMetric<T>,
    pub sigma: ScalarField<T>,
    /// Radial index of the old inner circle on the enlarged grid.
    pub seam_index: usize,
    pub seam: SeamReport<T>,
}

impl<T: Real> ExtendedSolution<T> {
    /// `e^σ h` on the enlarged annulus.
    pub fn conformal_factor(&self) -> ScalarField<T> {
        self.sigma.zip_map(self.metric.factor(), |s, h| s.exp() * h)
    }
}

/// Extends `σ` by zero from `r_in` down to about `r_extension`, snapping to
/// whole radial cells. `factor` evaluates the background `h(r, θ)`, which
/// must reproduce the problem's factor on the original nodes.
pub fn extend_by_zero<T: Real>(
    res: &SolveResult<T>,
    p: &CurvatureProblem<T>,
    r_extension: T,
    factor: impl Fn(T, T) -> T,
) -> Result<ExtendedSolution<T>> {
    let grid = p.grid();
    let (r_in, r_out, n_r, n_theta) = match *grid.kind() {
        GridKind::Annulus {
            r_in,
            r_out,
            n_r,
            n_theta,
        } => (r_in, r_out, n_r, n_theta),
        GridKind::Rectangle { .. } => return Err(Error::RequiresAnnulus),
    };
    res.sigma.ensure_same_grid(p.target())?;
    if !(r_extension > T::zero() && r_extension < r_in) {
        return Err(Error::InvalidParameter(format!(
            "extension radius must lie in (0, {r_in}), got {r_extension}"
        )));
    }
    let dr = grid.d1();
    let n_extra = ((r_in - r_extension) / dr).round().to_usize().unwrap_or(0).max(1);
    let r_new = r_in - T::from_usize(n_extra).expect("count fits") * dr;
    if !(r_new > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "extension to {r_extension} reaches the origin on this grid"
        )));
    }
    let ext = build_annulus(r_new, r_out, n_r + n_extra, n_theta)?;
    let h = ScalarField::from_fn(&ext, &factor);
    let tol = T::lit(1e-10).max(T::epsilon() * T::lit(1e4));
    for i in 0..n_r {
        for j in 0..n_theta {
            let a = h.at(i + n_extra, j);
            let b = p.metric().factor().at(i, j);
            if (a - b).abs() > tol * b.abs() {
                return Err(Error::InvalidParameter(format!(
                    "factor function disagrees with the problem metric at node ({i}, {j}): {a} vs {b}"
                )));
            }
        }
    }
    let metric = ConformalMetric::from_factor(h)?;
    let mut values = vec![T::zero(); ext.len()];
    for i in 0..n_r {
        for j in 0..n_theta {
            values[ext.idx(i + n_extra, j)] = res.sigma.at(i, j);
        }
    }
    let sigma = ScalarField::new(ext.clone(), values)?;

    let (three, four, two) = (T::lit(3.0), T::lit(4.0), T::lit(2.0));
    let mut sigma_jump = T::zero();
    let mut dn = T::zero();
    for j in 0..n_theta {
        let s = &res.sigma;
        sigma_jump = sigma_jump.max(s.at(0, j).abs());
        let d = (-three * s.at(0, j) + four * s.at(1, j) - s.at(2, j)) / (two * dr);
        dn = dn.max(d.abs());
    }
    Ok(ExtendedSolution {
        grid: ext,
        metric,
        sigma,
        seam_index: n_extra,
        seam: SeamReport {
            sigma_jump,
            normal_derivative_jump: dn,
        },
    })
}
