//! Jacobi-preconditioned conjugate gradients in the `L²(dμ)` inner product.
//!
//! Operators act on interior fields: inputs and outputs vanish on boundary
//! nodes. Right-hand sides are masked to the interior before solving.

use crate::error::{Error, Result};
use crate::mesh::{random_interior_field, ScalarField};
use crate::problem::LinearizedOperator;
use crate::scalar::Real;

/// Seed for the random probe fields of the self-adjointness check.
const PROBE_SEED: u64 = 0x5eed_c0de;
const PROBE_PAIRS: u64 = 3;

/// A linear map on interior fields, self-adjoint and positive definite in
/// the weighted inner product it is solved against.
pub trait LinearOperator<T: Real> {
    fn apply(&self, u: &ScalarField<T>) -> ScalarField<T>;

    /// Diagonal used for Jacobi preconditioning; `None` means no preconditioner.
    fn diagonal(&self) -> Option<ScalarField<T>> {
        None
    }
}

impl<T: Real> LinearOperator<T> for LinearizedOperator<T> {
    fn apply(&self, u: &ScalarField<T>) -> ScalarField<T> {
        LinearizedOperator::apply(self, u)
    }

    fn diagonal(&self) -> Option<ScalarField<T>> {
        Some(LinearizedOperator::diagonal(self))
    }
}

/// Wraps a closure as an unpreconditioned operator.
pub struct FnOperator<F>(pub F);

impl<T: Real, F: Fn(&ScalarField<T>) -> ScalarField<T>> LinearOperator<T> for FnOperator<F> {
    fn apply(&self, u: &ScalarField<T>) -> ScalarField<T> {
        (self.0)(u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgConfig<T> {
    /// Stop when `‖A x - b‖ ≤ tol · ‖b‖`.
    pub tol: T,
    pub max_iter: usize,
    /// Probe self-adjointness and positivity on random pairs before solving.
    pub check_operator: bool,
}

impl<T: Real> Default for CgConfig<T> {
    fn default() -> Self {
        Self {
            tol: default_cg_tol(),
            max_iter: 5000,
            check_operator: true,
        }
    }
}

/// `1e-12`, or a few hundred ulps for single precision.
pub(crate) fn default_cg_tol<T: Real>() -> T {
    T::lit(1e-12).max(T::epsilon() * T::lit(200.0))
}

#[derive(Debug, Clone)]
pub struct CgOutcome<T> {
    pub x: ScalarField<T>,
    pub iterations: usize,
    /// True relative residual `‖A x - b‖ / ‖b‖` of the returned `x`.
    pub relative_residual: T,
}

fn dot<T: Real>(w: &[T], a: &[T], b: &[T]) -> T {
    w.iter()
        .zip(a)
        .zip(b)
        .fold(T::zero(), |acc, ((&wk, &ak), &bk)| acc + wk * ak * bk)
}

/// Checks `⟨Au, v⟩ = ⟨u, Av⟩` and `⟨Au, u⟩ > 0` on a few random interior pairs.
pub fn probe_operator<T: Real, A: LinearOperator<T> + ?Sized>(a: &A, weights: &ScalarField<T>) -> Result<()> {
    let grid = weights.grid();
    let w = weights.values();
    let tol = T::epsilon() * T::lit(1e3);
    for pair in 0..PROBE_PAIRS {
        let u = random_interior_field(grid, T::one(), PROBE_SEED + 2 * pair);
        let v = random_interior_field(grid, T::one(), PROBE_SEED + 2 * pair + 1);
        let au = a.apply(&u);
        let av = a.apply(&v);
        let lhs = dot(w, au.values(), v.values());
        let rhs = dot(w, u.values(), av.values());
        let scale = dot(w, au.values(), au.values()).sqrt() * dot(w, v.values(), v.values()).sqrt()
            + dot(w, av.values(), av.values()).sqrt() * dot(w, u.values(), u.values()).sqrt();
        let asym = (lhs - rhs).abs() / scale.max(T::min_positive_value());
        if !(asym <= tol) {
            return Err(Error::NotSelfAdjoint {
                asymmetry: asym.as_f64(),
            });
        }
        let q = dot(w, au.values(), u.values());
        if !(q > T::zero()) {
            return Err(Error::NotPositiveDefinite { value: q.as_f64() });
        }
    }
    Ok(())
}

/// Solves `A x = rhs` on interior nodes.
pub fn cg_solve<T: Real, A: LinearOperator<T> + ?Sized>(
    a: &A,
    rhs: &ScalarField<T>,
    weights: &ScalarField<T>,
    cfg: &CgConfig<T>,
    x0: Option<&ScalarField<T>>,
) -> Result<CgOutcome<T>> {
    rhs.ensure_same_grid(weights)?;
    rhs.check_finite()?;
    if !(cfg.tol > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "cg tolerance must be positive, got {}",
            cfg.tol
        )));
    }
    let grid = rhs.grid().clone();
    let mask = grid.boundary_mask();
    let w = weights.values();
    let b = rhs.interior_only();
    let b_norm = dot(w, b.values(), b.values()).sqrt();
    if b_norm == T::zero() {
        return Ok(CgOutcome {
            x: ScalarField::zeros(&grid),
            iterations: 0,
            relative_residual: T::zero(),
        });
    }
    if cfg.check_operator {
        probe_operator(a, weights)?;
    }

    let inv_diag: Vec<T> = match a.diagonal() {
        Some(d) => d
            .values()
            .iter()
            .zip(mask)
            .map(|(&dk, &bd)| {
                if bd || dk == T::zero() {
                    T::zero()
                } else {
                    T::one() / dk
                }
            })
            .collect(),
        None => mask.iter().map(|&bd| if bd { T::zero() } else { T::one() }).collect(),
    };
    let precondition = |r: &[T]| -> Vec<T> { r.iter().zip(&inv_diag).map(|(&rk, &dk)| rk * dk).collect() };

    let mut x = match x0 {
        Some(x0) => {
            x0.ensure_same_grid(rhs)?;
            x0.interior_only().into_values()
        }
        None => vec![T::zero(); grid.len()],
    };
    let true_residual = |x: &[T]| -> Vec<T> {
        let ax = a.apply(&ScalarField::from_vec_unchecked(grid.clone(), x.to_vec()));
        b.values().iter().zip(ax.values()).map(|(&bk, &ak)| bk - ak).collect()
    };

    let mut r = true_residual(&x);
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(w, &r, &z);
    let target = cfg.tol * b_norm;
    let mut rel = dot(w, &r, &r).sqrt() / b_norm;
    if rel <= cfg.tol {
        return Ok(CgOutcome {
            x: ScalarField::from_vec_unchecked(grid, x),
            iterations: 0,
            relative_residual: rel,
        });
    }

    for it in 1..=cfg.max_iter {
        let ap = a
            .apply(&ScalarField::from_vec_unchecked(grid.clone(), p.clone()))
            .into_values();
        let pap = dot(w, &p, &ap);
        if !(pap > T::zero()) {
            return Err(Error::NotPositiveDefinite { value: pap.as_f64() });
        }
        let alpha = rz / pap;
        for k in 0..x.len() {
            x[k] = x[k] + alpha * p[k];
            r[k] = r[k] - alpha * ap[k];
        }
        let r_norm = dot(w, &r, &r).sqrt();
        if !r_norm.is_finite() {
            return Err(Error::CgNotConverged {
                iterations: it,
                residual: f64::NAN,
            });
        }
        if r_norm <= target {
            // the recursive residual drifts; confirm against the true one
            r = true_residual(&x);
            let true_norm = dot(w, &r, &r).sqrt();
            rel = true_norm / b_norm;
            if true_norm <= target {
                return Ok(CgOutcome {
                    x: ScalarField::from_vec_unchecked(grid, x),
                    iterations: it,
                    relative_residual: rel,
                });
            }
            z = precondition(&r);
            p = z.clone();
            rz = dot(w, &r, &z);
            continue;
        }
        rel = r_norm / b_norm;
        z = precondition(&r);
        let rz_new = dot(w, &r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..p.len() {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::CgNotConverged {
        iterations: cfg.max_iter,
        residual: rel.as_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_rectangle, flat_area_weights, flat_laplacian, norm};

    #[test]
    fn zero_rhs_takes_no_iterations() {
        let g = build_rectangle::<f64>(1.0, 1.0, 17, 17).unwrap();
        let w = flat_area_weights(&g);
        let op = FnOperator(|u: &ScalarField<f64>| u.clone());
        let out = cg_solve(&op, &ScalarField::zeros(&g), &w, &CgConfig::default(), None).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.x.max_abs(), 0.0);
    }

    #[test]
    fn identity_converges_in_one_step() {
        let g = build_rectangle::<f64>(1.0, 1.0, 17, 17).unwrap();
        let w = flat_area_weights(&g);
        let rhs = random_interior_field(&g, 1.0, 5);
        let op = FnOperator(|u: &ScalarField<f64>| u.clone());
        let out = cg_solve(&op, &rhs, &w, &CgConfig::default(), None).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(out.x.max_abs_diff(&rhs) < 1e-15);
    }

    #[test]
    fn negative_laplacian_on_sine_mode() {
        let n = 129;
        let g = build_rectangle::<f64>(1.0, 1.0, n, n).unwrap();
        let w = flat_area_weights(&g);
        let pi = std::f64::consts::PI;
        let rhs = ScalarField::from_cartesian_fn(&g, |x, y| (pi * x).sin() * (pi * y).sin()).interior_only();
        let op = FnOperator(|u: &ScalarField<f64>| flat_laplacian(u).map(|v| -v).interior_only());
        let out = cg_solve(&op, &rhs, &w, &CgConfig::default(), None).unwrap();
        let dx = 1.0 / (n - 1) as f64;
        let lambda_d = 2.0 * 4.0 / (dx * dx) * (pi * dx / 2.0).sin().powi(2);
        let expected = rhs.scale(1.0 / lambda_d);
        let err = norm(&out.x.axpy(-1.0, &expected), &w).unwrap() / norm(&expected, &w).unwrap();
        assert!(err <= 1e-6, "{err}");
        let continuum = rhs.scale(1.0 / (2.0 * pi * pi));
        let err_c = norm(&out.x.axpy(-1.0, &continuum), &w).unwrap() / norm(&continuum, &w).unwrap();
        assert!(err_c <= 1e-4, "{err_c}");
    }

    #[test]
    fn indefinite_operator_is_rejected() {
        let g = build_rectangle::<f64>(1.0, 1.0, 17, 17).unwrap();
        let w = flat_area_weights(&g);
        let op = FnOperator(|u: &ScalarField<f64>| flat_laplacian(u).interior_only());
        let rhs = random_interior_field(&g, 1.0, 1);
        assert!(matches!(
            cg_solve(&op, &rhs, &w, &CgConfig::default(), None),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn nonsymmetric_operator_is_rejected() {
        let g = build_rectangle::<f64>(1.0, 1.0, 17, 17).unwrap();
        let w = flat_area_weights(&g);
        // shift along y: not self-adjoint
        let op = FnOperator(|u: &ScalarField<f64>| {
            let n2 = u.grid().n2();
            let v: Vec<f64> = (0..u.len())
                .map(|k| u.get(k) + 0.5 * u.get((k + 1) % (n2 * n2)))
                .collect();
            ScalarField::new(u.grid().clone(), v).unwrap().interior_only()
        });
        let rhs = random_interior_field(&g, 1.0, 1);
        assert!(matches!(
            cg_solve(&op, &rhs, &w, &CgConfig::default(), None),
            Err(Error::NotSelfAdjoint { .. })
        ));
    }

    #[test]
    fn iteration_cap_is_reported() {
        let g = build_rectangle::<f64>(1.0, 1.0, 33, 33).unwrap();
        let w = flat_area_weights(&g);
        let op = FnOperator(|u: &ScalarField<f64>| flat_laplacian(u).map(|v| -v).interior_only());
        let rhs = random_interior_field(&g, 1.0, 1);
        let cfg = CgConfig {
            max_iter: 3,
            ..CgConfig::default()
        };
        assert!(matches!(
            cg_solve(&op, &rhs, &w, &cfg, None),
            Err(Error::CgNotConverged { iterations: 3, .. })
        ));
    }
}
