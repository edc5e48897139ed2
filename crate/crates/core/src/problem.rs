//! The variational core: the conformal change of curvature, the residual
//! `b = K0 - ½Δ_hσ - K e^σ`, the functional `S[σ] = ∫ (K(σ) - K)² e^{2σ} dμ`
//! and its first variation, and admissible targets `K` that agree with the
//! background curvature on a collar of the boundary.
//!
//! Boundary convention: `σ` vanishes on `∂M` and its Laplacian is taken to be
//! zero there, so `b|∂M = K0 - K`, which is zero under the collar invariant.
//! No boundary stencil value ever enters `S`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{flat_laplacian, integrate, laplacian_diagonal, Grid, ScalarField};
use crate::metric::{smoothstep, ConformalMetric};
use crate::scalar::Real;

/// Absolute tolerance for `K = K0` inside the collar.
const COLLAR_TOL: f64 = 1e-14;
/// Largest boundary value of `σ` accepted as zero.
const BOUNDARY_SIGMA_TOL: f64 = 1e-12;

/// Background metric plus a prescribed negative curvature that equals the
/// background curvature within `collar_width` of the boundary.
#[derive(Debug, Clone)]
pub struct CurvatureProblem<T> {
    metric: ConformalMetric<T>,
    target: ScalarField<T>,
    collar_width: T,
}

impl<T: Real> CurvatureProblem<T> {
    pub fn new(metric: ConformalMetric<T>, target: ScalarField<T>, collar_width: T) -> Result<Self> {
        target.ensure_same_grid(metric.factor())?;
        target.check_finite()?;
        let grid = metric.grid().clone();
        if !(collar_width >= T::zero()) || collar_width > grid.max_boundary_distance() {
            return Err(Error::InvalidParameter(format!(
                "collar width {collar_width} outside [0, {}]",
                grid.max_boundary_distance()
            )));
        }
        let k0 = metric.curvature();
        for k in 0..grid.len() {
            let kv = target.get(k);
            if !(kv < T::zero()) {
                return Err(Error::NonNegativeCurvature {
                    node: grid.node(k),
                    value: kv.as_f64(),
                });
            }
            if grid.is_boundary(k) && !(k0.get(k) < T::zero()) {
                return Err(Error::BoundaryCurvatureNotNegative {
                    node: grid.node(k),
                    value: k0.get(k).as_f64(),
                });
            }
            if grid.boundary_distance(k) <= collar_width {
                let diff = (kv - k0.get(k)).abs();
                if diff > T::lit(COLLAR_TOL) {
                    return Err(Error::CollarViolation {
                        node: grid.node(k),
                        diff: diff.as_f64(),
                    });
                }
            }
        }
        Ok(Self {
            metric,
            target,
            collar_width,
        })
    }

    pub fn metric(&self) -> &ConformalMetric<T> {
        &self.metric
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        self.metric.grid()
    }

    /// Prescribed curvature `K`.
    pub fn target(&self) -> &ScalarField<T> {
        &self.target
    }

    pub fn collar_width(&self) -> T {
        self.collar_width
    }

    /// `min |K|`, the margin by which the target is negative.
    pub fn negativity_margin(&self) -> T {
        self.target.values().iter().fold(T::infinity(), |m, v| m.min(v.abs()))
    }

    /// `∫ f dμ` against the background metric.
    pub fn integrate(&self, f: &ScalarField<T>) -> T {
        integrate(f, self.metric.area_weights()).expect("problem fields share the metric grid")
    }
}

/// `Δ_h f = Δ_flat f / h`.
pub fn laplace_beltrami<T: Real>(f: &ScalarField<T>, m: &ConformalMetric<T>) -> Result<ScalarField<T>> {
    f.ensure_same_grid(m.factor())?;
    Ok(flat_laplacian(f).zip_map(m.factor(), |l, h| l / h))
}

/// Curvature of `e^σ h |dz|²`: `K(σ) = e^{-σ} (K0 - ½ Δ_h σ)` at every node
/// (boundary nodes use the one-sided Laplacian).
pub fn curvature_of<T: Real>(sigma: &ScalarField<T>, m: &ConformalMetric<T>) -> Result<ScalarField<T>> {
    let lap = laplace_beltrami(sigma, m)?;
    let half = T::lit(0.5);
    let values = (0..sigma.len())
        .map(|k| (-sigma.get(k)).exp() * (m.curvature().get(k) - half * lap.get(k)))
        .collect();
    ScalarField::new(sigma.grid().clone(), values)
}

/// Residual field with its `dμ` energy.
#[derive(Debug, Clone)]
pub struct Residual<T> {
    pub b: ScalarField<T>,
    /// `S = ∫ b² dμ`.
    pub s: T,
    /// `sqrt(S)`.
    pub b_l2: T,
}

fn check_boundary_zero<T: Real>(sigma: &ScalarField<T>) -> Result<()> {
    let grid = sigma.grid();
    for k in 0..grid.len() {
        if grid.is_boundary(k) && sigma.get(k).abs() > T::lit(BOUNDARY_SIGMA_TOL) {
            return Err(Error::BoundaryNotZero {
                node: grid.node(k),
                value: sigma.get(k).as_f64(),
            });
        }
    }
    Ok(())
}

/// `b = K0 - ½Δ_hσ - K e^σ` on interior nodes, `K0 - K` on the boundary.
pub fn residual_b<T: Real>(sigma: &ScalarField<T>, p: &CurvatureProblem<T>) -> Result<Residual<T>> {
    sigma.ensure_same_grid(p.target())?;
    check_boundary_zero(sigma)?;
    let grid = p.grid();
    let lap = laplace_beltrami(sigma, p.metric())?;
    let k0 = p.metric().curvature();
    let half = T::lit(0.5);
    let values: Vec<T> = (0..grid.len())
        .map(|k| {
            if grid.is_boundary(k) {
                k0.get(k) - p.target().get(k)
            } else {
                k0.get(k) - half * lap.get(k) - p.target().get(k) * sigma.get(k).exp()
            }
        })
        .collect();
    let b = ScalarField::new(grid.clone(), values)?;
    let s = p.integrate(&b.map(|v| v * v));
    Ok(Residual {
        b_l2: s.max(T::zero()).sqrt(),
        b,
        s,
    })
}

/// Rounding-error scale of `b_l2` at `σ`: `ε · ‖|K0| + |σ| |D| / h + |K| e^σ‖_dμ`
/// where `|D|` is the absolute row sum of the flat stencil. Residuals below
/// a small multiple of this are indistinguishable from zero.
pub fn residual_noise_floor<T: Real>(sigma: &ScalarField<T>, p: &CurvatureProblem<T>) -> Result<T> {
    sigma.ensure_same_grid(p.target())?;
    let grid = p.grid();
    let diag = laplacian_diagonal(grid);
    let h = p.metric().factor();
    let k0 = p.metric().curvature();
    let two = T::lit(2.0);
    let scale: Vec<T> = (0..grid.len())
        .map(|k| {
            if grid.is_boundary(k) {
                T::zero()
            } else {
                k0.get(k).abs()
                    + sigma.get(k).abs() * two * diag.get(k).abs() / h.get(k)
                    + p.target().get(k).abs() * sigma.get(k).exp()
            }
        })
        .collect();
    let scale = ScalarField::new(grid.clone(), scale)?;
    Ok(T::epsilon() * p.integrate(&scale.map(|v| v * v)).sqrt())
}

/// `S[σ] = ∫ (K(σ) - K)² e^{2σ} dμ`, evaluated in that form.
pub fn functional_s<T: Real>(sigma: &ScalarField<T>, p: &CurvatureProblem<T>) -> Result<T> {
    sigma.ensure_same_grid(p.target())?;
    check_boundary_zero(sigma)?;
    let grid = p.grid();
    let k_sigma = curvature_of(sigma, p.metric())?;
    let k0 = p.metric().curvature();
    let two = T::lit(2.0);
    let integrand: Vec<T> = (0..grid.len())
        .map(|k| {
            let kt = p.target().get(k);
            if grid.is_boundary(k) {
                let d = k0.get(k) - kt;
                d * d
            } else {
                let d = k_sigma.get(k) - kt;
                d * d * (two * sigma.get(k)).exp()
            }
        })
        .collect();
    Ok(p.integrate(&ScalarField::new(grid.clone(), integrand)?))
}

/// `L²(dμ)` gradient of `S`: `-Δ_h b - 2K e^σ b` on interior nodes, zero on
/// the boundary (admissible variations vanish there).
pub fn gradient_s<T: Real>(sigma: &ScalarField<T>, p: &CurvatureProblem<T>) -> Result<ScalarField<T>> {
    let res = residual_b(sigma, p)?;
    Ok(gradient_from_residual(sigma, &res.b, p))
}

pub(crate) fn gradient_from_residual<T: Real>(
    sigma: &ScalarField<T>,
    b: &ScalarField<T>,
    p: &CurvatureProblem<T>,
) -> ScalarField<T> {
    let lap_b = flat_laplacian(b);
    let grid = p.grid();
    let h = p.metric().factor();
    let two = T::lit(2.0);
    let values = (0..grid.len())
        .map(|k| {
            if grid.is_boundary(k) {
                T::zero()
            } else {
                -lap_b.get(k) / h.get(k) - two * p.target().get(k) * sigma.get(k).exp() * b.get(k)
            }
        })
        .collect();
    ScalarField::from_vec_unchecked(grid.clone(), values)
}

/// Linearization of the residual map at `σ`: `u ↦ -½Δ_h u - K e^σ u`,
/// acting on fields that vanish on the boundary. Self-adjoint in `L²(dμ)`
/// and positive definite whenever `K < 0`.
#[derive(Debug, Clone)]
pub struct LinearizedOperator<T> {
    metric: ConformalMetric<T>,
    /// `-K e^σ`, nonnegative.
    reaction: ScalarField<T>,
}

impl<T: Real> LinearizedOperator<T> {
    pub fn at(sigma: &ScalarField<T>, p: &CurvatureProblem<T>) -> Result<Self> {
        sigma.ensure_same_grid(p.target())?;
        let reaction = p.target().zip_map(sigma, |kt, s| -kt * s.exp());
        Ok(Self {
            metric: p.metric().clone(),
            reaction,
        })
    }

    /// Applies the operator; the result is zero on boundary nodes.
    pub fn apply(&self, u: &ScalarField<T>) -> ScalarField<T> {
        let lap = flat_laplacian(u);
        let grid = self.metric.grid();
        let h = self.metric.factor();
        let half = T::lit(0.5);
        let values = (0..grid.len())
            .map(|k| {
                if grid.is_boundary(k) {
                    T::zero()
                } else {
                    -half * lap.get(k) / h.get(k) + self.reaction.get(k) * u.get(k)
                }
            })
            .collect();
        ScalarField::from_vec_unchecked(grid.clone(), values)
    }

    /// Diagonal of the interior stencil (Jacobi preconditioner).
    pub fn diagonal(&self) -> ScalarField<T> {
        let half = T::lit(0.5);
        let diag = laplacian_diagonal(self.metric.grid());
        let scaled = diag.zip_map(self.metric.factor(), |d, h| -half * d / h);
        scaled.zip_map(&self.reaction, |a, b| a + b)
    }

    pub fn metric(&self) -> &ConformalMetric<T> {
        &self.metric
    }
}

/// Interior curvature prescription for [`blend_target`].
#[derive(Debug, Clone)]
pub enum InnerTarget<T> {
    /// `c · K0` with `c > 0`.
    Scale(T),
    /// `K0 + d`.
    Offset(T),
    /// An explicit field.
    Field(ScalarField<T>),
}

/// C² collar profile: 0 within `width` of the boundary, 1 beyond `2·width`,
/// quintic smoothstep in between. With `width = 0` it is 0 exactly on the
/// boundary nodes and 1 elsewhere.
pub fn collar_profile<T: Real>(grid: &Arc<Grid<T>>, width: T) -> ScalarField<T> {
    let values = (0..grid.len())
        .map(|k| {
            let d = grid.boundary_distance(k);
            if width == T::zero() {
                if grid.is_boundary(k) {
                    T::zero()
                } else {
                    T::one()
                }
            } else if d <= width {
                T::zero()
            } else {
                smoothstep((d - width) / width)
            }
        })
        .collect();
    ScalarField::from_vec_unchecked(grid.clone(), values)
}

/// `K = K0 + χ (K_inner - K0)` with `χ` from [`collar_profile`]. Fails if the
/// result is not strictly negative everywhere.
pub fn blend_target<T: Real>(
    base: &ConformalMetric<T>,
    inner: &InnerTarget<T>,
    collar_width: T,
) -> Result<ScalarField<T>> {
    let grid = base.grid();
    if !(collar_width >= T::zero()) || !(collar_width < grid.max_boundary_distance()) {
        return Err(Error::InvalidParameter(format!(
            "collar width {collar_width} must lie in [0, {})",
            grid.max_boundary_distance()
        )));
    }
    let k0 = base.curvature();
    let k_inner = match inner {
        InnerTarget::Scale(c) => {
            if !(*c > T::zero()) {
                return Err(Error::InvalidParameter(format!("scale must be positive, got {c}")));
            }
            k0.scale(*c)
        }
        InnerTarget::Offset(d) => k0.map(|v| v + *d),
        InnerTarget::Field(f) => {
            f.ensure_same_grid(k0)?;
            f.check_finite()?;
            f.clone()
        }
    };
    let chi = collar_profile(grid, collar_width);
    let values: Vec<T> = (0..grid.len())
        .map(|k| k0.get(k) + chi.get(k) * (k_inner.get(k) - k0.get(k)))
        .collect();
    if let Some(k) = values.iter().position(|v| !(*v < T::zero())) {
        return Err(Error::NonNegativeCurvature {
            node: grid.node(k),
            value: values[k].as_f64(),
        });
    }
    ScalarField::new(grid.clone(), values)
}

/// Target for which `sigma_star` is the exact discrete solution:
/// `K = e^{-σ*} (K0 - ½Δ_hσ*)` on interior nodes and `K0` on the boundary.
/// `sigma_star` must vanish on the boundary.
pub fn manufactured_target<T: Real>(m: &ConformalMetric<T>, sigma_star: &ScalarField<T>) -> Result<ScalarField<T>> {
    check_boundary_zero(sigma_star)?;
    let k = curvature_of(sigma_star, m)?;
    let grid = m.grid();
    let values = (0..grid.len())
        .map(|i| {
            if grid.is_boundary(i) {
                m.curvature().get(i)
            } else {
                k.get(i)
            }
        })
        .collect();
    ScalarField::new(grid.clone(), values)
}
