//! Dirichlet eigenpairs of `-Δ_h` and the Green's operator `G = (-Δ_h)⁻¹`
//! with zero boundary values, plus a numerical check of the norm bounds
//! `‖Gτ‖ ≤ max(1, 1/λ₁) ‖τ‖` and `∫|∇Gτ|² dA = -⟨Gτ, Δ_h Gτ⟩_dμ ≤ ‖Gτ‖ ‖Δ_h Gτ‖`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::mesh::{
    dirichlet_energy, inner_product, laplacian_diagonal, random_interior_field, smooth_interior_field, ScalarField,
};
use crate::metric::ConformalMetric;
use crate::problem::laplace_beltrami;
use crate::scalar::Real;
use crate::solver::{cg_solve, CgConfig, LinearOperator};

/// `-Δ_h` on interior fields.
#[derive(Debug, Clone)]
pub struct NegativeLaplacian<'a, T> {
    metric: &'a ConformalMetric<T>,
}

impl<'a, T: Real> NegativeLaplacian<'a, T> {
    pub fn new(metric: &'a ConformalMetric<T>) -> Self {
        Self { metric }
    }
}

impl<T: Real> LinearOperator<T> for NegativeLaplacian<'_, T> {
    fn apply(&self, u: &ScalarField<T>) -> ScalarField<T> {
        laplace_beltrami(u, self.metric)
            .expect("operator and field share the metric grid")
            .map(|v| -v)
            .interior_only()
    }

    fn diagonal(&self) -> Option<ScalarField<T>> {
        Some(
            laplacian_diagonal(self.metric.grid())
                .zip_map(self.metric.factor(), |d, h| -d / h)
                .interior_only(),
        )
    }
}

#[derive(Debug, Clone)]
pub struct EigenPair<T> {
    pub lambda: T,
    /// Zero on the boundary, unit `dμ` norm.
    pub phi: ScalarField<T>,
}

#[derive(Debug, Clone)]
pub struct Spectrum<T> {
    /// Ascending in `lambda`.
    pub pairs: Vec<EigenPair<T>>,
    pub sweeps: usize,
    /// `‖Δ_hφ + λφ‖_dμ / λ` per pair.
    pub residuals: Vec<T>,
}

impl<T: Real> Spectrum<T> {
    pub fn lambdas(&self) -> Vec<T> {
        self.pairs.iter().map(|p| p.lambda).collect()
    }

    pub fn lambda1(&self) -> T {
        self.pairs[0].lambda
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenConfig<T> {
    /// Stop once every requested pair has relative residual below this.
    pub tol: T,
    pub max_sweeps: usize,
    pub seed: u64,
    pub cg: CgConfig<T>,
}

impl<T: Real> Default for EigenConfig<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-9).max(T::epsilon() * T::lit(1e4)),
            max_sweeps: 300,
            seed: 1,
            cg: CgConfig {
                check_operator: false,
                ..CgConfig::default()
            },
        }
    }
}

/// The `k` smallest Dirichlet eigenpairs of `-Δ_h` with default settings.
pub fn dirichlet_eigenpairs<T: Real>(m: &ConformalMetric<T>, k: usize) -> Result<Spectrum<T>> {
    dirichlet_eigenpairs_with(m, k, &EigenConfig::default())
}

/// Block inverse iteration with Rayleigh-Ritz in `L²(dμ)`. The block carries
/// a few guard vectors beyond `k` so clustered eigenvalues converge together;
/// each inverse application is a warm-started CG solve.
pub fn dirichlet_eigenpairs_with<T: Real>(
    m: &ConformalMetric<T>,
    k: usize,
    cfg: &EigenConfig<T>,
) -> Result<Spectrum<T>> {
    let grid = m.grid();
    let interior = grid.interior_count();
    if k == 0 || k > interior / 4 {
        return Err(Error::InvalidParameter(format!(
            "eigenpair count must lie in [1, {}], got {k}",
            interior / 4
        )));
    }
    let block = (k + 4).min(interior);
    let w = m.area_weights();
    let op = NegativeLaplacian::new(m);
    probe_once(&op, w)?;

    let mut x: Vec<ScalarField<T>> = (0..block as u64)
        .map(|s| smooth_interior_field(grid, T::one(), cfg.seed.wrapping_mul(1000) + s))
        .collect();
    let mut theta = vec![T::one(); block];
    let mut last_res = vec![f64::INFINITY; k];
    // inner solves only need to beat the current eigen-residual by a margin
    let mut inner = CgConfig {
        tol: T::lit(1e-4).max(cfg.cg.tol),
        ..cfg.cg
    };
    for sweep in 1..=cfg.max_sweeps {
        let mut y = Vec::with_capacity(block);
        for (xi, &ti) in x.iter().zip(&theta) {
            let guess = xi.scale(T::one() / ti);
            y.push(cg_solve(&op, xi, w, &inner, Some(&guess))?.x);
        }
        orthonormalize(&mut y, w)?;
        let ay: Vec<ScalarField<T>> = y.iter().map(|v| op.apply(v)).collect();
        let mut h = DMatrix::<f64>::zeros(block, block);
        for i in 0..block {
            for j in 0..=i {
                let a = inner_product(&ay[i], &y[j], w)?.as_f64();
                let b = inner_product(&y[i], &ay[j], w)?.as_f64();
                let v = 0.5 * (a + b);
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let combine = |vs: &[ScalarField<T>], col: usize| {
            let mut acc = ScalarField::zeros(grid);
            for (i, v) in vs.iter().enumerate() {
                acc = acc.axpy(T::lit(eig.eigenvectors[(i, col)]), v);
            }
            acc
        };
        x = order.iter().map(|&c| combine(&y, c)).collect();
        let ax: Vec<ScalarField<T>> = order.iter().map(|&c| combine(&ay, c)).collect();
        theta = order.iter().map(|&c| T::lit(eig.eigenvalues[c])).collect();
        let mut residuals = Vec::with_capacity(k);
        for i in 0..k {
            let r = ax[i].axpy(-theta[i], &x[i]);
            residuals.push(inner_product(&r, &r, w)?.max(T::zero()).sqrt() / theta[i]);
        }
        if residuals.iter().all(|&r| r <= cfg.tol) {
            let pairs = x
                .into_iter()
                .zip(theta)
                .take(k)
                .map(|(phi, lambda)| EigenPair {
                    lambda,
                    phi: normalize_sign(phi),
                })
                .collect();
            return Ok(Spectrum {
                pairs,
                sweeps: sweep,
                residuals,
            });
        }
        let worst = residuals.iter().fold(T::zero(), |a, &b| a.max(b));
        inner.tol = (worst * T::lit(1e-3)).min(inner.tol).max(cfg.cg.tol);
        last_res = residuals.iter().map(|r| r.as_f64()).collect();
    }
    Err(Error::EigenStagnation {
        iterations: cfg.max_sweeps,
        residuals: last_res,
    })
}

fn probe_once<T: Real>(op: &NegativeLaplacian<'_, T>, w: &ScalarField<T>) -> Result<()> {
    crate::solver::probe_operator(op, w)
}

/// Modified Gram-Schmidt in `dμ`, two passes.
fn orthonormalize<T: Real>(vs: &mut [ScalarField<T>], w: &ScalarField<T>) -> Result<()> {
    for i in 0..vs.len() {
        for _ in 0..2 {
            for j in 0..i {
                let c = inner_product(&vs[i], &vs[j], w)?;
                vs[i] = vs[i].axpy(-c, &vs[j]);
            }
        }
        let n = inner_product(&vs[i], &vs[i], w)?.sqrt();
        if !(n > T::zero()) {
            return Err(Error::EigenStagnation {
                iterations: 0,
                residuals: vec![],
            });
        }
        vs[i] = vs[i].scale(T::one() / n);
    }
    Ok(())
}

/// Fixes the sign so that the largest-magnitude entry is positive.
fn normalize_sign<T: Real>(phi: ScalarField<T>) -> ScalarField<T> {
    let (mut best, mut val) = (T::zero(), T::zero());
    for &v in phi.values() {
        if v.abs() > best {
            best = v.abs();
            val = v;
        }
    }
    if val < T::zero() {
        phi.scale(-T::one())
    } else {
        phi
    }
}

/// `Gτ`: the solution of `-Δ_h x = τ` with `x = 0` on the boundary.
pub fn green_apply<T: Real>(m: &ConformalMetric<T>, tau: &ScalarField<T>, cg: &CgConfig<T>) -> Result<ScalarField<T>> {
    tau.ensure_same_grid(m.factor())?;
    let grid = m.grid();
    if let Some(k) = (0..grid.len()).find(|&k| grid.is_boundary(k) && tau.get(k) != T::zero()) {
        return Err(Error::BoundaryNotZero {
            node: grid.node(k),
            value: tau.get(k).as_f64(),
        });
    }
    Ok(cg_solve(&NegativeLaplacian::new(m), tau, m.area_weights(), cg, None)?.x)
}

#[derive(Debug, Clone)]
pub struct GreenTrial<T> {
    /// `‖Gτ‖ / ‖τ‖`.
    pub ratio: T,
    /// `ratio ≤ 1/λ₁ + 1e-8`.
    pub spectral_ok: bool,
    /// `ratio ≤ max(1, 1/λ₁)`.
    pub bound_ok: bool,
    /// Staggered flat Dirichlet energy `∫|∇Gτ|² dA`.
    pub energy: T,
    /// `-⟨Gτ, Δ_h Gτ⟩_dμ`.
    pub energy_by_parts: T,
    pub energy_rel_residual: T,
    /// `‖Gτ‖ ‖Δ_h Gτ‖`.
    pub cauchy_schwarz: T,
    pub cauchy_schwarz_ok: bool,
}

#[derive(Debug, Clone)]
pub struct GreenBoundReport<T> {
    pub lambda1: T,
    /// `max(1, 1/λ₁)`.
    pub c2: T,
    pub trials: Vec<GreenTrial<T>>,
    /// Inputs `τ` whose trial failed a check.
    pub violations: Vec<ScalarField<T>>,
}

impl<T: Real> GreenBoundReport<T> {
    pub fn all_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn max_ratio(&self) -> T {
        self.trials.iter().fold(T::zero(), |m, t| m.max(t.ratio))
    }

    pub fn max_energy_residual(&self) -> T {
        self.trials.iter().fold(T::zero(), |m, t| m.max(t.energy_rel_residual))
    }
}

/// Evaluates one `τ` against the bounds.
pub fn green_trial<T: Real>(
    m: &ConformalMetric<T>,
    tau: &ScalarField<T>,
    lambda1: T,
    cg: &CgConfig<T>,
) -> Result<GreenTrial<T>> {
    let w = m.area_weights();
    let gt = green_apply(m, tau, cg)?;
    let tau_n = inner_product(tau, tau, w)?.sqrt();
    let gt_n = inner_product(&gt, &gt, w)?.sqrt();
    let lap = laplace_beltrami(&gt, m)?.interior_only();
    let lap_n = inner_product(&lap, &lap, w)?.sqrt();
    let ratio = gt_n / tau_n;
    let energy = dirichlet_energy(&gt);
    let energy_by_parts = -inner_product(&gt, &lap, w)?;
    let cauchy_schwarz = gt_n * lap_n;
    let slack = T::lit(1e-10) * cauchy_schwarz;
    Ok(GreenTrial {
        ratio,
        spectral_ok: ratio <= T::one() / lambda1 + T::lit(1e-8),
        bound_ok: ratio <= (T::one() / lambda1).max(T::one()),
        energy,
        energy_by_parts,
        energy_rel_residual: (energy - energy_by_parts).abs() / energy.abs().max(T::min_positive_value()),
        cauchy_schwarz,
        cauchy_schwarz_ok: energy_by_parts <= cauchy_schwarz + slack,
    })
}

/// Runs `trials` random unit-norm `τ` (seeded) against the bounds.
pub fn green_bound_check<T: Real>(
    m: &ConformalMetric<T>,
    trials: usize,
    lambda1: T,
    seed: u64,
    cg: &CgConfig<T>,
) -> Result<GreenBoundReport<T>> {
    if trials == 0 {
        return Err(Error::InvalidParameter("at least one trial is required".into()));
    }
    if !(lambda1 > T::zero()) {
        return Err(Error::InvalidParameter(format!("λ₁ must be positive, got {lambda1}")));
    }
    let w = m.area_weights();
    let mut out = Vec::with_capacity(trials);
    let mut violations = Vec::new();
    for t in 0..trials as u64 {
        let raw = if t % 2 == 0 {
            random_interior_field(m.grid(), T::one(), seed + t)
        } else {
            smooth_interior_field(m.grid(), T::one(), seed + t)
        };
        let tau = raw.scale(T::one() / inner_product(&raw, &raw, w)?.sqrt());
        let trial = green_trial(m, &tau, lambda1, cg)?;
        if !(trial.spectral_ok && trial.bound_ok && trial.cauchy_schwarz_ok) {
            violations.push(tau);
        }
        out.push(trial);
    }
    Ok(GreenBoundReport {
        lambda1,
        c2: (T::one() / lambda1).max(T::one()),
        trials: out,
        violations,
    })
}
