//! Numerical certificates for the a-priori bound on `∫ (Δ_hσ)² dμ` along a
//! minimizing sequence, and convergence diagnostics for solver histories.
//!
//! With `g = ∂_z̄K / |K|` the interior nodes split into
//! `Ω₁: |∂_zσ| > |g|`, `Ω₂: |∂_zσ| ≤ |g|, |K|e^σ > |g|²` and
//! `Ω₃: |∂_zσ| ≤ |g|, |K|e^σ ≤ |g|²`. The terms
//! `B_i = ∫_{Ω_i} (K² e^{2σ} + Δ_hσ e^σ K) dμ` satisfy `B₁, B₂ ≥ 0` and
//! `|B₃| ≤ 3D²` with `D² = max|g|⁴ μ(M)`, which bounds the Laplacian energy
//! by `4 (C² + 3D²)` where `C = √S + ‖K₀‖`.

use num_complex::Complex;
use num_traits::Float;

use crate::error::{Error, Result};
use crate::mesh::{boundary_flux, cartesian_gradient, flat_area_weights, integrate, ScalarField};
use crate::problem::{laplace_beltrami, residual_b, CurvatureProblem};
use crate::scalar::Real;
use crate::solver::IterationRecord;

/// `g = ∂_z̄K / |K|` with `∂_z̄ = ½(∂_x + i∂_y)`; zero on boundary nodes.
pub fn g_field<T: Real>(k: &ScalarField<T>) -> Result<Vec<Complex<T>>> {
    let grid = k.grid();
    if let Some(i) = (0..grid.len()).find(|&i| !(k.get(i) < T::zero())) {
        return Err(Error::NonNegativeCurvature {
            node: grid.node(i),
            value: k.get(i).as_f64(),
        });
    }
    let (kx, ky) = cartesian_gradient(k);
    let half = T::lit(0.5);
    Ok((0..grid.len())
        .map(|i| {
            if grid.is_boundary(i) {
                Complex::new(T::zero(), T::zero())
            } else {
                Complex::new(kx.get(i), ky.get(i)) * (half / k.get(i).abs())
            }
        })
        .collect())
}

/// `|∂_zσ| = ½|∇σ|` at every node.
pub fn dz_modulus<T: Real>(sigma: &ScalarField<T>) -> ScalarField<T> {
    let (sx, sy) = cartesian_gradient(sigma);
    sx.zip_map(&sy, |a, b| T::lit(0.5) * a.hypot(b))
}

/// Region label per node: 1, 2 or 3 on interior nodes, 0 on the boundary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OmegaPartition {
    pub labels: Vec<u8>,
}

impl OmegaPartition {
    /// Node counts of `Ω₁, Ω₂, Ω₃`.
    pub fn sizes(&self) -> (usize, usize, usize) {
        let count = |l| self.labels.iter().filter(|&&x| x == l).count();
        (count(1), count(2), count(3))
    }
}

pub fn omega_partition<T: Real>(sigma: &ScalarField<T>, k: &ScalarField<T>) -> Result<OmegaPartition> {
    sigma.ensure_same_grid(k)?;
    let g = g_field(k)?;
    let dz = dz_modulus(sigma);
    let grid = sigma.grid();
    let labels = (0..grid.len())
        .map(|i| {
            if grid.is_boundary(i) {
                return 0;
            }
            let gm = g[i].norm();
            if dz.get(i) > gm {
                1
            } else if k.get(i).abs() * sigma.get(i).exp() > gm * gm {
                2
            } else {
                3
            }
        })
        .collect();
    Ok(OmegaPartition { labels })
}

/// Both sides of the integration by parts behind the estimate:
/// `∫ Δσ e^σ K dA = ∫ |∇σ|² e^σ |K| dA - ∫ ∇σ·∇K e^σ dA + ∮ K e^σ ∂_νσ dl`.
/// In complex notation the two area terms are `4∫|∂_zσ|² e^σ|K|` and
/// `4 Re ∫ (∂_zσ) g |K| e^σ`. Boundary nodes enter through their one-sided
/// derivatives, so the sides agree to second order in the spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationByParts<T> {
    pub lhs: T,
    pub gradient_term: T,
    pub cross_term: T,
    pub boundary_term: T,
}

impl<T: Real> IntegrationByParts<T> {
    pub fn rhs(&self) -> T {
        self.gradient_term - self.cross_term + self.boundary_term
    }

    pub fn relative_gap(&self) -> T {
        (self.lhs - self.rhs()).abs()
            / self
                .lhs
                .abs()
                .max(self.gradient_term.abs())
                .max(T::min_positive_value())
    }
}

pub fn integration_by_parts<T: Real>(sigma: &ScalarField<T>, k: &ScalarField<T>) -> Result<IntegrationByParts<T>> {
    sigma.ensure_same_grid(k)?;
    let grid = sigma.grid();
    let w = flat_area_weights(grid);
    let ke = k.zip_map(sigma, |kv, s| kv * s.exp());
    let lap = crate::mesh::flat_laplacian(sigma);
    let lhs = integrate(&lap.zip_map(&ke, |a, b| a * b), &w)?;
    let (sx, sy) = cartesian_gradient(sigma);
    let (kx, ky) = cartesian_gradient(k);
    let grad2 = sx.zip_map(&sy, |a, b| a * a + b * b);
    let gradient_term = integrate(&grad2.zip_map(&ke, |a, b| a * b.abs()), &w)?;
    let dot = sx
        .zip_map(&kx, |a, b| a * b)
        .zip_map(&sy.zip_map(&ky, |a, b| a * b), |a, b| a + b);
    let es = sigma.map(Float::exp);
    let cross_term = integrate(&dot.zip_map(&es, |a, b| a * b), &w)?;
    let boundary_term = boundary_flux(sigma, Some(&ke))?;
    Ok(IntegrationByParts {
        lhs,
        gradient_term,
        cross_term,
        boundary_term,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport<T> {
    pub b1: T,
    pub b2: T,
    pub b3: T,
    /// `∫ (K² e^{2σ} + Δ_hσ e^σ K) dμ` over all interior nodes.
    pub b_total: T,
    /// `max|g|⁴ μ(M)`.
    pub d2: T,
    /// Quadrature slack `1e-10 μ(M)` for the sign checks.
    pub eps_q: T,
    pub b1_ok: bool,
    pub b2_ok: bool,
    /// `|B₃| ≤ 3D²`.
    pub bound_ok: bool,
    /// `|B₁ + B₂ + B₃ - b_total| / |b_total|`.
    pub partition_identity_gap: T,
    /// `∫ (Δ_hσ)² dμ` over interior nodes.
    pub laplacian_energy: T,
    /// `√S + (∫ K₀² dμ)^{1/2}`.
    pub c_proxy: T,
    /// `4 (C² + 3D²)`.
    pub energy_bound: T,
    pub energy_ok: bool,
    pub partition_sizes: (usize, usize, usize),
    /// `∮ ∂_νσ K e^σ dl`, the term dropped when `∂_νσ = 0` on the boundary.
    pub boundary_term: T,
}

impl<T: Real> EstimateReport<T> {
    pub fn all_ok(&self) -> bool {
        self.b1_ok && self.b2_ok && self.bound_ok && self.energy_ok && self.partition_identity_gap <= T::lit(1e-10)
    }
}

pub fn b_terms_report<T: Real>(sigma: &ScalarField<T>, p: &CurvatureProblem<T>) -> Result<EstimateReport<T>> {
    let res = residual_b(sigma, p)?;
    let k = p.target();
    let partition = omega_partition(sigma, k)?;
    let g = g_field(k)?;
    let grid = p.grid();
    let dmu = p.metric().area_weights();
    let lap = laplace_beltrami(sigma, p.metric())?;
    let mut b = [T::zero(); 3];
    let mut total = T::zero();
    let mut lap_energy = T::zero();
    for i in 0..grid.len() {
        if grid.is_boundary(i) {
            continue;
        }
        let ke = k.get(i) * sigma.get(i).exp();
        let term = dmu.get(i) * (ke * ke + lap.get(i) * ke);
        b[usize::from(partition.labels[i]) - 1] = b[usize::from(partition.labels[i]) - 1] + term;
        total = total + term;
        lap_energy = lap_energy + dmu.get(i) * lap.get(i) * lap.get(i);
    }
    let area = p.metric().area();
    let gmax = g.iter().fold(T::zero(), |m, z| m.max(z.norm()));
    let d2 = gmax.powi(4) * area;
    let eps_q = T::lit(1e-10) * area;
    let k0_norm = p.integrate(&p.metric().curvature().map(|v| v * v)).sqrt();
    let c_proxy = res.s.max(T::zero()).sqrt() + k0_norm;
    let three = T::lit(3.0);
    let energy_bound = T::lit(4.0) * (c_proxy * c_proxy + three * d2);
    let sum = b[0] + b[1] + b[2];
    let ke = k.zip_map(sigma, |kv, s| kv * s.exp());
    Ok(EstimateReport {
        b1: b[0],
        b2: b[1],
        b3: b[2],
        b_total: total,
        d2,
        eps_q,
        b1_ok: b[0] >= -eps_q,
        b2_ok: b[1] >= -eps_q,
        bound_ok: b[2].abs() <= three * d2,
        partition_identity_gap: (sum - total).abs() / total.abs().max(T::min_positive_value()),
        laplacian_energy: lap_energy,
        c_proxy,
        energy_bound,
        energy_ok: lap_energy <= energy_bound,
        partition_sizes: partition.sizes(),
        boundary_term: boundary_flux(sigma, Some(&ke))?,
    })
}

/// Checks on a solver history: monotone `S`, a settled tail of
/// `‖Δ_hσ_n‖`, and the final residual against the tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport<T> {
    pub records: usize,
    /// Fewer than two records; every check passes vacuously.
    pub degenerate: bool,
    pub s_non_increasing: bool,
    /// First index whose `S` exceeds its predecessor.
    pub first_increase: Option<usize>,
    /// `(max - min) / mean` of `lap_sigma_l2` over the last quarter.
    pub tail_oscillation: T,
    pub tail_settled: bool,
    pub final_s: T,
    pub final_s_ok: bool,
}

impl<T: Real> ConvergenceReport<T> {
    pub fn all_ok(&self) -> bool {
        self.s_non_increasing && self.tail_settled && self.final_s_ok
    }
}

pub fn convergence_monitor<T: Real>(history: &[IterationRecord<T>], tol_b: T) -> ConvergenceReport<T> {
    let n = history.len();
    let final_s = history.last().map_or(T::zero(), |r| r.s);
    if n < 2 {
        return ConvergenceReport {
            records: n,
            degenerate: true,
            s_non_increasing: true,
            first_increase: None,
            tail_oscillation: T::zero(),
            tail_settled: true,
            final_s,
            final_s_ok: true,
        };
    }
    let first_increase = history.windows(2).position(|w| w[1].s > w[0].s).map(|i| i + 1);
    let quarter = n.div_ceil(4).max(2).min(n);
    let tail = &history[n - quarter..];
    let (lo, hi, sum) = tail
        .iter()
        .fold((T::infinity(), T::neg_infinity(), T::zero()), |(lo, hi, s), r| {
            (lo.min(r.lap_sigma_l2), hi.max(r.lap_sigma_l2), s + r.lap_sigma_l2)
        });
    let mean = sum / T::from_usize(quarter).expect("count fits");
    let tail_oscillation = if mean > T::zero() { (hi - lo) / mean } else { T::zero() };
    ConvergenceReport {
        records: n,
        degenerate: false,
        s_non_increasing: first_increase.is_none(),
        first_increase,
        tail_oscillation,
        tail_settled: tail_oscillation <= T::lit(0.01),
        final_s,
        final_s_ok: final_s <= tol_b * tol_b,
    }
}
