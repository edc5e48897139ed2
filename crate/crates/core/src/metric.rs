//! Conformal metrics `h |dz|²` on a grid, their Gaussian curvature, smooth
//! cutoff blending, and a small library of analytic reference metrics.

use std::sync::Arc;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::mesh::{flat_area_weights, flat_laplacian, Grid, GridKind, ScalarField};
use crate::scalar::Real;

/// Metric `h |dz|²` with cached curvature `K0` and area weights `h · dA_flat`.
#[derive(Debug, Clone)]
pub struct ConformalMetric<T> {
    factor: ScalarField<T>,
    curvature: ScalarField<T>,
    area_weights: ScalarField<T>,
}

impl<T: Real> ConformalMetric<T> {
    /// Builds the metric and fills its caches. Fails if `h` is not strictly
    /// positive (and finite) at every node.
    pub fn from_factor(h: ScalarField<T>) -> Result<Self> {
        let curvature = curvature_conformal(&h)?;
        let area_weights = h.zip_map(&flat_area_weights(h.grid()), |a, b| a * b);
        Ok(Self {
            factor: h,
            curvature,
            area_weights,
        })
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        self.factor.grid()
    }

    /// Conformal factor `h`.
    pub fn factor(&self) -> &ScalarField<T> {
        &self.factor
    }

    /// Gaussian curvature `K0` of the metric.
    pub fn curvature(&self) -> &ScalarField<T> {
        &self.curvature
    }

    /// Nodal `h · r` (annulus) or `h` (rectangle); pass to
    /// [`crate::mesh::integrate`] to integrate against `dμ`.
    pub fn area_weights(&self) -> &ScalarField<T> {
        &self.area_weights
    }

    /// `μ(M) = ∫ 1 dμ`.
    pub fn area(&self) -> T {
        crate::mesh::integrate(&ScalarField::constant(self.grid(), T::one()), &self.area_weights)
            .expect("metric caches share one grid")
    }

    /// `c · h` as a new metric.
    pub fn scaled(&self, c: T) -> Result<Self> {
        Self::from_factor(self.factor.scale(c))
    }
}

fn check_positive<T: Real>(h: &ScalarField<T>) -> Result<()> {
    h.check_finite()?;
    match h.values().iter().position(|v| !(*v > T::zero())) {
        Some(k) => Err(Error::NonPositiveFactor {
            node: h.grid().node(k),
            value: h.get(k).as_f64(),
        }),
        None => Ok(()),
    }
}

/// Curvature of `h |dz|²` relative to the flat background:
/// `K = -Δ_flat(log h) / (2h)`.
///
/// On the annulus the radial part of the Laplacian uses logarithmic face
/// fluxes, `r ∂_r f ≈ (f_{i+1} - f_i) / log(r_{i+1}/r_i)`, which is exact
/// for `a + b log r`. Factors that blow up like a power of `1/r` near a
/// puncture have exactly that leading behaviour in `log h`, so this keeps
/// the error small close to the inner circle without widening the stencil.
pub fn curvature_conformal<T: Real>(h: &ScalarField<T>) -> Result<ScalarField<T>> {
    check_positive(h)?;
    let log_h = h.map(Float::ln);
    let mut lap = flat_laplacian(&log_h);
    if h.grid().is_annulus() {
        lap = log_flux_laplacian(&log_h, lap);
    }
    let half = T::lit(0.5);
    Ok(lap.zip_map(h, |l, hv| -half * l / hv))
}

/// Replaces interior values of `lap` by the log-flux discretization of
/// `(1/r)(r f_r)_r + f_θθ/r²`; boundary values are kept.
fn log_flux_laplacian<T: Real>(f: &ScalarField<T>, lap: ScalarField<T>) -> ScalarField<T> {
    let grid = f.grid().clone();
    let (n1, n2) = (grid.n1(), grid.n2());
    let r = grid.axis1();
    let dr = grid.d1();
    let dt2 = grid.d2() * grid.d2();
    let two = T::lit(2.0);
    let mut out = lap.into_values();
    for i in 1..n1 - 1 {
        let lp = (r[i + 1] / r[i]).ln();
        let lm = (r[i] / r[i - 1]).ln();
        for j in 0..n2 {
            let jp = (j + 1) % n2;
            let jm = (j + n2 - 1) % n2;
            let f0 = f.at(i, j);
            let flux_p = (f.at(i + 1, j) - f0) / lp;
            let flux_m = (f0 - f.at(i - 1, j)) / lm;
            let ftt = (f.at(i, jp) - two * f0 + f.at(i, jm)) / dt2;
            out[grid.idx(i, j)] = (flux_p - flux_m) / (r[i] * dr) + ftt / (r[i] * r[i]);
        }
    }
    ScalarField::from_vec_unchecked(grid, out)
}

/// Orthogonal metric `E dr² + G dθ²` on an annulus.
#[derive(Debug, Clone)]
pub struct OrthogonalMetric<T> {
    e: ScalarField<T>,
    g: ScalarField<T>,
}

impl<T: Real> OrthogonalMetric<T> {
    pub fn new(e: ScalarField<T>, g: ScalarField<T>) -> Result<Self> {
        if !e.grid().is_annulus() {
            return Err(Error::RequiresAnnulus);
        }
        e.ensure_same_grid(&g)?;
        for (name, f) in [("E", &e), ("G", &g)] {
            f.check_finite()?;
            if let Some(k) = f.values().iter().position(|v| !(*v > T::zero())) {
                return Err(Error::NonPositiveCoefficient {
                    name,
                    node: f.grid().node(k),
                    value: f.get(k).as_f64(),
                });
            }
        }
        Ok(Self { e, g })
    }

    /// `E = h`, `G = r² h` for a conformal factor on an annulus.
    pub fn from_conformal(h: &ScalarField<T>) -> Result<Self> {
        let g = ScalarField::from_fn(h.grid(), |r, _| r * r).zip_map(h, |a, b| a * b);
        Self::new(h.clone(), g)
    }

    pub fn e(&self) -> &ScalarField<T> {
        &self.e
    }

    pub fn g(&self) -> &ScalarField<T> {
        &self.g
    }
}

/// Leading sign of the orthogonal-coordinates curvature formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignConvention {
    /// `K = -1/(2√EG) [(E_θ/√EG)_θ + (G_r/√EG)_r]`.
    Standard,
    /// The same bracket with a leading `+`; flips the sign of every value.
    WithoutMinus,
}

/// Gaussian curvature of `E dr² + G dθ²` from centered differences of the
/// bracketed fluxes, evaluated at half nodes. Each face flux is written as
/// `(log G)_r · √(G/E)` (resp. `(log E)_θ · √(E/G)`) with the coefficient
/// taken as a logarithmic mean, so `E = h, G = r²h` gives the same values as
/// [`curvature_conformal`] at interior nodes. Boundary circles use one-sided
/// node derivatives.
pub fn curvature_orthogonal<T: Real>(m: &OrthogonalMetric<T>, convention: SignConvention) -> ScalarField<T> {
    let grid = m.e.grid().clone();
    debug_assert!(grid.is_annulus());
    let (n1, n2) = (grid.n1(), grid.n2());
    let w = m.e.zip_map(&m.g, |e, g| (e * g).sqrt());
    let flux_r = d_dr(&m.g).zip_map(&w, |a, b| a / b);
    let flux_t = d_dtheta(&m.e).zip_map(&w, |a, b| a / b);
    let mut bracket = d_dr(&flux_r).zip_map(&d_dtheta(&flux_t), |a, b| a + b).into_values();

    let log_e = m.e.map(Float::ln);
    let log_g = m.g.map(Float::ln);
    let g_over_e = m.g.zip_map(&m.e, |g, e| (g / e).sqrt());
    let (dr, dt) = (grid.d1(), grid.d2());
    let face_r = |i: usize, j: usize| {
        (log_g.at(i + 1, j) - log_g.at(i, j)) / dr * log_mean(g_over_e.at(i, j), g_over_e.at(i + 1, j))
    };
    let face_t = |i: usize, j: usize, jn: usize| {
        (log_e.at(i, jn) - log_e.at(i, j)) / dt / log_mean(g_over_e.at(i, j), g_over_e.at(i, jn))
    };
    for i in 1..n1 - 1 {
        for j in 0..n2 {
            let jp = (j + 1) % n2;
            let jm = (j + n2 - 1) % n2;
            let radial = (face_r(i, j) - face_r(i - 1, j)) / dr;
            let angular = (face_t(i, j, jp) - face_t(i, jm, j)) / dt;
            bracket[grid.idx(i, j)] = radial + angular;
        }
    }
    let sign = match convention {
        SignConvention::Standard => -T::one(),
        SignConvention::WithoutMinus => T::one(),
    };
    let two = T::lit(2.0);
    ScalarField::from_vec_unchecked(grid, bracket).zip_map(&w, |b, wv| sign * b / (two * wv))
}

/// `(b - a) / log(b/a)`, falling back to the arithmetic mean when `a ≈ b`.
fn log_mean<T: Real>(a: T, b: T) -> T {
    let q = b / a;
    if (q - T::one()).abs() < T::lit(1e-6) {
        // series: a·(1 + x/2 - x²/12 + ...) with x = q - 1
        let x = q - T::one();
        a * (T::one() + x / T::lit(2.0) - x * x / T::lit(12.0))
    } else {
        (b - a) / q.ln()
    }
}

fn d_dr<T: Real>(f: &ScalarField<T>) -> ScalarField<T> {
    let grid = f.grid();
    let (n1, n2) = (grid.n1(), grid.n2());
    let h = grid.d1();
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let four = T::lit(4.0);
    let mut out = vec![T::zero(); grid.len()];
    for i in 0..n1 {
        for j in 0..n2 {
            out[grid.idx(i, j)] = if i == 0 {
                (-three * f.at(0, j) + four * f.at(1, j) - f.at(2, j)) / (two * h)
            } else if i == n1 - 1 {
                (three * f.at(i, j) - four * f.at(i - 1, j) + f.at(i - 2, j)) / (two * h)
            } else {
                (f.at(i + 1, j) - f.at(i - 1, j)) / (two * h)
            };
        }
    }
    ScalarField::from_vec_unchecked(grid.clone(), out)
}

fn d_dtheta<T: Real>(f: &ScalarField<T>) -> ScalarField<T> {
    let grid = f.grid();
    let (n1, n2) = (grid.n1(), grid.n2());
    let two = T::lit(2.0);
    let mut out = vec![T::zero(); grid.len()];
    for i in 0..n1 {
        for j in 0..n2 {
            let jp = (j + 1) % n2;
            let jm = (j + n2 - 1) % n2;
            out[grid.idx(i, j)] = (f.at(i, jp) - f.at(i, jm)) / (two * grid.d2());
        }
    }
    ScalarField::from_vec_unchecked(grid.clone(), out)
}

fn annulus_bounds<T: Real>(grid: &Grid<T>) -> Result<(T, T)> {
    match *grid.kind() {
        GridKind::Annulus { r_in, r_out, .. } => Ok((r_in, r_out)),
        GridKind::Rectangle { .. } => Err(Error::RequiresAnnulus),
    }
}

/// `h ≡ 1`.
pub fn flat_metric<T: Real>(grid: &Arc<Grid<T>>) -> ConformalMetric<T> {
    ConformalMetric::from_factor(ScalarField::constant(grid, T::one())).expect("unit factor is positive")
}

/// Complete hyperbolic cusp `h = (r log(1/r))⁻²`, curvature `-1`. Needs `r_out < 1`.
pub fn cusp_metric<T: Real>(grid: &Arc<Grid<T>>) -> Result<ConformalMetric<T>> {
    let (_, r_out) = annulus_bounds(grid)?;
    if !(r_out < T::one()) {
        return Err(Error::InvalidParameter(format!(
            "cusp metric needs r_out < 1, got {r_out}"
        )));
    }
    ConformalMetric::from_factor(ScalarField::from_fn(grid, cusp_factor))
}

pub fn cusp_factor<T: Real>(r: T, _theta: T) -> T {
    let l = r * (T::one() / r).ln();
    T::one() / (l * l)
}

/// Poincaré disc `h = 4 / (1 - r²)²`, curvature `-1`. Needs `r_out < 1`.
pub fn poincare_metric<T: Real>(grid: &Arc<Grid<T>>) -> Result<ConformalMetric<T>> {
    let (_, r_out) = annulus_bounds(grid)?;
    if !(r_out < T::one()) {
        return Err(Error::InvalidParameter(format!(
            "Poincaré metric needs r_out < 1, got {r_out}"
        )));
    }
    ConformalMetric::from_factor(ScalarField::from_fn(grid, |r, _| {
        let s = T::one() - r * r;
        T::lit(4.0) / (s * s)
    }))
}

/// Logarithmic factor `h = -log(r/4) = log(4/r)`, singular at the origin.
/// Needs `r_out < 4`. Its curvature is `+1/(2 r² log(4/r)³)` under the
/// standard convention.
pub fn log_factor_metric<T: Real>(grid: &Arc<Grid<T>>) -> Result<ConformalMetric<T>> {
    let (_, r_out) = annulus_bounds(grid)?;
    if !(r_out < T::lit(4.0)) {
        return Err(Error::InvalidParameter(format!(
            "logarithmic factor needs r_out < 4, got {r_out}"
        )));
    }
    ConformalMetric::from_factor(ScalarField::from_fn(grid, log_factor))
}

pub fn log_factor<T: Real>(r: T, _theta: T) -> T {
    -(r / T::lit(4.0)).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutoffOrientation {
    /// 1 for `r <= a`, 0 for `r >= b`.
    Decreasing,
    /// 0 for `r <= a`, 1 for `r >= b`.
    Increasing,
}

/// C² radial cutoff with plateaus outside `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff<T> {
    a: T,
    b: T,
    orientation: CutoffOrientation,
}

impl<T: Real> Cutoff<T> {
    pub fn new(a: T, b: T, orientation: CutoffOrientation) -> Result<Self> {
        if !(a > T::zero()) || !(b > a) || !b.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "cutoff needs 0 < a < b, got a = {a}, b = {b}"
            )));
        }
        Ok(Self { a, b, orientation })
    }

    pub fn a(&self) -> T {
        self.a
    }

    pub fn b(&self) -> T {
        self.b
    }

    pub fn orientation(&self) -> CutoffOrientation {
        self.orientation
    }
}

/// Quintic smoothstep `6t⁵ - 15t⁴ + 10t³`, clamped to `[0, 1]`.
pub fn smoothstep<T: Real>(t: T) -> T {
    if t <= T::zero() {
        T::zero()
    } else if t >= T::one() {
        T::one()
    } else {
        t * t * t * (t * (t * T::lit(6.0) - T::lit(15.0)) + T::lit(10.0))
    }
}

pub fn cutoff_eval<T: Real>(c: &Cutoff<T>, r: T) -> T {
    let s = smoothstep((r - c.a) / (c.b - c.a));
    match c.orientation {
        CutoffOrientation::Decreasing => T::one() - s,
        CutoffOrientation::Increasing => s,
    }
}

fn cutoff_field<T: Real>(grid: &Arc<Grid<T>>, c: &Cutoff<T>) -> ScalarField<T> {
    ScalarField::from_fn(grid, |r, _| cutoff_eval(c, r))
}

/// Nodewise `h = Σ ρ_i f_i + ρ̃ h̃` with radial cutoffs, as a new metric.
pub fn blend_metrics<T: Real>(
    pieces: &[(ConformalMetric<T>, Cutoff<T>)],
    background: (&ConformalMetric<T>, &Cutoff<T>),
) -> Result<ConformalMetric<T>> {
    let (bg, bg_cut) = background;
    let grid = bg.grid();
    if !grid.is_annulus() {
        return Err(Error::RequiresAnnulus);
    }
    let rho_bg = cutoff_field(grid, bg_cut);
    let mut h = rho_bg.zip_map(bg.factor(), |rho, f| rho * f);
    for (m, cut) in pieces {
        m.factor().ensure_same_grid(bg.factor())?;
        let rho = cutoff_field(grid, cut);
        let term = rho.zip_map(m.factor(), |rho, f| rho * f);
        h = term.zip_map(&h, |t, acc| t + acc);
    }
    ConformalMetric::from_factor(h)
}
