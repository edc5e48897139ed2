//! Logically rectangular coordinate domains, nodal scalar fields, and the
//! finite-difference and quadrature calculus built on them.
//!
//! Two domain kinds are supported:
//!
//! * a polar annulus `r_in <= r <= r_out`, periodic in `θ` with `n_theta`
//!   distinct angular nodes at `k·2π/n_theta` (no duplicated seam node);
//! * a Cartesian rectangle `[0, lx] × [0, ly]`.
//!
//! Nodes are addressed by `(i, j)` where `i` runs along `r` (or `x`) and `j`
//! along `θ` (or `y`); the flat index is `i * n2 + j`, so each `i` is a
//! contiguous row.
//!
//! All stencils are second order. Boundary nodes receive one-sided second
//! order values; solves only ever read interior values.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Real;

const MIN_ANNULUS_RADIAL: usize = 9;
const MIN_ANNULUS_ANGULAR: usize = 8;
const MIN_RECT_NODES: usize = 9;
const MIN_INTERIOR: usize = 9;

/// Grid rows at or below this many nodes are processed serially.
const PAR_MIN_ROWS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Node {
    pub i: usize,
    pub j: usize,
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(i={}, j={})", self.i, self.j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridKind<T> {
    Annulus {
        r_in: T,
        r_out: T,
        n_r: usize,
        n_theta: usize,
    },
    Rectangle {
        lx: T,
        ly: T,
        nx: usize,
        ny: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    kind: GridKind<T>,
    n1: usize,
    n2: usize,
    d1: T,
    d2: T,
    axis1: Vec<T>,
    axis2: Vec<T>,
    boundary: Vec<bool>,
}

/// Uniform polar annulus, periodic in `θ`.
pub fn build_annulus<T: Real>(r_in: T, r_out: T, n_r: usize, n_theta: usize) -> Result<Arc<Grid<T>>> {
    Grid::annulus(r_in, r_out, n_r, n_theta).map(Arc::new)
}

/// Uniform Cartesian rectangle `[0, lx] × [0, ly]`.
pub fn build_rectangle<T: Real>(lx: T, ly: T, nx: usize, ny: usize) -> Result<Arc<Grid<T>>> {
    Grid::rectangle(lx, ly, nx, ny).map(Arc::new)
}

impl<T: Real> Grid<T> {
    pub fn annulus(r_in: T, r_out: T, n_r: usize, n_theta: usize) -> Result<Self> {
        if !(r_in > T::zero()) || !r_in.is_finite() {
            return Err(Error::InvalidGrid(format!("inner radius must be positive, got {r_in}")));
        }
        if !(r_out > r_in) || !r_out.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "outer radius {r_out} must exceed inner radius {r_in}"
            )));
        }
        if n_r < MIN_ANNULUS_RADIAL {
            return Err(Error::InvalidGrid(format!(
                "n_r = {n_r} below minimum {MIN_ANNULUS_RADIAL}"
            )));
        }
        if n_theta < MIN_ANNULUS_ANGULAR {
            return Err(Error::InvalidGrid(format!(
                "n_theta = {n_theta} below minimum {MIN_ANNULUS_ANGULAR}"
            )));
        }
        let dr = (r_out - r_in) / T::lit((n_r - 1) as f64);
        let dtheta = T::TAU() / T::lit(n_theta as f64);
        let mut radii: Vec<T> = (0..n_r).map(|i| r_in + T::lit(i as f64) * dr).collect();
        radii[n_r - 1] = r_out;
        let thetas = (0..n_theta).map(|j| T::lit(j as f64) * dtheta).collect();
        let boundary = (0..n_r * n_theta)
            .map(|k| {
                let i = k / n_theta;
                i == 0 || i == n_r - 1
            })
            .collect();
        let grid = Self {
            kind: GridKind::Annulus {
                r_in,
                r_out,
                n_r,
                n_theta,
            },
            n1: n_r,
            n2: n_theta,
            d1: dr,
            d2: dtheta,
            axis1: radii,
            axis2: thetas,
            boundary,
        };
        grid.check_interior()?;
        Ok(grid)
    }

    pub fn rectangle(lx: T, ly: T, nx: usize, ny: usize) -> Result<Self> {
        if !(lx > T::zero()) || !(ly > T::zero()) || !lx.is_finite() || !ly.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "side lengths must be positive, got lx = {lx}, ly = {ly}"
            )));
        }
        if nx < MIN_RECT_NODES || ny < MIN_RECT_NODES {
            return Err(Error::InvalidGrid(format!(
                "node counts ({nx}, {ny}) below minimum {MIN_RECT_NODES}"
            )));
        }
        let dx = lx / T::lit((nx - 1) as f64);
        let dy = ly / T::lit((ny - 1) as f64);
        let mut xs: Vec<T> = (0..nx).map(|i| T::lit(i as f64) * dx).collect();
        let mut ys: Vec<T> = (0..ny).map(|j| T::lit(j as f64) * dy).collect();
        xs[nx - 1] = lx;
        ys[ny - 1] = ly;
        let boundary = (0..nx * ny)
            .map(|k| {
                let (i, j) = (k / ny, k % ny);
                i == 0 || i == nx - 1 || j == 0 || j == ny - 1
            })
            .collect();
        let grid = Self {
            kind: GridKind::Rectangle { lx, ly, nx, ny },
            n1: nx,
            n2: ny,
            d1: dx,
            d2: dy,
            axis1: xs,
            axis2: ys,
            boundary,
        };
        grid.check_interior()?;
        Ok(grid)
    }

    fn check_interior(&self) -> Result<()> {
        if self.interior_count() < MIN_INTERIOR {
            return Err(Error::InvalidGrid(format!(
                "only {} interior nodes, need at least {MIN_INTERIOR}",
                self.interior_count()
            )));
        }
        Ok(())
    }

    pub fn kind(&self) -> &GridKind<T> {
        &self.kind
    }

    pub fn is_annulus(&self) -> bool {
        matches!(self.kind, GridKind::Annulus { .. })
    }

    /// Node count along the first (`r` / `x`) axis.
    pub fn n1(&self) -> usize {
        self.n1
    }

    /// Node count along the second (`θ` / `y`) axis.
    pub fn n2(&self) -> usize {
        self.n2
    }

    /// Spacing along the first axis (`Δr` or `Δx`).
    pub fn d1(&self) -> T {
        self.d1
    }

    /// Spacing along the second axis (`Δθ` or `Δy`).
    pub fn d2(&self) -> T {
        self.d2
    }

    pub fn axis1(&self) -> &[T] {
        &self.axis1
    }

    pub fn axis2(&self) -> &[T] {
        &self.axis2
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n2 + j
    }

    #[inline]
    pub fn node(&self, k: usize) -> Node {
        Node {
            i: k / self.n2,
            j: k % self.n2,
        }
    }

    #[inline]
    pub fn is_boundary(&self, k: usize) -> bool {
        self.boundary[k]
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn boundary_count(&self) -> usize {
        self.boundary.iter().filter(|b| **b).count()
    }

    pub fn interior_count(&self) -> usize {
        self.len() - self.boundary_count()
    }

    /// Native coordinates `(r, θ)` or `(x, y)` of node `k`.
    #[inline]
    pub fn coords(&self, k: usize) -> (T, T) {
        let n = self.node(k);
        (self.axis1[n.i], self.axis2[n.j])
    }

    /// Cartesian position of node `k`.
    pub fn cartesian(&self, k: usize) -> (T, T) {
        let (c1, c2) = self.coords(k);
        match self.kind {
            GridKind::Annulus { .. } => (c1 * c2.cos(), c1 * c2.sin()),
            GridKind::Rectangle { .. } => (c1, c2),
        }
    }

    /// Flat area element per unit coordinate cell: `r` on the annulus, `1` on the rectangle.
    #[inline]
    pub fn flat_area_element(&self, k: usize) -> T {
        match self.kind {
            GridKind::Annulus { .. } => self.axis1[k / self.n2],
            GridKind::Rectangle { .. } => T::one(),
        }
    }

    /// Tensor-product quadrature weight of node `k` (trapezoid in `r`/`x` and
    /// `y`, rectangle rule in periodic `θ`). Does not include the area element.
    #[inline]
    pub fn quadrature_weight(&self, k: usize) -> T {
        let n = self.node(k);
        let half = T::lit(0.5);
        let w1 = if n.i == 0 || n.i == self.n1 - 1 { half } else { T::one() };
        let w2 = match self.kind {
            GridKind::Annulus { .. } => T::one(),
            GridKind::Rectangle { .. } => {
                if n.j == 0 || n.j == self.n2 - 1 {
                    half
                } else {
                    T::one()
                }
            }
        };
        w1 * w2 * self.d1 * self.d2
    }

    /// Coordinate distance from node `k` to the nearest boundary component.
    /// Exactly zero on boundary nodes.
    pub fn boundary_distance(&self, k: usize) -> T {
        if self.boundary[k] {
            return T::zero();
        }
        let n = self.node(k);
        match self.kind {
            GridKind::Annulus { r_in, r_out, .. } => {
                let r = self.axis1[n.i];
                (r - r_in).min(r_out - r)
            }
            GridKind::Rectangle { lx, ly, .. } => {
                let (x, y) = (self.axis1[n.i], self.axis2[n.j]);
                x.min(lx - x).min(y).min(ly - y)
            }
        }
    }

    /// Largest possible boundary distance (half the radial extent, or half the
    /// shorter side).
    pub fn max_boundary_distance(&self) -> T {
        let half = T::lit(0.5);
        match self.kind {
            GridKind::Annulus { r_in, r_out, .. } => half * (r_out - r_in),
            GridKind::Rectangle { lx, ly, .. } => half * lx.min(ly),
        }
    }

    /// Boundary node indices grouped per component: `[inner, outer]` circles
    /// on the annulus, a single closed component on the rectangle.
    pub fn boundary_components(&self) -> Vec<Vec<usize>> {
        match self.kind {
            GridKind::Annulus { .. } => {
                let last = self.n1 - 1;
                vec![
                    (0..self.n2).map(|j| self.idx(0, j)).collect(),
                    (0..self.n2).map(|j| self.idx(last, j)).collect(),
                ]
            }
            GridKind::Rectangle { .. } => vec![(0..self.len()).filter(|&k| self.boundary[k]).collect()],
        }
    }

    /// Same node layout and coordinates.
    pub fn same_as(self: &Arc<Self>, other: &Arc<Self>) -> bool {
        Arc::ptr_eq(self, other) || **self == **other
    }
}

/// Real values on every node of a grid.
#[derive(Debug, Clone)]
pub struct ScalarField<T> {
    grid: Arc<Grid<T>>,
    values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    /// Wraps values; rejects wrong length and non-finite entries.
    pub fn new(grid: Arc<Grid<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        let field = Self { grid, values };
        field.check_finite()?;
        Ok(field)
    }

    pub(crate) fn from_vec_unchecked(grid: Arc<Grid<T>>, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: &Arc<Grid<T>>) -> Self {
        Self::constant(grid, T::zero())
    }

    pub fn constant(grid: &Arc<Grid<T>>, c: T) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![c; grid.len()],
        }
    }

    /// Evaluates `f(native_coord1, native_coord2)` at every node.
    pub fn from_fn(grid: &Arc<Grid<T>>, f: impl Fn(T, T) -> T) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                let (a, b) = grid.coords(k);
                f(a, b)
            })
            .collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    /// Evaluates `f(x, y)` in Cartesian coordinates at every node.
    pub fn from_cartesian_fn(grid: &Arc<Grid<T>>, f: impl Fn(T, T) -> T) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                let (x, y) = grid.cartesian(k);
                f(x, y)
            })
            .collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(k) => Err(Error::NonFinite {
                node: self.grid.node(k),
                value: self.values[k].as_f64(),
            }),
            None => Ok(()),
        }
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn get(&self, k: usize) -> T {
        self.values[k]
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[self.grid.idx(i, j)]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ensure_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Nodewise combination. Panics if the grids differ in size; use
    /// [`ScalarField::ensure_same_grid`] first when the inputs are untrusted.
    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!(self.len(), other.len(), "zip_map over different grids");
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: T, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + alpha * b)
    }

    pub fn scale(&self, alpha: T) -> Self {
        self.map(|v| alpha * v)
    }

    /// Copy with every boundary value set to zero.
    pub fn interior_only(&self) -> Self {
        let mut values = self.values.clone();
        for (k, v) in values.iter_mut().enumerate() {
            if self.grid.is_boundary(k) {
                *v = T::zero();
            }
        }
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    /// Copy with the given value written at node `k`.
    pub fn with_value(&self, k: usize, value: T) -> Self {
        let mut out = self.clone();
        out.values[k] = value;
        out
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn max_abs_interior(&self) -> T {
        self.values
            .iter()
            .enumerate()
            .filter(|(k, _)| !self.grid.is_boundary(*k))
            .fold(T::zero(), |m, (_, v)| m.max(v.abs()))
    }

    pub fn max_abs_boundary(&self) -> T {
        self.values
            .iter()
            .enumerate()
            .filter(|(k, _)| self.grid.is_boundary(*k))
            .fold(T::zero(), |m, (_, v)| m.max(v.abs()))
    }

    pub fn min(&self) -> T {
        self.values.iter().fold(T::infinity(), |m, &v| m.min(v))
    }

    pub fn max(&self) -> T {
        self.values.iter().fold(T::neg_infinity(), |m, &v| m.max(v))
    }

    /// `max |self - other|` over all nodes.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    /// Shifts the field by `s` angular (or `y`) indices, wrapping around.
    pub fn roll_second_axis(&self, s: usize) -> Self {
        let n2 = self.grid.n2;
        let mut values = vec![T::zero(); self.len()];
        for i in 0..self.grid.n1 {
            for j in 0..n2 {
                values[i * n2 + (j + s) % n2] = self.values[i * n2 + j];
            }
        }
        Self {
            grid: self.grid.clone(),
            values,
        }
    }
}

/// Random field, uniform in `[-amplitude, amplitude]` on interior nodes and
/// zero on the boundary. Deterministic for a given seed.
pub fn random_interior_field<T: Real>(grid: &Arc<Grid<T>>, amplitude: T, seed: u64) -> ScalarField<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.len())
        .map(|k| {
            let u: f64 = rng.gen_range(-1.0..1.0);
            if grid.is_boundary(k) {
                T::zero()
            } else {
                amplitude * T::lit(u)
            }
        })
        .collect();
    ScalarField::from_vec_unchecked(grid.clone(), values)
}

/// Smooth random field vanishing on the boundary: a short random sum of
/// `sin(mπ t)` radial (or `x`) modes times low angular (or `y`) modes.
pub fn smooth_interior_field<T: Real>(grid: &Arc<Grid<T>>, amplitude: T, seed: u64) -> ScalarField<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut modes = Vec::new();
    for m in 1..=3usize {
        for n in 0..=2usize {
            let a: f64 = rng.gen_range(-1.0..1.0);
            let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            modes.push((m, n, a / (m * m + n + 1) as f64, phase));
        }
    }
    let pi = T::PI();
    let values = (0..grid.len())
        .map(|k| {
            if grid.is_boundary(k) {
                return T::zero();
            }
            let (c1, c2) = grid.coords(k);
            let mut v = T::zero();
            for &(m, n, a, phase) in &modes {
                let (t1, second) = match *grid.kind() {
                    GridKind::Annulus { r_in, r_out, .. } => (
                        (c1 - r_in) / (r_out - r_in),
                        (T::lit(n as f64) * c2 + T::lit(phase)).cos(),
                    ),
                    GridKind::Rectangle { lx, ly, .. } => (c1 / lx, (T::lit((n + 1) as f64) * pi * c2 / ly).sin()),
                };
                v = v + T::lit(a) * (T::lit(m as f64) * pi * t1).sin() * second;
            }
            amplitude * v
        })
        .collect();
    ScalarField::from_vec_unchecked(grid.clone(), values)
}

/// Per-boundary-component `(node index, value)` lists.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace<T> {
    pub components: Vec<Vec<(usize, T)>>,
}

impl<T: Real> BoundaryTrace<T> {
    pub fn max_abs(&self) -> T {
        self.components
            .iter()
            .flatten()
            .fold(T::zero(), |m, (_, v)| m.max(v.abs()))
    }

    pub fn len(&self) -> usize {
        self.components.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &(usize, T)> {
        self.components.iter().flatten()
    }
}

// --- one-dimensional difference formulas --------------------------------

#[inline]
fn second_centered<T: Real>(fm: T, f0: T, fp: T, h2: T) -> T {
    (fp - T::lit(2.0) * f0 + fm) / h2
}

/// One-sided second derivative at `f0`, looking away from the edge; exact on cubics.
#[inline]
fn second_one_sided<T: Real>(f0: T, f1: T, f2: T, f3: T, h2: T) -> T {
    (T::lit(2.0) * f0 - T::lit(5.0) * f1 + T::lit(4.0) * f2 - f3) / h2
}

/// One-sided first derivative at `f0` in the direction of `f1, f2`; exact on quadratics.
#[inline]
fn first_one_sided<T: Real>(f0: T, f1: T, f2: T, h: T) -> T {
    (-T::lit(3.0) * f0 + T::lit(4.0) * f1 - f2) / (T::lit(2.0) * h)
}

// --- operators ------------------------------------------------------------

/// Flat Laplacian `f_xx + f_yy` (rectangle) or `f_rr + f_r/r + f_θθ/r²`
/// (annulus, periodic in `θ`). Boundary-node values are one-sided second
/// order and should be treated as unreliable.
pub fn flat_laplacian<T: Real>(f: &ScalarField<T>) -> ScalarField<T> {
    let grid = f.grid();
    let (n1, n2) = (grid.n1, grid.n2);
    let v = f.values();
    let mut out = vec![T::zero(); grid.len()];
    let h1sq = grid.d1 * grid.d1;
    let h2sq = grid.d2 * grid.d2;
    let two = T::lit(2.0);

    let row = |i: usize, dst: &mut [T]| {
        let at = |ii: usize, jj: usize| v[ii * n2 + jj];
        match grid.kind {
            GridKind::Annulus { .. } => {
                let r = grid.axis1[i];
                for j in 0..n2 {
                    let jp = if j + 1 == n2 { 0 } else { j + 1 };
                    let jm = if j == 0 { n2 - 1 } else { j - 1 };
                    let f0 = at(i, j);
                    let (frr, fr) = if i == 0 {
                        (
                            second_one_sided(f0, at(1, j), at(2, j), at(3, j), h1sq),
                            first_one_sided(f0, at(1, j), at(2, j), grid.d1),
                        )
                    } else if i == n1 - 1 {
                        (
                            second_one_sided(f0, at(i - 1, j), at(i - 2, j), at(i - 3, j), h1sq),
                            -first_one_sided(f0, at(i - 1, j), at(i - 2, j), grid.d1),
                        )
                    } else {
                        let (fm, fp) = (at(i - 1, j), at(i + 1, j));
                        (second_centered(fm, f0, fp, h1sq), (fp - fm) / (two * grid.d1))
                    };
                    let ftt = second_centered(at(i, jm), f0, at(i, jp), h2sq);
                    dst[j] = frr + fr / r + ftt / (r * r);
                }
            }
            GridKind::Rectangle { .. } => {
                for j in 0..n2 {
                    let f0 = at(i, j);
                    let fxx = if i == 0 {
                        second_one_sided(f0, at(1, j), at(2, j), at(3, j), h1sq)
                    } else if i == n1 - 1 {
                        second_one_sided(f0, at(i - 1, j), at(i - 2, j), at(i - 3, j), h1sq)
                    } else {
                        second_centered(at(i - 1, j), f0, at(i + 1, j), h1sq)
                    };
                    let fyy = if j == 0 {
                        second_one_sided(f0, at(i, 1), at(i, 2), at(i, 3), h2sq)
                    } else if j == n2 - 1 {
                        second_one_sided(f0, at(i, j - 1), at(i, j - 2), at(i, j - 3), h2sq)
                    } else {
                        second_centered(at(i, j - 1), f0, at(i, j + 1), h2sq)
                    };
                    dst[j] = fxx + fyy;
                }
            }
        }
    };

    if n1 > PAR_MIN_ROWS {
        out.par_chunks_mut(n2).enumerate().for_each(|(i, dst)| row(i, dst));
    } else {
        out.chunks_mut(n2).enumerate().for_each(|(i, dst)| row(i, dst));
    }
    ScalarField::from_vec_unchecked(grid.clone(), out)
}

/// Diagonal of the interior flat Laplacian stencil (negative).
pub fn laplacian_diagonal<T: Real>(grid: &Arc<Grid<T>>) -> ScalarField<T> {
    let two = T::lit(2.0);
    let h1sq = grid.d1 * grid.d1;
    let h2sq = grid.d2 * grid.d2;
    ScalarField::from_fn(grid, |c1, _| match grid.kind {
        GridKind::Annulus { .. } => -two / h1sq - two / (c1 * c1 * h2sq),
        GridKind::Rectangle { .. } => -two / h1sq - two / h2sq,
    })
}

/// Flat Cartesian gradient `(∂_x f, ∂_y f)` at every node: centered in the
/// interior, one-sided second order across edges. On the annulus the polar
/// derivatives are converted by the chain rule.
pub fn cartesian_gradient<T: Real>(f: &ScalarField<T>) -> (ScalarField<T>, ScalarField<T>) {
    let grid = f.grid();
    let (n1, n2) = (grid.n1, grid.n2);
    let at = |i: usize, j: usize| f.at(i, j);
    let two = T::lit(2.0);
    let d1 = |i: usize, j: usize| -> T {
        if i == 0 {
            first_one_sided(at(0, j), at(1, j), at(2, j), grid.d1)
        } else if i == n1 - 1 {
            -first_one_sided(at(i, j), at(i - 1, j), at(i - 2, j), grid.d1)
        } else {
            (at(i + 1, j) - at(i - 1, j)) / (two * grid.d1)
        }
    };
    let mut gx = vec![T::zero(); grid.len()];
    let mut gy = vec![T::zero(); grid.len()];
    for i in 0..n1 {
        for j in 0..n2 {
            let k = grid.idx(i, j);
            let a = d1(i, j);
            match grid.kind {
                GridKind::Annulus { .. } => {
                    let jp = if j + 1 == n2 { 0 } else { j + 1 };
                    let jm = if j == 0 { n2 - 1 } else { j - 1 };
                    let ft = (at(i, jp) - at(i, jm)) / (two * grid.d2);
                    let r = grid.axis1[i];
                    let (s, c) = grid.axis2[j].sin_cos();
                    gx[k] = c * a - s * ft / r;
                    gy[k] = s * a + c * ft / r;
                }
                GridKind::Rectangle { .. } => {
                    let b = if j == 0 {
                        first_one_sided(at(i, 0), at(i, 1), at(i, 2), grid.d2)
                    } else if j == n2 - 1 {
                        -first_one_sided(at(i, j), at(i, j - 1), at(i, j - 2), grid.d2)
                    } else {
                        (at(i, j + 1) - at(i, j - 1)) / (two * grid.d2)
                    };
                    gx[k] = a;
                    gy[k] = b;
                }
            }
        }
    }
    (
        ScalarField::from_vec_unchecked(grid.clone(), gx),
        ScalarField::from_vec_unchecked(grid.clone(), gy),
    )
}

/// Flat area element per node (`r` or `1`), suitable as `area_weights`.
pub fn flat_area_weights<T: Real>(grid: &Arc<Grid<T>>) -> ScalarField<T> {
    let values = (0..grid.len()).map(|k| grid.flat_area_element(k)).collect();
    ScalarField::from_vec_unchecked(grid.clone(), values)
}

/// `∫ f · weights` with the grid's tensor-product quadrature. Summation order
/// is fixed (node order), so results are reproducible bit for bit.
pub fn integrate<T: Real>(f: &ScalarField<T>, area_weights: &ScalarField<T>) -> Result<T> {
    f.ensure_same_grid(area_weights)?;
    let grid = f.grid();
    Ok(f.values()
        .iter()
        .zip(area_weights.values())
        .enumerate()
        .fold(T::zero(), |acc, (k, (&a, &w))| acc + grid.quadrature_weight(k) * a * w))
}

/// `∫ f g · weights`.
pub fn inner_product<T: Real>(f: &ScalarField<T>, g: &ScalarField<T>, area_weights: &ScalarField<T>) -> Result<T> {
    f.ensure_same_grid(g)?;
    f.ensure_same_grid(area_weights)?;
    let grid = f.grid();
    let (fv, gv, wv) = (f.values(), g.values(), area_weights.values());
    // the product f·g is formed first so the result is symmetric bit for bit
    Ok((0..grid.len()).fold(T::zero(), |acc, k| {
        acc + (fv[k] * gv[k]) * (grid.quadrature_weight(k) * wv[k])
    }))
}

/// Weighted L² norm `sqrt(∫ f² · weights)`.
pub fn norm<T: Real>(f: &ScalarField<T>, area_weights: &ScalarField<T>) -> Result<T> {
    inner_product(f, f, area_weights).map(|v| v.max(T::zero()).sqrt())
}

/// Outward normal derivative at every boundary node, one-sided second order.
/// On the rectangle, corner nodes use the `x`-directed normal of the
/// left/right edges.
pub fn normal_derivative<T: Real>(f: &ScalarField<T>) -> BoundaryTrace<T> {
    let grid = f.grid();
    let (n1, n2) = (grid.n1, grid.n2);
    let at = |i: usize, j: usize| f.at(i, j);
    let last1 = n1 - 1;
    let last2 = n2 - 1;
    let outward_low1 = |j: usize| -first_one_sided(at(0, j), at(1, j), at(2, j), grid.d1);
    let outward_high1 = |j: usize| -first_one_sided(at(last1, j), at(last1 - 1, j), at(last1 - 2, j), grid.d1);
    match grid.kind {
        GridKind::Annulus { .. } => BoundaryTrace {
            components: vec![
                (0..n2).map(|j| (grid.idx(0, j), outward_low1(j))).collect(),
                (0..n2).map(|j| (grid.idx(last1, j), outward_high1(j))).collect(),
            ],
        },
        GridKind::Rectangle { .. } => {
            let mut comp = Vec::with_capacity(grid.boundary_count());
            for k in 0..grid.len() {
                if !grid.is_boundary(k) {
                    continue;
                }
                let Node { i, j } = grid.node(k);
                let v = if i == 0 {
                    outward_low1(j)
                } else if i == last1 {
                    outward_high1(j)
                } else if j == 0 {
                    -first_one_sided(at(i, 0), at(i, 1), at(i, 2), grid.d2)
                } else {
                    debug_assert_eq!(j, last2);
                    -first_one_sided(at(i, last2), at(i, last2 - 1), at(i, last2 - 2), grid.d2)
                };
                comp.push((k, v));
            }
            BoundaryTrace { components: vec![comp] }
        }
    }
}

/// Flat boundary integral `∮ w ∂_ν f dl` (with `w ≡ 1` when `weight` is
/// `None`). Each rectangle edge is integrated with its own normal, corners
/// included, by the trapezoid rule; annulus circles use the rectangle rule.
pub fn boundary_flux<T: Real>(f: &ScalarField<T>, weight: Option<&ScalarField<T>>) -> Result<T> {
    if let Some(w) = weight {
        f.ensure_same_grid(w)?;
    }
    let grid = f.grid();
    let (n1, n2) = (grid.n1, grid.n2);
    let at = |i: usize, j: usize| f.at(i, j);
    let w = |i: usize, j: usize| weight.map_or(T::one(), |w| w.at(i, j));
    let last1 = n1 - 1;
    let last2 = n2 - 1;
    let half = T::lit(0.5);
    let mut total = T::zero();
    match grid.kind {
        GridKind::Annulus { r_in, r_out, .. } => {
            for j in 0..n2 {
                let inner = -first_one_sided(at(0, j), at(1, j), at(2, j), grid.d1);
                let outer = -first_one_sided(at(last1, j), at(last1 - 1, j), at(last1 - 2, j), grid.d1);
                total = total + grid.d2 * (r_in * w(0, j) * inner + r_out * w(last1, j) * outer);
            }
        }
        GridKind::Rectangle { .. } => {
            let tw = |idx: usize, last: usize| if idx == 0 || idx == last { half } else { T::one() };
            for j in 0..n2 {
                let left = -first_one_sided(at(0, j), at(1, j), at(2, j), grid.d1);
                let right = -first_one_sided(at(last1, j), at(last1 - 1, j), at(last1 - 2, j), grid.d1);
                total = total + tw(j, last2) * grid.d2 * (w(0, j) * left + w(last1, j) * right);
            }
            for i in 0..n1 {
                let bottom = -first_one_sided(at(i, 0), at(i, 1), at(i, 2), grid.d2);
                let top = -first_one_sided(at(i, last2), at(i, last2 - 1), at(i, last2 - 2), grid.d2);
                total = total + tw(i, last1) * grid.d1 * (w(i, 0) * bottom + w(i, last2) * top);
            }
        }
    }
    Ok(total)
}

/// Flat Dirichlet energy `∫ |∇f|² dA` from staggered (edge) differences.
///
/// For fields vanishing on the boundary this equals `-∫ f Δf dA` of
/// [`flat_laplacian`] exactly (discrete summation by parts); it is computed
/// along an independent code path.
pub fn dirichlet_energy<T: Real>(f: &ScalarField<T>) -> T {
    let grid = f.grid();
    let (n1, n2) = (grid.n1, grid.n2);
    let at = |i: usize, j: usize| f.at(i, j);
    let half = T::lit(0.5);
    let (d1, d2) = (grid.d1, grid.d2);
    let mut total = T::zero();
    match grid.kind {
        GridKind::Annulus { .. } => {
            for i in 0..n1 - 1 {
                let r_mid = grid.axis1[i] + half * d1;
                for j in 0..n2 {
                    let df = at(i + 1, j) - at(i, j);
                    total = total + r_mid * df * df / d1 * d2;
                }
            }
            for i in 0..n1 {
                let r = grid.axis1[i];
                let wr = if i == 0 || i == n1 - 1 { half } else { T::one() };
                for j in 0..n2 {
                    let jp = if j + 1 == n2 { 0 } else { j + 1 };
                    let df = at(i, jp) - at(i, j);
                    total = total + wr * d1 * df * df / (r * d2);
                }
            }
        }
        GridKind::Rectangle { .. } => {
            for i in 0..n1 - 1 {
                for j in 0..n2 {
                    let wy = if j == 0 || j == n2 - 1 { half } else { T::one() };
                    let df = at(i + 1, j) - at(i, j);
                    total = total + wy * df * df / d1 * d2;
                }
            }
            for i in 0..n1 {
                let wx = if i == 0 || i == n1 - 1 { half } else { T::one() };
                for j in 0..n2 - 1 {
                    let df = at(i, j + 1) - at(i, j);
                    total = total + wx * df * df / d2 * d1;
                }
            }
        }
    }
    total
}
