//! Run configuration: a strict JSON schema and the builders that turn it
//! into grids, metrics, problems and solver settings.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use prescurv::metric::{
    blend_metrics, cusp_metric, flat_metric, log_factor_metric, poincare_metric, Cutoff, CutoffOrientation,
};
use prescurv::problem::{blend_target, InnerTarget};
use prescurv::solver::{LineSearch, Method, SolverConfig};
use prescurv::{ConformalMetric64, CurvatureProblem64, Grid64, GridKind};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::field_io;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub metric: MetricSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Annulus {
        r_in: f64,
        r_out: f64,
        n_r: usize,
        n_theta: usize,
    },
    Rectangle {
        lx: f64,
        ly: f64,
        nx: usize,
        ny: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSpec {
    Flat {},
    Cusp {},
    Poincare {},
    /// `h = log(4/r)`.
    LogFactor {},
    Blend {
        pieces: Vec<BlendPiece>,
        background: Box<BlendPiece>,
    },
    /// Conformal factor read from a field file on the configured grid.
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlendPiece {
    pub metric: MetricSpec,
    pub cutoff: CutoffSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffSpec {
    pub a: f64,
    pub b: f64,
    pub orientation: Orientation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Decreasing,
    Increasing,
}

/// Prescribed curvature: `K0` within `collar_width` of the boundary, the
/// inner prescription beyond `2 · collar_width`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Scale { value: f64, collar_width: f64 },
    Offset { value: f64, collar_width: f64 },
    File { path: PathBuf, collar_width: f64 },
}

impl TargetSpec {
    pub fn collar_width(&self) -> f64 {
        match *self {
            TargetSpec::Scale { collar_width, .. }
            | TargetSpec::Offset { collar_width, .. }
            | TargetSpec::File { collar_width, .. } => collar_width,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodSpec {
    Newton,
    Gradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub method: MethodSpec,
    pub tol_b: f64,
    pub max_iter: usize,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub c1: f64,
    pub backtrack: f64,
    pub max_halvings: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let c = SolverConfig::<f64>::default();
        Self {
            method: MethodSpec::Newton,
            tol_b: c.tol_b,
            max_iter: c.max_iter,
            cg_tol: c.cg_tol,
            cg_max_iter: c.cg_max_iter,
            c1: c.line_search.c1,
            backtrack: c.line_search.backtrack,
            max_halvings: c.line_search.max_halvings,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub directory: PathBuf,
    pub dump_fields: bool,
    /// Estimate report every this many iterates; 0 for the final one only.
    pub estimate_every: usize,
    /// Seed for randomized checks.
    pub seed: u64,
    /// Also compute the first Dirichlet eigenvalue.
    pub lambda1: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("prescurv-out"),
            dump_fields: true,
            estimate_every: 0,
            seed: 0,
            lambda1: false,
        }
    }
}

impl RunConfig {
    /// Parses `path` and resolves relative input paths against its directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    fn resolve_paths(&mut self, base: &Path) {
        fn fix(p: &mut PathBuf, base: &Path) {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        fn walk(m: &mut MetricSpec, base: &Path) {
            match m {
                MetricSpec::File { path } => fix(path, base),
                MetricSpec::Blend { pieces, background } => {
                    for piece in pieces.iter_mut() {
                        walk(&mut piece.metric, base);
                    }
                    walk(&mut background.metric, base);
                }
                _ => {}
            }
        }
        walk(&mut self.metric, base);
        if let Some(TargetSpec::File { path, .. }) = &mut self.target {
            fix(path, base);
        }
    }

    pub fn grid(&self) -> CliResult<Arc<Grid64>> {
        self.domain.build()
    }

    pub fn build_metric(&self, grid: &Arc<Grid64>) -> CliResult<ConformalMetric64> {
        self.metric.build(grid)
    }

    pub fn build_problem(&self) -> CliResult<CurvatureProblem64> {
        let grid = self.grid()?;
        let metric = self.build_metric(&grid)?;
        let target = self
            .target
            .as_ref()
            .ok_or_else(|| CliError::Config("the solve command needs a `target` section".into()))?;
        let w = target.collar_width();
        let inner = match target {
            TargetSpec::Scale { value, .. } => InnerTarget::Scale(*value),
            TargetSpec::Offset { value, .. } => InnerTarget::Offset(*value),
            TargetSpec::File { path, .. } => InnerTarget::Field(field_io::read_field_on(path, &grid)?),
        };
        let k = blend_target(&metric, &inner, w).map_err(config_err)?;
        CurvatureProblem64::new(metric, k, w).map_err(config_err)
    }

    pub fn solver_config(&self) -> CliResult<SolverConfig<f64>> {
        let s = &self.solver;
        let cfg = SolverConfig {
            method: match s.method {
                MethodSpec::Newton => Method::Newton,
                MethodSpec::Gradient => Method::Gradient,
            },
            tol_b: s.tol_b,
            max_iter: s.max_iter,
            cg_tol: s.cg_tol,
            cg_max_iter: s.cg_max_iter,
            line_search: LineSearch {
                c1: s.c1,
                backtrack: s.backtrack,
                max_halvings: s.max_halvings,
            },
        };
        cfg.validate().map_err(config_err)?;
        Ok(cfg)
    }
}

impl DomainSpec {
    pub fn build(&self) -> CliResult<Arc<Grid64>> {
        let g = match *self {
            DomainSpec::Annulus {
                r_in,
                r_out,
                n_r,
                n_theta,
            } => prescurv::build_annulus(r_in, r_out, n_r, n_theta),
            DomainSpec::Rectangle { lx, ly, nx, ny } => prescurv::build_rectangle(lx, ly, nx, ny),
        };
        g.map_err(config_err)
    }

    pub fn of(grid: &Grid64) -> Self {
        match *grid.kind() {
            GridKind::Annulus {
                r_in,
                r_out,
                n_r,
                n_theta,
            } => DomainSpec::Annulus {
                r_in,
                r_out,
                n_r,
                n_theta,
            },
            GridKind::Rectangle { lx, ly, nx, ny } => DomainSpec::Rectangle { lx, ly, nx, ny },
        }
    }
}

impl MetricSpec {
    pub fn build(&self, grid: &Arc<Grid64>) -> CliResult<ConformalMetric64> {
        let m = match self {
            MetricSpec::Flat {} => Ok(flat_metric(grid)),
            MetricSpec::Cusp {} => cusp_metric(grid),
            MetricSpec::Poincare {} => poincare_metric(grid),
            MetricSpec::LogFactor {} => log_factor_metric(grid),
            MetricSpec::File { path } => ConformalMetric64::from_factor(field_io::read_field_on(path, grid)?),
            MetricSpec::Blend { pieces, background } => {
                let built = pieces
                    .iter()
                    .map(|p| Ok((p.metric.build(grid)?, p.cutoff.build()?)))
                    .collect::<CliResult<Vec<_>>>()?;
                let bg = background.metric.build(grid)?;
                let bg_cut = background.cutoff.build()?;
                blend_metrics(&built, (&bg, &bg_cut))
            }
        };
        m.map_err(config_err)
    }
}

impl CutoffSpec {
    fn build(&self) -> CliResult<Cutoff<f64>> {
        let o = match self.orientation {
            Orientation::Decreasing => CutoffOrientation::Decreasing,
            Orientation::Increasing => CutoffOrientation::Increasing,
        };
        Cutoff::new(self.a, self.b, o).map_err(config_err)
    }
}

fn config_err(e: prescurv::Error) -> CliError {
    CliError::Config(e.to_string())
}
