//! Machine-readable run reports.

use prescurv::estimates::{ConvergenceReport, EstimateReport};
use prescurv::solver::BoundaryReport;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub config: RunConfig,
    pub converged: bool,
    pub iters: usize,
    pub s_final: f64,
    pub b_l2_final: f64,
    /// `max |K_achieved - K_target| / max |K_target|` over nodes at least
    /// `2 · collar_width` from the boundary.
    pub core_curvature_error: f64,
    pub lambda1: Option<f64>,
    pub boundary: BoundarySummary,
    pub estimates: EstimateSummary,
    /// Estimate reports at every `estimate_every`-th iterate.
    pub estimate_history: Vec<EstimateCheckpoint>,
    pub convergence: ConvergenceSummary,
    /// True iff every estimate and convergence check passed.
    pub checks_ok: bool,
    pub wall_time: f64,
    /// Written files, relative to the output directory.
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySummary {
    pub max_sigma: f64,
    pub max_normal_derivative: f64,
    pub max_laplacian: f64,
}

impl From<&BoundaryReport<f64>> for BoundarySummary {
    fn from(b: &BoundaryReport<f64>) -> Self {
        Self {
            max_sigma: b.max_sigma,
            max_normal_derivative: b.max_normal_derivative,
            max_laplacian: b.max_laplacian,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSummary {
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub d2: f64,
    pub eps_q: f64,
    pub b1_ok: bool,
    pub b2_ok: bool,
    pub bound_ok: bool,
    pub partition_identity_gap: f64,
    pub laplacian_energy: f64,
    pub c_proxy: f64,
    pub energy_bound: f64,
    pub energy_ok: bool,
    pub partition_sizes: [usize; 3],
    pub boundary_term: f64,
    pub all_ok: bool,
}

impl From<&EstimateReport<f64>> for EstimateSummary {
    fn from(r: &EstimateReport<f64>) -> Self {
        let (a, b, c) = r.partition_sizes;
        Self {
            b1: r.b1,
            b2: r.b2,
            b3: r.b3,
            d2: r.d2,
            eps_q: r.eps_q,
            b1_ok: r.b1_ok,
            b2_ok: r.b2_ok,
            bound_ok: r.bound_ok,
            partition_identity_gap: r.partition_identity_gap,
            laplacian_energy: r.laplacian_energy,
            c_proxy: r.c_proxy,
            energy_bound: r.energy_bound,
            energy_ok: r.energy_ok,
            partition_sizes: [a, b, c],
            boundary_term: r.boundary_term,
            all_ok: r.all_ok(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateCheckpoint {
    pub iter: usize,
    pub report: EstimateSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSummary {
    pub degenerate: bool,
    pub s_non_increasing: bool,
    pub first_increase: Option<usize>,
    pub tail_oscillation: f64,
    pub tail_settled: bool,
    pub final_s_ok: bool,
    pub all_ok: bool,
}

impl From<&ConvergenceReport<f64>> for ConvergenceSummary {
    fn from(c: &ConvergenceReport<f64>) -> Self {
        Self {
            degenerate: c.degenerate,
            s_non_increasing: c.s_non_increasing,
            first_increase: c.first_increase,
            tail_oscillation: c.tail_oscillation,
            tail_settled: c.tail_settled,
            final_s_ok: c.final_s_ok,
            all_ok: c.all_ok(),
        }
    }
}

impl RunReport {
    /// The report as JSON with `wall_time` removed, for determinism checks.
    pub fn numerics(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if let Some(o) = v.as_object_mut() {
            o.remove("wall_time");
        }
        v
    }

    /// Names of numeric fields that are not finite.
    pub fn non_finite_fields(&self) -> Vec<String> {
        let mut bad = Vec::new();
        let v = serde_json::to_value(self).expect("report serializes");
        collect_null_numbers(&v, String::new(), &mut bad);
        bad
    }
}

// serde_json writes non-finite floats as null; flag the ones that should be numbers.
fn collect_null_numbers(v: &serde_json::Value, at: String, out: &mut Vec<String>) {
    const OPTIONAL: [&str; 2] = ["lambda1", "first_increase"];
    match v {
        serde_json::Value::Null if !OPTIONAL.iter().any(|k| at.ends_with(k)) => out.push(at),
        serde_json::Value::Object(map) => {
            for (k, x) in map {
                collect_null_numbers(x, format!("{at}/{k}"), out);
            }
        }
        serde_json::Value::Array(xs) => {
            for (i, x) in xs.iter().enumerate() {
                collect_null_numbers(x, format!("{at}/{i}"), out);
            }
        }
        _ => {}
    }
}
