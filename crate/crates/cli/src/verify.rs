//! Re-checks a stored solve result against the invariant suites.

use std::collections::BTreeMap;
use std::path::Path;

use prescurv::estimates::b_terms_report;
use prescurv::mesh::{inner_product, smooth_interior_field};
use prescurv::problem::{functional_s, gradient_s, residual_b};
use prescurv::solver::{uniqueness_check, CgConfig, Method, Seed, SolverConfig};
use prescurv::spectral::{dirichlet_eigenpairs, green_bound_check};
use prescurv::{CurvatureProblem64, Field64};
use serde::{Deserialize, Serialize};

use crate::curvature::{log_factor_sign_note, SignSample};
use crate::error::{exit, CliResult};
use crate::field_io::{read_field_in, read_json, write_json};
use crate::report::{RunReport, REPORT_FILE};

pub const VERIFY_FILE: &str = "verify.json";
const GREEN_TRIALS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub values: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: Vec<Check>,
    /// Informational; never fails the run.
    pub sign_note: SignSample,
}

impl VerifyReport {
    pub fn failed(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect()
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed {
            exit::OK
        } else {
            exit::VERIFY_FAILED
        }
    }
}

type Values = BTreeMap<String, f64>;
type Suite<'a> = Box<dyn Fn() -> prescurv::Result<(bool, Values)> + 'a>;

/// Loads `dir`, runs every check and writes `verify.json` next to the inputs.
pub fn cmd_verify(dir: &Path) -> CliResult<VerifyReport> {
    let report: RunReport = read_json(&dir.join(REPORT_FILE))?;
    let sigma = read_field_in(dir, "sigma")?;
    let p = report.config.build_problem()?;
    let sigma = Field64::new(p.grid().clone(), sigma.into_values()).map_err(|e| crate::error::CliError::Field {
        path: dir.join("sigma.csv"),
        reason: e.to_string(),
    })?;
    let cfg = report.config.solver_config()?;
    let seed = report.config.output.seed;

    let suites: [(&str, Suite); 7] = [
        ("boundary", Box::new(|| boundary(&sigma))),
        ("residual", Box::new(|| residual(&sigma, &p, cfg.tol_b))),
        (
            "functional_identity",
            Box::new(|| functional_identity(&sigma, &p, seed)),
        ),
        ("gradient_check", Box::new(|| gradient_check(&sigma, &p, seed))),
        ("uniqueness", Box::new(|| uniqueness(&sigma, &p, &cfg, seed))),
        ("estimates", Box::new(|| estimates(&sigma, &p))),
        ("green_bound", Box::new(|| green_bound(&p, seed, cfg.cg_tol))),
    ];
    let checks: Vec<Check> = suites
        .iter()
        .map(|(name, run)| match run() {
            Ok((passed, values)) => Check {
                name: name.to_string(),
                passed,
                values,
                error: None,
            },
            Err(e) => Check {
                name: name.to_string(),
                passed: false,
                values: Values::new(),
                error: Some(e.to_string()),
            },
        })
        .collect();
    let out = VerifyReport {
        passed: checks.iter().all(|c| c.passed),
        checks,
        sign_note: log_factor_sign_note()?,
    };
    write_json(&dir.join(crate::verify::VERIFY_FILE), &out)?;
    Ok(out)
}

fn values<const N: usize>(pairs: [(&str, f64); N]) -> Values {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn boundary(sigma: &Field64) -> prescurv::Result<(bool, Values)> {
    let m = sigma.max_abs_boundary();
    Ok((m == 0.0, values([("max_abs_sigma", m)])))
}

fn residual(sigma: &Field64, p: &CurvatureProblem64, tol_b: f64) -> prescurv::Result<(bool, Values)> {
    let r = residual_b(sigma, p)?;
    Ok((r.b_l2 <= tol_b, values([("b_l2", r.b_l2), ("tol_b", tol_b)])))
}

/// Perturbations of the stored solution used by the derivative checks.
fn probes(sigma: &Field64, seed: u64) -> Vec<Field64> {
    [0.05, 0.2]
        .iter()
        .enumerate()
        .map(|(i, &a)| sigma.axpy(1.0, &smooth_interior_field(sigma.grid(), a, seed + i as u64)))
        .collect()
}

// Literal `∫(K(σ) - K)² e^{2σ} dμ` against `∫ b² dμ`.
fn functional_identity(sigma: &Field64, p: &CurvatureProblem64, seed: u64) -> prescurv::Result<(bool, Values)> {
    let mut worst: f64 = 0.0;
    for s in probes(sigma, seed) {
        let lit = functional_s(&s, p)?;
        let res = residual_b(&s, p)?.s;
        worst = worst.max((lit - res).abs() / res);
    }
    Ok((worst <= 1e-10, values([("max_rel_gap", worst)])))
}

fn gradient_check(sigma: &Field64, p: &CurvatureProblem64, seed: u64) -> prescurv::Result<(bool, Values)> {
    let w = p.metric().area_weights();
    let t = 1e-5;
    let mut worst: f64 = 0.0;
    for (i, s) in probes(sigma, seed).into_iter().enumerate() {
        let beta = smooth_interior_field(p.grid(), 1.0, seed + 100 + i as u64);
        let analytic = inner_product(&gradient_s(&s, p)?, &beta, w)?;
        let numeric = (functional_s(&s.axpy(t, &beta), p)? - functional_s(&s.axpy(-t, &beta), p)?) / (2.0 * t);
        worst = worst.max((analytic - numeric).abs() / analytic.abs());
    }
    Ok((worst <= 1e-6, values([("max_rel_error", worst)])))
}

fn uniqueness(
    sigma: &Field64,
    p: &CurvatureProblem64,
    cfg: &SolverConfig<f64>,
    seed: u64,
) -> prescurv::Result<(bool, Values)> {
    let seeds = [Seed::Zero, Seed::Uniform(0.3), Seed::Random { amplitude: 0.5, seed }];
    let newton = SolverConfig {
        method: Method::Newton,
        ..*cfg
    };
    let u = uniqueness_check(p, &seeds, &newton)?;
    let to_stored = u
        .solutions
        .iter()
        .map(|s| s.sigma.max_abs_diff(sigma))
        .fold(0.0, f64::max);
    let tol = 1e-8;
    Ok((
        u.max_distance <= tol && to_stored <= tol && u.energy.holds(),
        values([
            ("max_pairwise_distance", u.max_distance),
            ("max_distance_to_stored", to_stored),
            ("energy_residual", u.energy.residual),
        ]),
    ))
}

fn estimates(sigma: &Field64, p: &CurvatureProblem64) -> prescurv::Result<(bool, Values)> {
    let r = b_terms_report(sigma, p)?;
    Ok((
        r.all_ok(),
        values([
            ("b1", r.b1),
            ("b2", r.b2),
            ("b3", r.b3),
            ("d2", r.d2),
            ("partition_identity_gap", r.partition_identity_gap),
            ("laplacian_energy", r.laplacian_energy),
            ("energy_bound", r.energy_bound),
        ]),
    ))
}

fn green_bound(p: &CurvatureProblem64, seed: u64, cg_tol: f64) -> prescurv::Result<(bool, Values)> {
    let m = p.metric();
    let lambda1 = dirichlet_eigenpairs(m, 1)?.lambda1();
    let cg = CgConfig {
        tol: cg_tol,
        ..CgConfig::default()
    };
    let r = green_bound_check(m, GREEN_TRIALS, lambda1, seed, &cg)?;
    Ok((
        r.all_ok(),
        values([
            ("lambda1", lambda1),
            ("c2", r.c2),
            ("max_ratio", r.max_ratio()),
            ("max_energy_residual", r.max_energy_residual()),
        ]),
    ))
}
