use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use prescurv::estimates::{b_terms_report, convergence_monitor};
use prescurv::mesh::ScalarField;
use prescurv::problem::{curvature_of, residual_b};
use prescurv::solver::{gradient_descent_solve_with, newton_solve_with, IterationRecord, Method};
use prescurv::spectral::dirichlet_eigenpairs;
use prescurv::{CurvatureProblem64, Field64};

use crate::config::{DomainSpec, RunConfig};
use crate::error::{exit, CliError, CliResult};
use crate::field_io::{write_field, write_json, write_meta, Meta};
use crate::report::{BoundarySummary, ConvergenceSummary, EstimateCheckpoint, EstimateSummary, RunReport, REPORT_FILE};

pub const HISTORY_FILE: &str = "history.csv";

#[derive(Debug)]
pub struct SolveOutcome {
    pub exit_code: i32,
    pub report: RunReport,
    pub dir: PathBuf,
    pub sigma: Field64,
}

pub fn cmd_solve(config: &Path, out: Option<&Path>) -> CliResult<SolveOutcome> {
    run_solve(RunConfig::load(config)?, out)
}

/// Solves the configured problem from `σ = 0` and writes the output
/// directory (`out` overrides the configured one).
pub fn run_solve(cfg: RunConfig, out: Option<&Path>) -> CliResult<SolveOutcome> {
    let start = Instant::now();
    let p = cfg.build_problem()?;
    let scfg = cfg.solver_config()?;
    let dir = out.map_or_else(|| cfg.output.directory.clone(), Path::to_path_buf);
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;

    let every = cfg.output.estimate_every;
    let mut checkpoints = Vec::new();
    let mut observer_err = None;
    let observe = |rec: &IterationRecord<f64>, sigma: &Field64| {
        if every == 0 || !rec.iter.is_multiple_of(every) || observer_err.is_some() {
            return;
        }
        match b_terms_report(sigma, &p) {
            Ok(r) => checkpoints.push(EstimateCheckpoint {
                iter: rec.iter,
                report: EstimateSummary::from(&r),
            }),
            Err(e) => observer_err = Some(e),
        }
    };
    let zero = ScalarField::zeros(p.grid());
    let res = match scfg.method {
        Method::Newton => newton_solve_with(&p, &zero, &scfg, observe),
        Method::Gradient => gradient_descent_solve_with(&p, &zero, &scfg, observe),
    }
    .map_err(CliError::Solve)?;
    if let Some(e) = observer_err {
        return Err(CliError::Solve(e));
    }

    let estimates = EstimateSummary::from(&b_terms_report(&res.sigma, &p).map_err(CliError::Solve)?);
    let convergence = ConvergenceSummary::from(&convergence_monitor(&res.history, scfg.tol_b));
    let residual = residual_b(&res.sigma, &p).map_err(CliError::Solve)?;
    let k_achieved = curvature_of(&res.sigma, p.metric()).map_err(CliError::Solve)?;
    let lambda1 = if cfg.output.lambda1 {
        Some(dirichlet_eigenpairs(p.metric(), 1).map_err(CliError::Solve)?.lambda1())
    } else {
        None
    };

    let mut artifacts = Vec::new();
    if cfg.output.dump_fields {
        let fields: [(&str, &Field64); 4] = [
            ("sigma", &res.sigma),
            ("K_target", p.target()),
            ("K_achieved", &k_achieved),
            ("residual", &residual.b),
        ];
        for (name, f) in fields {
            let file = format!("{name}.csv");
            write_field(&dir.join(&file), f, name)?;
            artifacts.push(file);
        }
        write_history(&dir.join(HISTORY_FILE), &res.history)?;
        artifacts.push(HISTORY_FILE.into());
        write_meta(
            &dir,
            &Meta {
                domain: DomainSpec::of(p.grid()),
                fields: fields.iter().map(|(n, _)| n.to_string()).collect(),
            },
        )?;
        artifacts.push(crate::field_io::META_FILE.into());
    }
    artifacts.push(REPORT_FILE.into());

    let checks_ok = estimates.all_ok && convergence.all_ok && checkpoints.iter().all(|c| c.report.all_ok);
    let last = res.final_record();
    let report = RunReport {
        converged: res.converged,
        iters: res.iterations(),
        s_final: last.s,
        b_l2_final: last.b_l2,
        core_curvature_error: core_curvature_error(&p, &k_achieved),
        lambda1,
        boundary: BoundarySummary::from(&res.boundary),
        estimates,
        estimate_history: checkpoints,
        convergence,
        checks_ok,
        wall_time: start.elapsed().as_secs_f64(),
        artifacts,
        config: cfg,
    };
    write_json(&dir.join(REPORT_FILE), &report)?;
    let exit_code = if !report.converged {
        exit::NOT_CONVERGED
    } else if !report.checks_ok || !report.non_finite_fields().is_empty() {
        exit::ESTIMATE_VIOLATION
    } else {
        exit::OK
    };
    Ok(SolveOutcome {
        exit_code,
        report,
        dir,
        sigma: res.sigma,
    })
}

/// Relative nodewise curvature mismatch away from the collar and its
/// transition band (every interior node when the collar is empty).
pub fn core_curvature_error(p: &CurvatureProblem64, k_achieved: &Field64) -> f64 {
    let g = p.grid();
    let band = 2.0 * p.collar_width();
    let k = p.target();
    let scale = k.max_abs();
    (0..g.len())
        .filter(|&i| !g.is_boundary(i) && g.boundary_distance(i) >= band)
        .map(|i| (k_achieved.get(i) - k.get(i)).abs())
        .fold(0.0, f64::max)
        / scale
}

fn write_history(path: &Path, history: &[IterationRecord<f64>]) -> CliResult<()> {
    let io = |e| CliError::io(path, e);
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path).map_err(io)?));
    let csv_err = |e: csv::Error| CliError::Field {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    w.write_record(["iter", "S", "b_l2", "grad_norm", "step", "lap_sigma_l2"])
        .map_err(csv_err)?;
    for r in history {
        w.write_record([
            r.iter.to_string(),
            format!("{:.16e}", r.s),
            format!("{:.16e}", r.b_l2),
            format!("{:.16e}", r.grad_norm),
            format!("{:.16e}", r.step),
            format!("{:.16e}", r.lap_sigma_l2),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| CliError::io(path, e.into_error()))?
        .flush()
        .map_err(io)
}
