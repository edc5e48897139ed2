//! Acceptance suite, run without the libtest harness so its output is never
//! captured. Every criterion runs even if an earlier one fails; one
//! PASS/FAIL line is printed per criterion and the process exits nonzero if
//! any is red.

use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::Arc;

use prescurv::estimates::b_terms_report;
use prescurv::mesh::{build_annulus, build_rectangle, inner_product, random_interior_field, smooth_interior_field};
use prescurv::metric::{
    curvature_orthogonal, cusp_factor, cusp_metric, flat_metric, log_factor_metric, poincare_metric, OrthogonalMetric,
    SignConvention,
};
use prescurv::problem::{
    blend_target, curvature_of, functional_s, gradient_s, manufactured_target, residual_noise_floor, InnerTarget,
};
use prescurv::solver::{
    extend_by_zero, gradient_descent_solve_with, newton_solve, newton_solve_with, quadratic_tail, standard_seeds,
    uniqueness_check, CgConfig, Method, SolverConfig,
};
use prescurv::spectral::{dirichlet_eigenpairs, green_apply, green_bound_check};
use prescurv::{CurvatureProblem64, Field64, Grid64};
use prescurv_cli::field_io::{read_field, write_field};
use prescurv_cli::report::RunReport;
use prescurv_cli::verify::VerifyReport;

const R_IN: f64 = 0.05;
const R_OUT: f64 = 0.5;

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn cusp_grid(n_r: usize, n_theta: usize) -> Arc<Grid64> {
    build_annulus(R_IN, R_OUT, n_r, n_theta).unwrap()
}

fn scale2(n_r: usize, n_theta: usize, collar_frac: f64) -> CurvatureProblem64 {
    let g = cusp_grid(n_r, n_theta);
    let m = cusp_metric(&g).unwrap();
    let w = collar_frac * (R_OUT - R_IN);
    let k = blend_target(&m, &InnerTarget::Scale(2.0), w).unwrap();
    CurvatureProblem64::new(m, k, w).unwrap()
}

fn max_interior(f: &Field64, g: impl Fn(f64) -> f64) -> f64 {
    let grid = f.grid();
    (0..grid.len())
        .filter(|&k| !grid.is_boundary(k))
        .map(|k| g(f.get(k)))
        .fold(0.0, f64::max)
}

fn criterion_1() -> Verdict {
    let err = |n_r, n_t, poincare: bool| {
        let g = cusp_grid(n_r, n_t);
        let m = if poincare { poincare_metric(&g) } else { cusp_metric(&g) }.unwrap();
        max_interior(m.curvature(), |k| (k + 1.0).abs())
    };
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, p) in [("cusp", false), ("poincare", true)] {
        let (a, b) = (err(128, 256, p), err(255, 512, p));
        ok &= a <= 1e-3 && a / b >= 3.5;
        detail.push(format!("{name}: err {a:.3e}, ratio {:.2}", a / b));
    }
    check(ok, detail.join("; "))
}

fn criterion_2(verify: Option<&VerifyReport>) -> Verdict {
    let g = build_annulus(0.5, 1.5, 129, 64).unwrap();
    let m = log_factor_metric(&g).unwrap();
    let exact = 1.0 / (2.0 * 4f64.ln().powi(3));
    let i = 64;
    let conformal = m.curvature().at(i, 0);
    let om = OrthogonalMetric::from_conformal(m.factor()).unwrap();
    let printed = curvature_orthogonal(&om, SignConvention::WithoutMinus).at(i, 0);
    let standard = curvature_orthogonal(&om, SignConvention::Standard).at(i, 0);
    let recorded = verify.is_some_and(|v| v.sign_note.discrepancy && (v.sign_note.r - 1.0).abs() < 1e-12);
    check(
        (conformal - exact).abs() <= 1e-3
            && (printed + exact).abs() <= 1e-3
            && (standard - exact).abs() <= 1e-3
            && recorded,
        format!(
            "r = {}, conformal {conformal:.6}, without minus {printed:.6}, standard {standard:.6}, exact {exact:.6}, verify records discrepancy: {recorded}",
            g.axis1()[i]
        ),
    )
}

fn criterion_3() -> Verdict {
    let g = cusp_grid(128, 256);
    let m = cusp_metric(&g).unwrap();
    // amplitude -0.3: +0.3 would make the target curvature positive
    let star = Field64::from_fn(&g, |r, _| -0.3 * (PI * (r - R_IN) / (R_OUT - R_IN)).sin()).interior_only();
    let k = manufactured_target(&m, &star).unwrap();
    let p = CurvatureProblem64::new(m, k, 0.0).unwrap();
    let res = newton_solve(&p, &Field64::zeros(&g), &SolverConfig::default()).unwrap();
    let err = res.sigma.max_abs_diff(&star);
    let s = res.final_record().s;
    let floor = residual_noise_floor(&res.sigma, &p).unwrap();
    let tail = quadratic_tail(&res.history, 3, floor);
    check(
        res.converged && err <= 1e-8 && s <= 1e-20 && res.iterations() <= 10 && tail.bounded_by(1.0),
        format!(
            "{} steps, |σ - σ*| = {err:.2e}, S = {s:.2e}, b_(k+1)/b_k² <= {:.3e} over {} transitions above the noise floor",
            res.iterations(),
            tail.fitted_c,
            tail.tested.iter().filter(|&&t| t).count()
        ),
    )
}

/// Newton at 128×256 and both methods at 33×64; collects every iterate for criterion 8.
struct Attainment {
    verdict: Verdict,
    iterates: Vec<(CurvatureProblem64, Vec<Field64>)>,
}

fn criterion_4() -> Attainment {
    let p = scale2(128, 256, 0.1);
    let mut fine = Vec::new();
    let cfg = SolverConfig {
        tol_b: 1e-10,
        ..SolverConfig::default()
    };
    let res = newton_solve_with(&p, &Field64::zeros(p.grid()), &cfg, |_, s| fine.push(s.clone())).unwrap();
    let k_ach = curvature_of(&res.sigma, p.metric()).unwrap();
    let core_err = prescurv_cli::solve::core_curvature_error(&p, &k_ach);

    let pc = scale2(33, 64, 0.1);
    let newton_c = newton_solve(&pc, &Field64::zeros(pc.grid()), &SolverConfig { tol_b: 1e-12, ..cfg }).unwrap();
    let gcfg = SolverConfig {
        method: Method::Gradient,
        tol_b: 1e-8,
        max_iter: 200_000,
        ..SolverConfig::default()
    };
    let mut coarse = Vec::new();
    let gd =
        gradient_descent_solve_with(&pc, &Field64::zeros(pc.grid()), &gcfg, |_, s| coarse.push(s.clone())).unwrap();
    let gap = gd.sigma.max_abs_diff(&newton_c.sigma);
    let b = res.final_record().b_l2;
    Attainment {
        verdict: check(
            res.converged && b <= 1e-10 && core_err <= 1e-8 && gd.converged && gap <= 1e-6,
            format!(
                "Newton b_l2 {b:.2e} in {} steps, core |K - K_target|/max|K| {core_err:.2e}; gradient descent at 33x64 in {} steps, distance to Newton {gap:.2e}",
                res.iterations(),
                gd.iterations()
            ),
        ),
        iterates: vec![(p, fine), (pc, coarse)],
    }
}

fn criterion_5() -> Verdict {
    let p = scale2(128, 256, 0.1);
    let u = uniqueness_check(&p, &standard_seeds(), &SolverConfig::default()).unwrap();
    check(
        u.solutions.len() == 4 && u.max_distance <= 1e-8,
        format!("max pairwise distance {:.2e}", u.max_distance),
    )
}

fn criterion_6() -> Verdict {
    let p = scale2(65, 64, 0.1);
    let w = p.metric().area_weights();
    let t = 1e-5;
    let mut worst: f64 = 0.0;
    for seed in 0..10u64 {
        let sigma = random_interior_field(p.grid(), 0.3, 2 * seed);
        let beta = random_interior_field(p.grid(), 1.0, 2 * seed + 1);
        let analytic = inner_product(&gradient_s(&sigma, &p).unwrap(), &beta, w).unwrap();
        let numeric = (functional_s(&sigma.axpy(t, &beta), &p).unwrap()
            - functional_s(&sigma.axpy(-t, &beta), &p).unwrap())
            / (2.0 * t);
        worst = worst.max((analytic - numeric).abs() / analytic.abs());
    }
    check(worst <= 1e-6, format!("max relative error {worst:.2e}"))
}

fn criterion_7() -> Verdict {
    let m = flat_metric(&build_rectangle(1.0, 1.0, 129, 129).unwrap());
    let spec = dirichlet_eigenpairs(&m, 1).unwrap();
    let pair = &spec.pairs[0];
    let exact = 2.0 * PI * PI;
    let rel = (pair.lambda - exact).abs() / exact;
    let cg = CgConfig::default();
    let g = green_apply(&m, &pair.phi, &cg).unwrap();
    let want = pair.phi.scale(1.0 / pair.lambda);
    let green_err = g.max_abs_diff(&want) / want.max_abs();
    let bound = green_bound_check(&m, 20, pair.lambda, 7, &cg).unwrap();
    check(
        rel <= 5e-3 && green_err <= 1e-6 && bound.all_ok() && bound.trials.len() == 20,
        format!(
            "λ₁ = {:.5} (rel {rel:.2e}), Gφ₁ error {green_err:.2e}, max ‖Gτ‖/‖τ‖ {:.4e} vs c {:.4e}",
            pair.lambda,
            bound.max_ratio(),
            bound.c2
        ),
    )
}

fn criterion_8(iterates: &[(CurvatureProblem64, Vec<Field64>)]) -> Verdict {
    let mut n = 0;
    let mut bad = Vec::new();
    let mut worst_gap: f64 = 0.0;
    for (p, sigmas) in iterates {
        for (i, s) in sigmas.iter().enumerate() {
            let r = b_terms_report(s, p).unwrap();
            worst_gap = worst_gap.max(r.partition_identity_gap);
            if !r.all_ok() {
                bad.push(format!("{}x{} iterate {i}", p.grid().n1(), p.grid().n2()));
            }
            n += 1;
        }
    }
    check(
        n > 0 && bad.is_empty(),
        format!("{n} iterates, worst partition gap {worst_gap:.2e}, violations {bad:?}"),
    )
}

fn criterion_9() -> Verdict {
    let mut derivs = Vec::new();
    let mut jumps = Vec::new();
    for frac in [0.1, 0.2, 0.4] {
        let p = scale2(128, 256, frac);
        let res = newton_solve(&p, &Field64::zeros(p.grid()), &SolverConfig::default()).unwrap();
        derivs.push(res.boundary.max_normal_derivative);
        let ext = extend_by_zero(&res, &p, 0.025, cusp_factor).unwrap();
        jumps.push(ext.seam.sigma_jump);
    }
    let decreasing = derivs.windows(2).all(|w| w[1] < w[0]);
    check(
        decreasing && jumps.iter().all(|&j| j == 0.0),
        format!("max|∂νσ| {derivs:?}, σ jumps {jumps:?}"),
    )
}

struct CliRun {
    verdict: Verdict,
    verify: Option<VerifyReport>,
}

fn run_bin(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_prescurv"))
        .args(args)
        .env("PRESCURV_THREADS", "1")
        .output()
        .expect("binary runs");
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap_or(-1), text)
}

fn criterion_10(tmp: &Path) -> CliRun {
    let config = tmp.join("run.json");
    fs::write(
        &config,
        r#"{
  "domain": {"kind": "annulus", "r_in": 0.05, "r_out": 0.5, "n_r": 65, "n_theta": 64},
  "metric": {"kind": "cusp"},
  "target": {"kind": "scale", "value": 2.0, "collar_width": 0.045},
  "output": {"estimate_every": 1, "seed": 3}
}"#,
    )
    .unwrap();
    let dirs = [tmp.join("a"), tmp.join("b")];
    let mut codes = Vec::new();
    for d in &dirs {
        codes.push(
            run_bin(&[
                "solve",
                "--config",
                config.to_str().unwrap(),
                "--out",
                d.to_str().unwrap(),
            ])
            .0,
        );
    }
    let load =
        |d: &Path| -> RunReport { serde_json::from_str(&fs::read_to_string(d.join("report.json")).unwrap()).unwrap() };
    let (ra, rb) = (load(&dirs[0]), load(&dirs[1]));
    let deterministic = ra.numerics() == rb.numerics();

    let g = cusp_grid(33, 16);
    let f = smooth_interior_field(&g, 1.0, 5).axpy(1e-3, &random_interior_field(&g, 1.0, 6));
    let path = tmp.join("field.csv");
    write_field(&path, &f, "f").unwrap();
    let (back, _) = read_field(&path).unwrap();
    let round_trip = back
        .values()
        .iter()
        .zip(f.values())
        .all(|(a, b)| a.to_bits() == b.to_bits());

    let (fresh, _) = run_bin(&["verify", dirs[0].to_str().unwrap()]);
    let verify: Option<VerifyReport> = fs::read_to_string(dirs[0].join("verify.json"))
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok());

    let sigma_path = dirs[1].join("sigma.csv");
    let (mut sigma, _) = read_field(&sigma_path).unwrap();
    let k = sigma.grid().idx(30, 7);
    sigma = sigma.with_value(k, sigma.get(k) + 1e-3);
    write_field(&sigma_path, &sigma, "sigma").unwrap();
    let (tampered, text) = run_bin(&["verify", dirs[1].to_str().unwrap()]);
    let named = text.contains("FAIL");

    CliRun {
        verdict: check(
            codes == [0, 0] && deterministic && round_trip && fresh == 0 && tampered != 0 && named,
            format!(
                "solve exits {codes:?}, reports identical: {deterministic}, CSV bit-exact: {round_trip}, verify fresh {fresh}, tampered {tampered}"
            ),
        ),
        verify,
    }
}

fn guarded(f: impl FnOnce() -> Verdict) -> Verdict {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    })
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let mut results: Vec<(u8, &str, Verdict)> = Vec::new();

    results.push((1, "curvature oracle", guarded(criterion_1)));

    let cli = catch_unwind(AssertUnwindSafe(|| criterion_10(tmp.path()))).unwrap_or_else(|_| CliRun {
        verdict: Err("panicked".into()),
        verify: None,
    });
    results.push((2, "sign convention", guarded(|| criterion_2(cli.verify.as_ref()))));
    results.push((3, "manufactured recovery", guarded(criterion_3)));

    let attain = catch_unwind(AssertUnwindSafe(criterion_4)).unwrap_or_else(|_| Attainment {
        verdict: Err("panicked".into()),
        iterates: Vec::new(),
    });
    results.push((4, "attainment", attain.verdict));
    results.push((5, "uniqueness", guarded(criterion_5)));
    results.push((6, "first variation", guarded(criterion_6)));
    results.push((7, "spectral oracle", guarded(criterion_7)));
    results.push((8, "estimate certification", guarded(|| criterion_8(&attain.iterates))));
    results.push((9, "boundary trend", guarded(criterion_9)));
    results.push((10, "determinism and round trip", cli.verdict));

    results.sort_by_key(|r| r.0);
    let mut failed = Vec::new();
    for (n, name, v) in &results {
        match v {
            Ok(d) => println!("criterion {n:>2} PASS {name}: {d}"),
            Err(d) => {
                println!("criterion {n:>2} FAIL {name}: {d}");
                failed.push(*n);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failing criteria: {failed:?}");
        std::process::exit(1);
    }
}
