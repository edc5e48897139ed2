use std::fs;
use std::path::{Path, PathBuf};

use prescurv::metric::{curvature_orthogonal, log_factor_metric, OrthogonalMetric, SignConvention};
use prescurv::{ConformalMetric64, Field64};
use serde::{Deserialize, Serialize};

use crate::config::{DomainSpec, MetricSpec, RunConfig};
use crate::error::{CliError, CliResult};
use crate::field_io::{write_field, write_json, write_meta, Meta};

pub const CURVATURE_FILE: &str = "curvature.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvatureSummary {
    pub domain: DomainSpec,
    pub metric: MetricSpec,
    pub k0_min: f64,
    pub k0_max: f64,
    pub orthogonal: Option<OrthogonalSummary>,
    pub artifacts: Vec<String>,
}

/// Orthogonal-coordinates curvature against the conformal formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrthogonalSummary {
    /// Max interior `|K_standard - K0|`.
    pub standard_max_diff: f64,
    /// Max interior `|K_without_minus - K0|`.
    pub without_minus_max_diff: f64,
    pub sample: SignSample,
}

/// Both sign conventions at one interior node next to the conformal value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignSample {
    pub r: f64,
    pub conformal: f64,
    pub standard: f64,
    pub without_minus: f64,
    /// The formula without the leading minus disagrees in sign with the
    /// conformal value.
    pub discrepancy: bool,
    pub note: String,
}

#[derive(Debug)]
pub struct CurvatureOutcome {
    pub summary: CurvatureSummary,
    pub dir: PathBuf,
}

pub fn cmd_curvature(config: &Path, out: Option<&Path>) -> CliResult<CurvatureOutcome> {
    let cfg = RunConfig::load(config)?;
    let grid = cfg.grid()?;
    let m = cfg.build_metric(&grid)?;
    let dir = out.map_or_else(|| cfg.output.directory.clone(), Path::to_path_buf);
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;

    let k0 = m.curvature();
    let mut fields: Vec<(&str, Field64)> = vec![("K0", k0.clone())];
    let orthogonal = if grid.is_annulus() {
        let (standard, without) = orthogonal_pair(&m)?;
        let summary = OrthogonalSummary {
            standard_max_diff: interior_max_diff(&standard, k0),
            without_minus_max_diff: interior_max_diff(&without, k0),
            sample: sign_sample(&m, &standard, &without),
        };
        fields.push(("K_orth_standard", standard));
        fields.push(("K_orth_without_minus", without));
        Some(summary)
    } else {
        None
    };

    let mut artifacts = Vec::new();
    for (name, f) in &fields {
        let file = format!("{name}.csv");
        write_field(&dir.join(&file), f, name)?;
        artifacts.push(file);
    }
    write_meta(
        &dir,
        &Meta {
            domain: cfg.domain,
            fields: fields.iter().map(|(n, _)| n.to_string()).collect(),
        },
    )?;
    artifacts.push(crate::field_io::META_FILE.into());
    artifacts.push(CURVATURE_FILE.into());
    let summary = CurvatureSummary {
        domain: cfg.domain,
        metric: cfg.metric,
        k0_min: k0.min(),
        k0_max: k0.max(),
        orthogonal,
        artifacts,
    };
    write_json(&dir.join(CURVATURE_FILE), &summary)?;
    Ok(CurvatureOutcome { summary, dir })
}

fn orthogonal_pair(m: &ConformalMetric64) -> CliResult<(Field64, Field64)> {
    let om = OrthogonalMetric::from_conformal(m.factor()).map_err(|e| CliError::Config(e.to_string()))?;
    Ok((
        curvature_orthogonal(&om, SignConvention::Standard),
        curvature_orthogonal(&om, SignConvention::WithoutMinus),
    ))
}

fn interior_max_diff(a: &Field64, b: &Field64) -> f64 {
    let g = a.grid();
    (0..g.len())
        .filter(|&k| !g.is_boundary(k))
        .map(|k| (a.get(k) - b.get(k)).abs())
        .fold(0.0, f64::max)
}

/// Samples the interior node (at `θ = 0`) whose radius is closest to 1.
fn sign_sample(m: &ConformalMetric64, standard: &Field64, without: &Field64) -> SignSample {
    let g = m.grid();
    let radii = g.axis1();
    let i = (1..g.n1() - 1)
        .min_by(|&a, &b| (radii[a] - 1.0).abs().total_cmp(&(radii[b] - 1.0).abs()))
        .expect("annulus has interior rings");
    let conformal = m.curvature().at(i, 0);
    let without_minus = without.at(i, 0);
    let discrepancy = without_minus.signum() != conformal.signum();
    let note = if discrepancy {
        format!(
            "dropping the leading minus flips the sign: K = {without_minus:.6} against {conformal:.6} from -Δlog h/(2h)"
        )
    } else {
        "both formulas agree in sign at the sampled node".into()
    };
    SignSample {
        r: radii[i],
        conformal,
        standard: standard.at(i, 0),
        without_minus,
        discrepancy,
        note,
    }
}

/// Sign check on `h = log(4/r)` over `[0.5, 1.5]`, with a ring at `r = 1`.
pub fn log_factor_sign_note() -> CliResult<SignSample> {
    let g = prescurv::build_annulus(0.5, 1.5, 129, 64).map_err(|e| CliError::Config(e.to_string()))?;
    let m = log_factor_metric(&g).map_err(|e| CliError::Config(e.to_string()))?;
    let (standard, without) = orthogonal_pair(&m)?;
    Ok(sign_sample(&m, &standard, &without))
}
