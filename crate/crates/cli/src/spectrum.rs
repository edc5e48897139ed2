use std::fs;
use std::path::{Path, PathBuf};

use prescurv::spectral::dirichlet_eigenpairs;
use serde::{Deserialize, Serialize};

use crate::config::{DomainSpec, MetricSpec, RunConfig};
use crate::error::{CliError, CliResult};
use crate::field_io::{write_field, write_json, write_meta, Meta};

pub const SPECTRUM_FILE: &str = "spectrum.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSummary {
    pub domain: DomainSpec,
    pub metric: MetricSpec,
    pub k: usize,
    /// Ascending.
    pub lambdas: Vec<f64>,
    pub residuals: Vec<f64>,
    pub sweeps: usize,
    pub artifacts: Vec<String>,
}

#[derive(Debug)]
pub struct SpectrumOutcome {
    pub summary: SpectrumSummary,
    pub dir: PathBuf,
}

/// Lowest `k` Dirichlet eigenpairs of `-Δ_h`; eigenfunctions go to
/// `phi_1.csv` ... `phi_k.csv`.
pub fn cmd_spectrum(config: &Path, k: usize, out: Option<&Path>) -> CliResult<SpectrumOutcome> {
    if k == 0 {
        return Err(CliError::Config("--k must be at least 1".into()));
    }
    let cfg = RunConfig::load(config)?;
    let grid = cfg.grid()?;
    let m = cfg.build_metric(&grid)?;
    let spec = dirichlet_eigenpairs(&m, k).map_err(|e| match e {
        prescurv::Error::InvalidParameter(msg) => CliError::Config(msg),
        other => CliError::Solve(other),
    })?;
    let dir = out.map_or_else(|| cfg.output.directory.clone(), Path::to_path_buf);
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;

    let mut artifacts = Vec::new();
    let mut names = Vec::new();
    for (i, pair) in spec.pairs.iter().enumerate() {
        let name = format!("phi_{}", i + 1);
        let file = format!("{name}.csv");
        write_field(&dir.join(&file), &pair.phi, &name)?;
        artifacts.push(file);
        names.push(name);
    }
    write_meta(
        &dir,
        &Meta {
            domain: cfg.domain,
            fields: names,
        },
    )?;
    artifacts.push(crate::field_io::META_FILE.into());
    artifacts.push(SPECTRUM_FILE.into());
    let summary = SpectrumSummary {
        domain: cfg.domain,
        metric: cfg.metric,
        k,
        lambdas: spec.lambdas(),
        residuals: spec.residuals.clone(),
        sweeps: spec.sweeps,
        artifacts,
    };
    write_json(&dir.join(SPECTRUM_FILE), &summary)?;
    Ok(SpectrumOutcome { summary, dir })
}
