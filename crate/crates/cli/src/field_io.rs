//! Field files: one header line
//! `# kind=<annulus|rectangle> <domain params> field=<name>` followed by rows
//! `i,j,coord1,coord2,value` with 17 significant digits, so a write and a
//! read reproduce every bit. A `meta.json` sidecar carries the grid.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use prescurv::{Field64, Grid64};
use serde::{Deserialize, Serialize};

use crate::config::DomainSpec;
use crate::error::{CliError, CliResult};

/// Sidecar describing every field file in an output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub domain: DomainSpec,
    pub fields: Vec<String>,
}

pub const META_FILE: &str = "meta.json";

pub fn header(domain: &DomainSpec, name: &str) -> String {
    match *domain {
        DomainSpec::Annulus {
            r_in,
            r_out,
            n_r,
            n_theta,
        } => {
            format!("# kind=annulus r_in={r_in:e} r_out={r_out:e} n_r={n_r} n_theta={n_theta} field={name}")
        }
        DomainSpec::Rectangle { lx, ly, nx, ny } => {
            format!("# kind=rectangle lx={lx:e} ly={ly:e} nx={nx} ny={ny} field={name}")
        }
    }
}

fn parse_header(line: &str) -> Result<(DomainSpec, String), String> {
    let body = line.strip_prefix("# ").ok_or("header must start with `# `")?;
    let mut kind = None;
    let mut name = None;
    let mut params = std::collections::BTreeMap::new();
    for tok in body.split_whitespace() {
        let (k, v) = tok.split_once('=').ok_or_else(|| format!("bad header token `{tok}`"))?;
        match k {
            "kind" => kind = Some(v.to_string()),
            "field" => name = Some(v.to_string()),
            _ => {
                params.insert(k.to_string(), v.to_string());
            }
        }
    }
    let mut take = |k: &str| params.remove(k).ok_or_else(|| format!("header lacks `{k}`"));
    let real = |s: String| s.parse::<f64>().map_err(|e| format!("{s}: {e}"));
    let count = |s: String| s.parse::<usize>().map_err(|e| format!("{s}: {e}"));
    let domain = match kind.as_deref() {
        Some("annulus") => DomainSpec::Annulus {
            r_in: real(take("r_in")?)?,
            r_out: real(take("r_out")?)?,
            n_r: count(take("n_r")?)?,
            n_theta: count(take("n_theta")?)?,
        },
        Some("rectangle") => DomainSpec::Rectangle {
            lx: real(take("lx")?)?,
            ly: real(take("ly")?)?,
            nx: count(take("nx")?)?,
            ny: count(take("ny")?)?,
        },
        other => return Err(format!("unknown grid kind {other:?}")),
    };
    if let Some(k) = params.keys().next() {
        return Err(format!("unexpected header key `{k}`"));
    }
    Ok((domain, name.ok_or("header lacks `field`")?))
}

pub fn write_field(path: &Path, field: &Field64, name: &str) -> CliResult<()> {
    let grid = field.grid();
    let io = |e| CliError::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(out, "{}", header(&DomainSpec::of(grid), name)).map_err(io)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for k in 0..grid.len() {
        let node = grid.node(k);
        let (c1, c2) = grid.coords(k);
        w.write_record([
            node.i.to_string(),
            node.j.to_string(),
            format!("{c1:.16e}"),
            format!("{c2:.16e}"),
            format!("{:.16e}", field.get(k)),
        ])
        .map_err(|e| field_err(path, e.to_string()))?;
    }
    w.flush().map_err(io)
}

/// Reads a field file, building its grid from the header.
pub fn read_field(path: &Path) -> CliResult<(Field64, String)> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| CliError::io(path, e))?;
    let (domain, name) = parse_header(first.trim_end()).map_err(|r| field_err(path, r))?;
    let grid = domain.build().map_err(|e| field_err(path, e.to_string()))?;
    let mut rows = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
    let mut values = Vec::with_capacity(grid.len());
    for (k, rec) in rows.records().enumerate() {
        let rec = rec.map_err(|e| field_err(path, e.to_string()))?;
        if rec.len() != 5 {
            return Err(field_err(path, format!("row {k} has {} columns", rec.len())));
        }
        if k >= grid.len() {
            return Err(field_err(path, format!("more rows than the {} grid nodes", grid.len())));
        }
        let node = grid.node(k);
        if rec[0] != node.i.to_string() || rec[1] != node.j.to_string() {
            return Err(field_err(path, format!("row {k} is not node {node}")));
        }
        let v: f64 = rec[4].parse().map_err(|e| field_err(path, format!("row {k}: {e}")))?;
        if !v.is_finite() {
            return Err(field_err(path, format!("non-finite value at node {node}")));
        }
        values.push(v);
    }
    if values.len() != grid.len() {
        return Err(field_err(
            path,
            format!("{} rows for {} grid nodes", values.len(), grid.len()),
        ));
    }
    let field = Field64::new(grid, values).map_err(|e| field_err(path, e.to_string()))?;
    Ok((field, name))
}

/// Reads a field and requires it to live on `grid`; the result shares `grid`.
pub fn read_field_on(path: &Path, grid: &Arc<Grid64>) -> CliResult<Field64> {
    let (f, _) = read_field(path)?;
    if DomainSpec::of(f.grid()) != DomainSpec::of(grid) {
        return Err(field_err(path, "grid differs from the configured domain".into()));
    }
    Field64::new(grid.clone(), f.into_values()).map_err(|e| field_err(path, e.to_string()))
}

/// Reads `<dir>/<name>.csv` and checks it against the directory's `meta.json`.
pub fn read_field_in(dir: &Path, name: &str) -> CliResult<Field64> {
    let meta = read_meta(dir)?;
    let path = dir.join(format!("{name}.csv"));
    let (f, stored) = read_field(&path)?;
    if DomainSpec::of(f.grid()) != meta.domain {
        return Err(field_err(&path, format!("grid differs from {META_FILE}")));
    }
    if stored != name {
        return Err(field_err(&path, format!("holds field `{stored}`, expected `{name}`")));
    }
    Ok(f)
}

pub fn write_meta(dir: &Path, meta: &Meta) -> CliResult<()> {
    write_json(&dir.join(META_FILE), meta)
}

pub fn read_meta(dir: &Path) -> CliResult<Meta> {
    read_json(&dir.join(META_FILE))
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

pub fn read_json<D: serde::de::DeserializeOwned>(path: &Path) -> CliResult<D> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn field_err(path: &Path, reason: String) -> CliError {
    CliError::Field {
        path: path.to_path_buf(),
        reason,
    }
}
