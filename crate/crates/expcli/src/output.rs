//! CSV serialization of result rows.
//!
//! Floats are written with 17 significant digits so they parse back to the
//! same value. The file opens with comment lines recording the config hash,
//! seed and creation time; everything below them is a function of the
//! config alone (unless per-row timing is recorded).

use std::io::{self, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::experiment::ResultRow;

pub const COLUMNS: [&str; 19] = [
    "point",
    "lambda_p",
    "sigma",
    "n_bar",
    "p",
    "alpha",
    "gamma_d",
    "theta_db",
    "c_m",
    "beta",
    "n_files",
    "cache_size",
    "delivery",
    "caching",
    "evaluator",
    "item",
    "value",
    "stderr",
    "wall_time_ms",
];

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let digest = Sha256::digest(cfg.to_canonical_json().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Header and data lines, without the comment lines.
pub fn render_body(rows: &[ResultRow]) -> io::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COLUMNS)?;
    for r in rows {
        w.write_record([
            r.point.to_string(),
            format_float(r.lambda_p),
            format_float(r.sigma),
            format_float(r.n_bar),
            format_float(r.p),
            format_float(r.alpha),
            format_float(r.gamma_d),
            format_float(r.theta_db),
            format_float(r.c_m),
            opt(r.beta),
            r.n_files.to_string(),
            r.cache_size.to_string(),
            r.delivery.clone(),
            r.caching.clone(),
            r.evaluator.clone(),
            r.item.clone(),
            format_float(r.value),
            opt(r.stderr),
            opt(r.wall_time_ms),
        ])?;
    }
    w.into_inner().map_err(|e| e.into_error())
}

pub fn render(cfg: &ExperimentConfig, recipe: Option<&str>, rows: &[ResultRow]) -> io::Result<Vec<u8>> {
    let mut out = Vec::new();
    writeln!(
        out,
        "# d2dcomp {} config_sha256={} seed={} recipe={}",
        env!("CARGO_PKG_VERSION"),
        config_hash(cfg),
        cfg.seed,
        recipe.unwrap_or("-")
    )?;
    let created = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    writeln!(out, "# created_unix={created}")?;
    out.extend(render_body(rows)?);
    Ok(out)
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Strips the leading comment lines.
pub fn body_of(bytes: &[u8]) -> &[u8] {
    let mut rest = bytes;
    while rest.first() == Some(&b'#') {
        match rest.iter().position(|&b| b == b'\n') {
            Some(i) => rest = &rest[i + 1..],
            None => return &[],
        }
    }
    rest
}
