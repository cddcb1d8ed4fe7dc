//! Output writers: JSON manifests, CSV tables, and two-column .dat plot
//! files. Every file is written to a temporary sibling and renamed into
//! place, so readers never observe a half-written result.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::RmlError;

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, RmlError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, &path)?;
    Ok(path)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, RmlError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(dir, name, text.as_bytes())
}

/// Header row plus one record per entry.
pub fn write_csv(
    dir: &Path,
    name: &str,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<PathBuf, RmlError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => RmlError::Io(io),
        other => RmlError::Io(std::io::Error::other(format!("csv: {other:?}"))),
    };
    w.write_record(header).map_err(io_err)?;
    for row in rows {
        w.write_record(row).map_err(io_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| RmlError::Io(std::io::Error::other(format!("csv flush: {e}"))))?;
    write_atomic(dir, name, &bytes)
}

/// Space-separated x/y columns, one point per line.
pub fn write_dat(dir: &Path, name: &str, points: &[(f64, f64)]) -> Result<PathBuf, RmlError> {
    let mut text = String::new();
    for (x, y) in points {
        text.push_str(&format!("{x:e} {y:e}\n"));
    }
    write_atomic(dir, name, text.as_bytes())
}

/// Package stamp for manifests.
pub fn version_stamp() -> serde_json::Value {
    serde_json::json!({
        "package": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
    })
}
