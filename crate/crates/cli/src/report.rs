//! Deterministic artifact writers: pretty JSON with stable key order
//! (struct fields and BTreeMaps only) and newline-terminated CSV. Floats
//! go out in Rust's shortest round-trip form in both formats, so the CSV
//! and JSON views of a report carry identical numbers.

use std::path::Path;

use quantfolio_core::{Error, Result};

pub fn write_json<T: serde::Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidInput(format!("serialize {}: {e}", path.display())))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn write_csv(path: impl AsRef<Path>, rows: &[String]) -> Result<()> {
    let path = path.as_ref();
    let mut text = rows.join("\n");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}
