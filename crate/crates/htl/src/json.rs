//! JSON documents carrying a format name and version.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub(crate) fn write<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(Error::io(path))
}

/// Reads `path`, checking its `format` and `version` fields first so a wrong
/// file gets a clear message rather than a missing-field error.
pub(crate) fn read<T: DeserializeOwned>(path: &Path, format: &str, version: u32) -> Result<T> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let found = value.get("format").and_then(|f| f.as_str());
    if found != Some(format) {
        return Err(Error::format(path, 1, format!("expected a {format} document, found {found:?}")));
    }
    let v = value.get("version").and_then(|v| v.as_u64());
    if v != Some(u64::from(version)) {
        return Err(Error::format(path, 1, format!("unsupported {format} version {v:?}, expected {version}")));
    }
    serde_json::from_value(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}
