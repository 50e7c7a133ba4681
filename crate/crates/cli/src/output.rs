use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

pub use motionlab_core::cycles::csv_float;

/// Writes `contents` to `dir/name` through a temporary file.
pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, &path)?;
    Ok(path)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Core(e.into()))?;
    text.push('\n');
    write_file(dir, name, &text)
}

/// Reads an artifact a command depends on.
pub fn read_artifact(dir: &Path, name: &str) -> Result<String, CliError> {
    let path = dir.join(name);
    fs::read_to_string(&path).map_err(|e| CliError::MissingArtifact(format!("{}: {e}", path.display())))
}

/// `csv_float`, or an empty field for `None`.
pub fn csv_opt(v: Option<f64>) -> String {
    v.map(csv_float).unwrap_or_default()
}
