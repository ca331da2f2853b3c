//! Reading inputs and writing outputs atomically.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use geoscale::io::{from_json, to_json, trajectory_from_csv, trajectory_to_csv};
use geoscale::FeatureTrajectory;

use crate::error::CliError;

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, &e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    from_json(&read_text(path)?).map_err(|e| CliError::from(e).with("path", path.display().to_string()))
}

pub fn read_trajectory(path: &Path) -> Result<FeatureTrajectory, CliError> {
    let text = read_text(path)?;
    trajectory_from_csv(text.as_bytes()).map_err(|e| CliError::from(e).with("path", path.display().to_string()))
}

/// Writes through a temporary file in the target directory, then renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, &e))?;
    tmp.write_all(contents).map_err(|e| CliError::io(path, &e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, &e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, &e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    write_atomic(path, to_json(value)?.as_bytes())
}

pub fn write_trajectory(path: &Path, traj: &FeatureTrajectory, prefix: &str) -> Result<(), CliError> {
    write_atomic(path, trajectory_to_csv(traj, prefix).as_bytes())
}

/// `dir/stem.csv` with `suffix = ".pca.json"` gives `dir/stem.pca.json`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

/// Refuses to overwrite any of the command's inputs.
pub fn check_distinct(out: &Path, inputs: &[&Path]) -> Result<(), CliError> {
    let Ok(out_real) = out.canonicalize() else {
        return Ok(());
    };
    for input in inputs {
        if input.canonicalize().is_ok_and(|p| p == out_real) {
            return Err(CliError::validation("output path is one of the inputs")
                .with("path", out.display().to_string()));
        }
    }
    Ok(())
}
