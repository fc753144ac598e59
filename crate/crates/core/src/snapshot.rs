//! Latest-frame snapshot files, replaced atomically.
//!
//! A snapshot is written to `<path>.tmp.<unique>` in the same directory,
//! flushed, and renamed over `<path>`. Readers therefore see either the old
//! document or the new one, never a prefix.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
#[error("snapshot {path}: {source}")]
pub struct SnapshotError {
    pub path: PathBuf,
    #[source]
    pub source: io::Error,
}

fn err(path: &Path, source: io::Error) -> SnapshotError {
    SnapshotError {
        path: path.to_path_buf(),
        source,
    }
}

/// A fully written temp file that has not yet replaced the target.
#[derive(Debug)]
pub struct StagedSnapshot {
    target: PathBuf,
    temp: PathBuf,
}

impl StagedSnapshot {
    pub fn temp_path(&self) -> &Path {
        &self.temp
    }

    /// Renames the temp file over the target.
    pub fn commit(self) -> Result<(), SnapshotError> {
        fs::rename(&self.temp, &self.target).map_err(|e| {
            let _ = fs::remove_file(&self.temp);
            err(&self.target, e)
        })
    }
}

fn temp_prefix(path: &Path) -> Result<String, SnapshotError> {
    let name = path.file_name().ok_or_else(|| {
        err(
            path,
            io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"),
        )
    })?;
    Ok(format!("{}.tmp.", name.to_string_lossy()))
}

fn parent_dir(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

/// Writes and syncs the temp file without touching the target.
pub fn stage(path: &Path, contents: &[u8]) -> Result<StagedSnapshot, SnapshotError> {
    let mut tmp = tempfile::Builder::new()
        .prefix(&temp_prefix(path)?)
        .rand_bytes(8)
        .tempfile_in(parent_dir(path))
        .map_err(|e| err(path, e))?;
    tmp.write_all(contents).map_err(|e| err(path, e))?;
    tmp.as_file().sync_data().map_err(|e| err(path, e))?;
    let (_, temp) = tmp.keep().map_err(|e| err(path, e.error))?;
    Ok(StagedSnapshot {
        target: path.to_path_buf(),
        temp,
    })
}

/// Atomically replaces `path` with `contents`. On failure the previous
/// snapshot is left as it was.
pub fn snapshot_write(path: &Path, contents: &str) -> Result<(), SnapshotError> {
    stage(path, contents.as_bytes())?.commit()
}

/// Removes temp files left behind by an interrupted writer. Returns how many
/// were removed.
pub fn remove_stale_temps(path: &Path) -> Result<usize, SnapshotError> {
    let prefix = temp_prefix(path)?;
    let dir = parent_dir(path);
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(0),
        Err(e) => return Err(err(path, e)),
    };
    let mut removed = 0;
    for entry in entries.flatten() {
        if entry.file_name().to_string_lossy().starts_with(&prefix) {
            fs::remove_file(entry.path()).map_err(|e| err(path, e))?;
            removed += 1;
        }
    }
    Ok(removed)
}
