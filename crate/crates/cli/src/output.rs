use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tempfile::NamedTempFile;

use crate::CliError;

fn runtime(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut bytes =
        serde_json::to_vec_pretty(value).map_err(|e| CliError::Runtime(format!("json: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes every file to a temporary sibling first and renames them into
/// place only once all contents are on disk.
pub fn write_all(files: &[(PathBuf, Vec<u8>)]) -> Result<(), CliError> {
    let mut staged = Vec::with_capacity(files.len());
    for (path, bytes) in files {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = NamedTempFile::new_in(dir).map_err(|e| runtime(path, e))?;
        tmp.write_all(bytes).map_err(|e| runtime(path, e))?;
        tmp.flush().map_err(|e| runtime(path, e))?;
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            std::fs::set_permissions(tmp.path(), std::fs::Permissions::from_mode(0o644))
                .map_err(|e| runtime(path, e))?;
        }
        staged.push((tmp, path));
    }
    for (tmp, path) in staged {
        tmp.persist(path).map_err(|e| runtime(path, e.error))?;
    }
    Ok(())
}
