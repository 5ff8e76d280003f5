use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Creates the directory that will hold `path`, if any.
pub(crate) fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        _ => Ok(()),
    }
}
