mod bounds_check;
mod distill;
mod evaluate;
mod gen_dump;
mod train_teacher;

pub use bounds_check::bounds_check;
pub use distill::distill;
pub use evaluate::evaluate;
pub use gen_dump::gen_dump;
pub use train_teacher::train_teacher;

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::Config;
use crate::CliError;

/// Output directory: required, created eagerly so a bad path fails before
/// any long computation starts.
pub(crate) fn out_dir(cfg: &Config) -> Result<PathBuf, CliError> {
    let dir = PathBuf::from(cfg.require_str("out_dir")?);
    fs::create_dir_all(&dir)
        .map_err(|e| CliError::Config(format!("cannot create out_dir {}: {e}", dir.display())))?;
    Ok(dir)
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}
