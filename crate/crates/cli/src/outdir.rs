//! Output directories guarded by an `.incomplete` marker until every file
//! has been written.

use std::fs;
use std::path::{Path, PathBuf};

use ggdpotts::grid::{write_labels, write_matrix, write_text, ImageGrid, LabelField};

use crate::error::CliError;

pub const INCOMPLETE: &str = ".incomplete";
pub const MANIFEST: &str = "manifest.txt";

pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    /// Creates `root` if needed and drops the marker before anything else.
    pub fn create(root: &Path, command: &str) -> Result<Self, CliError> {
        fs::create_dir_all(root)
            .map_err(|e| CliError::io(format!("cannot create {}: {e}", root.display())))?;
        let dir = Self {
            root: root.to_path_buf(),
        };
        write_text(dir.path(INCOMPLETE), &format!("{command}\n"))?;
        Ok(dir)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn matrix(&self, name: &str, grid: &ImageGrid) -> Result<(), CliError> {
        Ok(write_matrix(self.path(name), grid)?)
    }

    pub fn labels(&self, name: &str, labels: &LabelField) -> Result<(), CliError> {
        Ok(write_labels(self.path(name), labels)?)
    }

    pub fn text(&self, name: &str, text: &str) -> Result<(), CliError> {
        Ok(write_text(self.path(name), text)?)
    }

    /// Removes the marker; outputs are complete from here on.
    pub fn finish(self) -> Result<(), CliError> {
        fs::remove_file(self.path(INCOMPLETE)).map_err(|e| {
            CliError::io(format!(
                "cannot remove marker in {}: {e}",
                self.root.display()
            ))
        })
    }
}
