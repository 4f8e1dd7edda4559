//! Atomic output files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Writes files under one directory, each via a temporary file and a rename.
/// Refuses to overwrite any of the run's input files.
pub struct Output {
    dir: PathBuf,
    protected: Vec<PathBuf>,
}

impl Output {
    pub fn new(dir: &Path, inputs: &[&Path]) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Input(format!("cannot create output directory {}: {e}", dir.display())))?;
        let protected = inputs.iter().filter_map(|p| fs::canonicalize(p).ok()).collect();
        Ok(Self {
            dir: dir.to_path_buf(),
            protected,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn bytes(&self, name: &str, data: &[u8]) -> Result<PathBuf, CliError> {
        let target = self.path(name);
        if let Ok(existing) = fs::canonicalize(&target) {
            if self.protected.contains(&existing) {
                return Err(CliError::Input(format!(
                    "refusing to overwrite input file {}",
                    target.display()
                )));
            }
        }
        let tmp = self.dir.join(format!(".{name}.{}.tmp", std::process::id()));
        let write = || -> std::io::Result<()> {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(data)?;
            f.sync_all()?;
            fs::rename(&tmp, &target)
        };
        write().map_err(|e| {
            let _ = fs::remove_file(&tmp);
            CliError::Internal(format!("cannot write {}: {e}", target.display()))
        })?;
        log::debug!("wrote {}", target.display());
        Ok(target)
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_vec_pretty(value)
            .map_err(|e| CliError::Internal(format!("cannot serialise {name}: {e}")))?;
        text.push(b'\n');
        self.bytes(name, &text)
    }

    /// CSV from a header and rows of already-formatted fields.
    pub fn csv(
        &self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> Result<PathBuf, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let internal = |e: csv::Error| CliError::Internal(format!("cannot format {name}: {e}"));
        w.write_record(header).map_err(internal)?;
        for row in rows {
            w.write_record(&row).map_err(internal)?;
        }
        let data = w
            .into_inner()
            .map_err(|e| CliError::Internal(format!("cannot format {name}: {e}")))?;
        self.bytes(name, &data)
    }
}
