//! CSV emission with a JSON sidecar per file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

pub const TOOL: &str = "kvlink";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Serialize)]
struct Sidecar<'a> {
    tool: &'static str,
    version: &'static str,
    file: &'a str,
    seed: Option<u64>,
    config: &'a ExperimentConfig,
}

/// Directory receiving every artifact of one run.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::output(root, e))?;
        let probe = root.join(".kvlink-write-probe");
        fs::write(&probe, b"").map_err(|e| CliError::output(root, e))?;
        let _ = fs::remove_file(&probe);
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    /// Writes `rows` as `<name>.csv` plus `<name>.csv.json`. Column order is
    /// the field order of `T`.
    pub fn write_csv<T: Serialize>(
        &mut self,
        name: &str,
        rows: &[T],
        config: &ExperimentConfig,
    ) -> CliResult<PathBuf> {
        let path = self.root.join(format!("{name}.csv"));
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)
            .map_err(|e| CliError::output(&path, e))?;
        for row in rows {
            w.serialize(row).map_err(|e| CliError::output(&path, e))?;
        }
        w.flush().map_err(|e| CliError::output(&path, e))?;
        self.sidecar(&path, config)?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Writes an empty-bodied CSV with explicit headers (used when there are
    /// no rows, so the header row still appears).
    pub fn write_header_only(
        &mut self,
        name: &str,
        headers: &[&str],
        config: &ExperimentConfig,
    ) -> CliResult<PathBuf> {
        let path = self.root.join(format!("{name}.csv"));
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)
            .map_err(|e| CliError::output(&path, e))?;
        w.write_record(headers)
            .map_err(|e| CliError::output(&path, e))?;
        w.flush().map_err(|e| CliError::output(&path, e))?;
        self.sidecar(&path, config)?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<PathBuf> {
        let path = self.root.join(format!("{name}.json"));
        let mut text =
            serde_json::to_string_pretty(value).map_err(|e| CliError::output(&path, e))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::output(&path, e))?;
        self.written.push(path.clone());
        Ok(path)
    }

    fn sidecar(&self, csv_path: &Path, config: &ExperimentConfig) -> CliResult<()> {
        let file = csv_path
            .file_name()
            .and_then(|f| f.to_str())
            .unwrap_or_default();
        let side = Sidecar {
            tool: TOOL,
            version: VERSION,
            file,
            seed: config.seed,
            config,
        };
        let path = PathBuf::from(format!("{}.json", csv_path.display()));
        let mut text =
            serde_json::to_string_pretty(&side).map_err(|e| CliError::output(&path, e))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::output(&path, e))
    }
}
