use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Everything needed to repeat a run: the command line, the parsed
/// parameters and the files involved.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub command_line: Vec<String>,
    pub parameters: serde_json::Value,
    pub tool_version: String,
    pub timestamp: String,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seeds: Vec<u64>,
}

/// Collects output files for one run and writes each atomically.
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        write_atomic(&path, contents)?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Io(format!("cannot serialise {name}: {e}")))?;
        text.push('\n');
        self.write(name, &text)
    }

    /// Writes `manifest.json` listing the files written so far.
    pub fn finish<P: Serialize>(
        mut self,
        subcommand: &str,
        parameters: &P,
        inputs: Vec<PathBuf>,
        seeds: Vec<u64>,
    ) -> Result<(), CliError> {
        let manifest = RunManifest {
            subcommand: subcommand.to_string(),
            command_line: std::env::args().collect(),
            parameters: serde_json::to_value(parameters)
                .map_err(|e| CliError::Io(format!("cannot serialise parameters: {e}")))?,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            inputs,
            outputs: self.written.clone(),
            seeds,
        };
        self.write_json("manifest.json", &manifest)?;
        Ok(())
    }
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let fail = |e: std::io::Error| CliError::Io(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(contents.as_bytes()).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}
