//! CSV, text and manifest writers.

use std::fs;
use std::path::{Path, PathBuf};

use crate::CliError;
use crate::config::{Manifest, RunConfig};

/// Shortest representation that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub struct Table {
    path: PathBuf,
    writer: csv::Writer<fs::File>,
}

impl Table {
    pub fn create(dir: &Path, name: &str, header: &[String]) -> Result<Self, CliError> {
        let path = dir.join(name);
        let mut writer = csv::Writer::from_path(&path).map_err(|e| io(&path, e))?;
        writer.write_record(header).map_err(|e| io(&path, e))?;
        Ok(Self { path, writer })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(|e| io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        self.writer.flush().map_err(|e| io(&self.path, e))?;
        Ok(self.path)
    }
}

pub fn header(fixed: &[&str], vectors: &[(&str, usize)], tail: &[&str]) -> Vec<String> {
    let mut h: Vec<String> = fixed.iter().map(|s| s.to_string()).collect();
    for &(name, n) in vectors {
        if n == 1 {
            h.push(name.to_string());
        } else {
            h.extend((1..=n).map(|k| format!("{name}{k}")));
        }
    }
    h.extend(tail.iter().map(|s| s.to_string()));
    h
}

pub fn text(dir: &Path, name: &str, body: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| io(&path, e))?;
    Ok(path)
}

pub fn manifest(dir: &Path, command: &str, config: &RunConfig) -> Result<PathBuf, CliError> {
    let m = Manifest {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
    };
    let body = serde_json::to_string_pretty(&m).map_err(|e| CliError::Other(e.to_string()))?;
    text(dir, "manifest.json", &(body + "\n"))
}

fn io(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Other(format!("{}: {e}", path.display()))
}
