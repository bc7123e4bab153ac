//! CSV and JSON artifacts.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::{Error, Result};

/// Fixed float formatting: 12 significant digits in scientific notation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.11e}")
}

/// CSV file written row by row, flushed after every batch.
pub struct CsvSink {
    path: PathBuf,
    writer: csv::Writer<File>,
    rows: usize,
}

impl CsvSink {
    pub fn create(path: impl AsRef<Path>, header: &[&str]) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file);
        writer.write_record(header)?;
        Ok(CsvSink { path, writer, rows: 0 })
    }

    pub fn write_row<I, S>(&mut self, row: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(row)?;
        self.rows += 1;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.writer.flush().map_err(|e| Error::io(&self.path, e))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl Drop for CsvSink {
    fn drop(&mut self) {
        let _ = self.writer.flush();
    }
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Written next to the outputs of every run.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub status: String,
    pub wall_time_s: f64,
    pub workers: usize,
    pub rtol: f64,
    pub atol: f64,
    pub resolved_config: String,
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
}

/// Machine-readable failure description (`error.json`).
#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub command: String,
    pub kind: String,
    pub message: String,
    /// Rows already written before the failure, per output file.
    pub partial_outputs: Vec<(String, usize)>,
}

impl ErrorReport {
    pub fn new(command: &str, err: &Error, partial_outputs: Vec<(String, usize)>) -> Self {
        ErrorReport { command: command.into(), kind: err.kind().into(), message: err.to_string(), partial_outputs }
    }
}
