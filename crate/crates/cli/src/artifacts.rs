//! Run artifacts: CSV series and the JSON manifest.
//!
//! Every command writes into one output directory.  Numbers are formatted
//! with Rust's shortest-round-trip `f64` display, so reruns with the same
//! configuration and seed produce byte-identical CSV files; the manifest
//! additionally records wall time and is therefore not byte-stable.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::Result;

/// Handle on the run's output directory.
pub struct Artifacts {
    dir: PathBuf,
}

impl Artifacts {
    /// Create (if needed) and wrap the output directory.
    pub fn new(dir: &Path) -> Result<Artifacts> {
        fs::create_dir_all(dir)?;
        Ok(Artifacts { dir: dir.to_path_buf() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Open a CSV file and write its header line.
    pub fn csv(&self, name: &str, columns: &[&str]) -> Result<CsvWriter> {
        let mut w = BufWriter::new(File::create(self.path(name))?);
        writeln!(w, "{}", columns.join(","))?;
        Ok(CsvWriter { w, columns: columns.len() })
    }

    /// Serialize the manifest as pretty-printed JSON.
    pub fn manifest(&self, manifest: &Manifest) -> Result<()> {
        let mut w = BufWriter::new(File::create(self.path("manifest.json"))?);
        serde_json::to_writer_pretty(&mut w, manifest)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }
}

/// Line-by-line CSV writer with a fixed column count.
pub struct CsvWriter {
    w: BufWriter<File>,
    columns: usize,
}

impl CsvWriter {
    /// Write one row; the cell count must match the header.
    pub fn row(&mut self, cells: &[String]) -> Result<()> {
        assert_eq!(cells.len(), self.columns, "CSV row width");
        writeln!(self.w, "{}", cells.join(","))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}

/// Shortest-round-trip decimal form of a float (deterministic).
pub fn num(v: f64) -> String {
    format!("{v}")
}

/// An absent cell (e.g. residuals at series endpoints).
pub fn blank() -> String {
    String::new()
}

/// Machine-readable record of what a run did.
#[derive(Debug, Serialize)]
pub struct Manifest {
    /// Subcommand name.
    pub command: String,
    /// Crate version baked in at compile time.
    pub version: String,
    /// Effective random seed (config value or `--seed` override).
    pub seed: u64,
    /// Path of the configuration file as given on the command line.
    pub config_path: String,
    /// Every configuration key the run consulted, with its effective value
    /// (defaults included), so the run can be reproduced from the manifest
    /// alone.
    pub settings: BTreeMap<String, String>,
    /// Keys present in the config file that nothing read; typically typos.
    pub ignored_keys: Vec<String>,
    /// Command-specific summary (norms, trigger info, convergence flags...).
    pub outcome: serde_json::Value,
    /// Wall-clock duration of the command in seconds.
    pub wall_seconds: f64,
}
