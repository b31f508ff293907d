//! CSV and JSON artifacts with reproducible headers.
//!
//! Every CSV starts with two comment lines:
//!
//! ```text
//! # casimir-response 0.1.0 | scenario=<hash> | <key=value ...>
//! # units: col1[unit], col2[unit], ...
//! ```
//!
//! followed by a plain header row and the data. Floats are written with
//! `{:.15e}` so reruns are byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::transforms::SpectralTable;

pub const TOOL_NAME: &str = "casimir-response";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// One CSV column: name and unit in natural units (ħ = c = 1).
#[derive(Debug, Clone, Copy)]
pub struct Column {
    pub name: &'static str,
    pub unit: &'static str,
}

pub const fn col(name: &'static str, unit: &'static str) -> Column {
    Column { name, unit }
}

pub fn fmt_float(x: f64) -> String {
    // adding 0.0 turns −0.0 into +0.0
    format!("{:.15e}", x + 0.0)
}

#[derive(Debug, Clone, Default)]
pub struct CsvHeader {
    pub scenario_hash: String,
    pub extra: Vec<(String, String)>,
    /// Seconds since the epoch, written only when set.
    pub stamp: Option<u64>,
}

impl CsvHeader {
    pub fn new(scenario_hash: impl Into<String>) -> Self {
        Self { scenario_hash: scenario_hash.into(), ..Self::default() }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.extra.push((key.to_string(), value.to_string()));
        self
    }
}

/// Rows of string cells; see [`fmt_float`].
pub fn render_csv(header: &CsvHeader, columns: &[Column], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    let _ = write!(out, "# {TOOL_NAME} {TOOL_VERSION} | scenario={}", header.scenario_hash);
    for (k, v) in &header.extra {
        let _ = write!(out, " | {k}={v}");
    }
    if let Some(s) = header.stamp {
        let _ = write!(out, " | generated={s}");
    }
    out.push('\n');
    let units: Vec<String> = columns.iter().map(|c| format!("{}[{}]", c.name, c.unit)).collect();
    let _ = writeln!(out, "# units: {}", units.join(", "));
    let names: Vec<&str> = columns.iter().map(|c| c.name).collect();
    let _ = writeln!(out, "{}", names.join(","));
    for row in rows {
        debug_assert_eq!(row.len(), columns.len());
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

pub fn float_rows<const N: usize>(rows: impl IntoIterator<Item = [f64; N]>) -> Vec<Vec<String>> {
    rows.into_iter().map(|r| r.iter().map(|&x| fmt_float(x)).collect()).collect()
}

/// The sampled transform: q, omega, re, im, err_estimate.
pub fn spectral_table_csv(table: &SpectralTable, stamp: Option<u64>) -> String {
    let m = &table.meta;
    let mut header = CsvHeader::new(m.scenario_hash.clone())
        .with("content", m.content)
        .with("epsilon_inf", fmt_float(m.epsilon_inf))
        .with("t_ref", fmt_float(m.t_ref))
        .with("n_q", m.n_q)
        .with("n_omega", m.n_omega)
        .with("time_panels", m.time_panels);
    header.stamp = stamp;
    let columns = [col("q", "1/length"), col("omega", "1/time"), col("re", "length^4"), col("im", "length^4"), col("err_estimate", "length^4")];
    render_csv(&header, &columns, &float_rows(table.rows()))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Files staged in memory and written together once everything has been
/// computed, so a failed run leaves no partial output.
#[derive(Debug, Default)]
pub struct PendingOutputs {
    files: Vec<(String, String)>,
}

impl PendingOutputs {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    pub fn write_all(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })?;
        let mut written = Vec::new();
        for (name, contents) in &self.files {
            let path = dir.join(name);
            fs::write(&path, contents).map_err(|e| Error::Io { path: path.clone(), source: e })?;
            written.push(path);
        }
        Ok(written)
    }
}
