//! Output files: diagnostics CSV, raw little-endian `f64` snapshots with
//! JSON sidecars, and JSON reports.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::{Domain, Field};
use crate::error::{Error, Result};

pub const DIAGNOSTICS_HEADER: &str =
    "t,mean_phi,mean_theta,l2_phi,vprime_phi,l2_theta,energy,balance_residual,lyapunov,max_abs_phi";

/// One diagnostics row; column order matches [`DIAGNOSTICS_HEADER`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub mean_phi: f64,
    pub mean_theta: f64,
    pub l2_phi: f64,
    pub vprime_phi: f64,
    pub l2_theta: f64,
    pub energy: f64,
    pub balance_residual: f64,
    pub lyapunov: f64,
    pub max_abs_phi: f64,
}

impl DiagnosticsRow {
    pub fn to_array(&self) -> [f64; 10] {
        [
            self.t,
            self.mean_phi,
            self.mean_theta,
            self.l2_phi,
            self.vprime_phi,
            self.l2_theta,
            self.energy,
            self.balance_residual,
            self.lyapunov,
            self.max_abs_phi,
        ]
    }

    pub fn from_array(v: [f64; 10]) -> Self {
        DiagnosticsRow {
            t: v[0],
            mean_phi: v[1],
            mean_theta: v[2],
            l2_phi: v[3],
            vprime_phi: v[4],
            l2_theta: v[5],
            energy: v[6],
            balance_residual: v[7],
            lyapunov: v[8],
            max_abs_phi: v[9],
        }
    }
}

/// `{:e}` prints the shortest representation that round-trips.
pub fn format_f64(v: f64) -> String {
    format!("{v:e}")
}

pub struct CsvWriter {
    out: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &str) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{header}")?;
        Ok(CsvWriter { out })
    }

    pub fn row(&mut self, values: &[f64]) -> Result<()> {
        let line: Vec<String> = values.iter().map(|&v| format_f64(v)).collect();
        writeln!(self.out, "{}", line.join(","))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Parse a CSV written by [`CsvWriter`] into its header and numeric rows.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InsufficientData(format!("{} is empty", path.display())))?
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split(',')
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|e| Error::InsufficientData(format!("bad number {v:?}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((header, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub field: String,
    pub dims: usize,
    pub n: Vec<usize>,
    pub lengths: Vec<f64>,
    pub dtype: String,
    pub time: f64,
    pub step: usize,
}

pub fn snapshot_path(dir: &Path, field: &str, step: usize) -> PathBuf {
    dir.join(format!("{field}_{step}.f64"))
}

/// Write `f` as raw little-endian `f64` (row-major, last axis fastest)
/// together with a `.meta.json` sidecar.
pub fn write_snapshot(dir: &Path, field: &str, domain: &Domain, f: &Field, time: f64, step: usize) -> Result<PathBuf> {
    domain.check(f)?;
    let path = snapshot_path(dir, field, step);
    let mut bytes = Vec::with_capacity(8 * f.len());
    for v in f.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(&path, bytes)?;
    let meta = SnapshotMeta {
        field: field.to_string(),
        dims: domain.dim(),
        n: domain.n().to_vec(),
        lengths: domain.lengths().to_vec(),
        dtype: "float64-le".into(),
        time,
        step,
    };
    write_json(&path.with_extension("meta.json"), &meta)?;
    Ok(path)
}

pub fn read_snapshot(path: &Path) -> Result<(Field, SnapshotMeta)> {
    let meta: SnapshotMeta = serde_json::from_str(&fs::read_to_string(path.with_extension("meta.json"))?)?;
    let bytes = fs::read(path)?;
    let expected: usize = meta.n.iter().product();
    if bytes.len() != 8 * expected {
        return Err(Error::DomainMismatch {
            expected,
            got: bytes.len() / 8,
        });
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((Field::new(values), meta))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
