//! Run artifacts: diagnostics CSV, terminal snapshot and manifest.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::HarnessError;
use crate::diagnostics::DiagnosticsRow;
use crate::dynamics::TCMState;

/// Columns of the diagnostics CSV, in order.
pub const CSV_COLUMNS: [&str; 8] = ["t", "A", "B", "E", "crossing", "l2_energy", "energy_residual", "max_linf"];

/// Names of the snapshot arrays, in order.
pub const SNAPSHOT_FIELDS: [&str; 5] = ["u1", "u2", "v1", "v2", "theta"];

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Seventeen significant digits: enough to recover every binary64 exactly.
pub fn format_value(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write rows in [`CSV_COLUMNS`] order.
pub fn write_csv<W: Write>(writer: W, rows: &[DiagnosticsRow]) -> Result<(), HarnessError> {
    let mut out = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| HarnessError::Output(e.to_string());
    out.write_record(CSV_COLUMNS).map_err(csv_err)?;
    for r in rows {
        let values = [r.t, r.a, r.b, r.e, r.crossing, r.l2_energy, r.energy_residual, r.max_linf];
        out.write_record(values.iter().map(|v| format_value(*v))).map_err(csv_err)?;
    }
    out.flush().map_err(|e| HarnessError::Output(e.to_string()))
}

pub fn write_csv_file(path: &Path, rows: &[DiagnosticsRow]) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(io_error(path))?;
    write_csv(BufWriter::new(file), rows)
}

/// Read the columns written by [`write_csv`]; other row fields stay zero.
pub fn read_csv<R: Read>(reader: R) -> Result<Vec<DiagnosticsRow>, HarnessError> {
    let mut input = csv::Reader::from_reader(reader);
    let headers = input.headers().map_err(|e| HarnessError::Output(e.to_string()))?;
    if headers.iter().ne(CSV_COLUMNS) {
        return Err(HarnessError::Output(format!("unexpected CSV header {headers:?}")));
    }
    let mut rows = Vec::new();
    for record in input.records() {
        let record = record.map_err(|e| HarnessError::Output(e.to_string()))?;
        let v: Vec<f64> = record
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| HarnessError::Output(format!("{s:?}: {e}"))))
            .collect::<Result<_, _>>()?;
        rows.push(DiagnosticsRow {
            t: v[0],
            a: v[1],
            b: v[2],
            e: v[3],
            crossing: v[4],
            l2_energy: v[5],
            energy_residual: v[6],
            max_linf: v[7],
            ..Default::default()
        });
    }
    Ok(rows)
}

/// Decoded snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub n: usize,
    pub side: f64,
    pub t: f64,
    pub mu: f64,
    pub nu: f64,
    /// `(name, values)` in file order.
    pub fields: Vec<(String, Array2<f64>)>,
}

/// Header line `TCM1 n side t mu nu`, then for each of `u1 u2 v1 v2 theta`
/// a name line followed by `n * n` little-endian binary64 values, row-major.
pub fn write_snapshot<W: Write>(mut out: W, state: &TCMState) -> Result<(), HarnessError> {
    let w = |e: std::io::Error| HarnessError::Output(e.to_string());
    let grid = state.grid();
    writeln!(
        out,
        "TCM1 {} {} {} {} {}",
        grid.n(),
        format_value(grid.side()),
        format_value(state.t),
        format_value(state.mu),
        format_value(state.nu)
    )
    .map_err(w)?;
    let spectra = [state.u.first(), state.u.second(), state.v.first(), state.v.second(), &state.theta];
    let real = crate::grid::inverse_many(&spectra);
    for (name, field) in SNAPSHOT_FIELDS.iter().zip(real) {
        writeln!(out, "{name}").map_err(w)?;
        let mut bytes = Vec::with_capacity(8 * grid.n() * grid.n());
        for v in field.values().iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&bytes).map_err(w)?;
    }
    out.flush().map_err(w)
}

pub fn write_snapshot_file(path: &Path, state: &TCMState) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(io_error(path))?;
    write_snapshot(BufWriter::new(file), state)
}

pub fn read_snapshot<R: Read>(reader: R) -> Result<Snapshot, HarnessError> {
    let bad = |m: &str| HarnessError::Output(format!("malformed snapshot: {m}"));
    let mut input = BufReader::new(reader);
    let mut line = String::new();
    input.read_line(&mut line).map_err(|e| HarnessError::Output(e.to_string()))?;
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != 6 || parts[0] != "TCM1" {
        return Err(bad("header"));
    }
    let n: usize = parts[1].parse().map_err(|_| bad("n"))?;
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad("header value"));
    let (side, t, mu, nu) = (num(parts[2])?, num(parts[3])?, num(parts[4])?, num(parts[5])?);
    let mut fields = Vec::with_capacity(SNAPSHOT_FIELDS.len());
    for _ in 0..SNAPSHOT_FIELDS.len() {
        let mut name = String::new();
        input.read_line(&mut name).map_err(|e| HarnessError::Output(e.to_string()))?;
        let mut bytes = vec![0u8; 8 * n * n];
        input.read_exact(&mut bytes).map_err(|_| bad("truncated field"))?;
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes")))
            .collect();
        let array = Array2::from_shape_vec((n, n), values).map_err(|_| bad("shape"))?;
        fields.push((name.trim_end().to_string(), array));
    }
    Ok(Snapshot {
        n,
        side,
        t,
        mu,
        nu,
        fields,
    })
}

/// `[result]` table of the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub termination: String,
    pub exit_code: i32,
    pub steps_taken: usize,
    pub final_time: f64,
    pub final_norm: f64,
    pub max_cfl: f64,
    pub max_energy_residual: f64,
    pub condition_lhs: f64,
    pub decay_verdict: bool,
    pub decay_sup_first: f64,
    pub decay_sup_last: f64,
    pub gronwall_verdict: Option<bool>,
    pub gronwall_minimal_c: Option<f64>,
    pub gronwall_clamped_at_floor: Option<bool>,
    pub crossing_equivalence: bool,
    pub sup_scaled_forcing: f64,
}

/// Manifest document: `[config]` echo and `[result]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: RunConfig,
    pub result: RunResult,
}

pub fn write_manifest_file(path: &Path, manifest: &Manifest) -> Result<(), HarnessError> {
    let text = toml::to_string(manifest).map_err(|e| HarnessError::Output(e.to_string()))?;
    std::fs::write(path, text).map_err(io_error(path))
}

pub fn read_manifest_file(path: &Path) -> Result<Manifest, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(io_error(path))?;
    toml::from_str(&text).map_err(|e| HarnessError::Parse {
        field: None,
        message: e.message().to_string(),
    })
}
