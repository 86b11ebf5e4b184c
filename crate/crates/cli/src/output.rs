//! CSV and JSON emission of sweep results, and reading CSV back.
//!
//! CSV columns: omega_d, phi, current_natural, current_per_sec, n_ground,
//! n_k0..n_k{N-1}, trace_err, residual, solver_status. Rows run over ω_d
//! fastest, then φ.

use std::io::{Read, Write};

use chiral_ring::observables::{Diagnostics, PointResult, Populations};
use chiral_ring::sweep::{Cell, Solver, SweepMetadata, SweepResult};
use chiral_ring::DeviceParams;
use serde_json::{json, Value};

use crate::error::CliError;

/// Scientific notation with `digits` significant digits; NaN and infinities
/// are written as `NaN`, `inf`, `-inf`.
pub fn fmt_float(x: f64, digits: usize) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{:.*e}", digits.saturating_sub(1), x)
    }
}

pub fn csv_header(n_sites: usize) -> Vec<String> {
    let mut h: Vec<String> = ["omega_d", "phi", "current_natural", "current_per_sec", "n_ground"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((0..n_sites).map(|k| format!("n_k{k}")));
    h.extend(["trace_err", "residual", "solver_status"].iter().map(|s| s.to_string()));
    h
}

fn status(cell: &Cell) -> String {
    match cell {
        Cell::Ok(_) => "ok".into(),
        Cell::Failed { error, .. } => format!("failed: {error}"),
    }
}

fn row_values(cell: &Cell, n_sites: usize) -> (f64, f64, Vec<f64>) {
    match cell {
        Cell::Ok(p) => {
            let mut v = vec![p.current_natural, p.current_si, p.populations.ground];
            v.extend(&p.populations.n_k);
            v.push(p.diagnostics.trace_error);
            v.push(p.diagnostics.residual);
            (p.omega_d, p.phi, v)
        }
        Cell::Failed { omega_d, phi, .. } => (*omega_d, *phi, vec![f64::NAN; n_sites + 5]),
    }
}

pub fn write_csv<W: Write>(result: &SweepResult, digits: usize, out: W) -> Result<(), CliError> {
    let n = result.n_sites();
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| CliError::Input(format!("writing CSV: {e}"));
    w.write_record(csv_header(n)).map_err(io)?;
    for cell in &result.cells {
        let (omega_d, phi, values) = row_values(cell, n);
        let mut record = vec![fmt_float(omega_d, digits), fmt_float(phi, digits)];
        record.extend(values.iter().map(|&x| fmt_float(x, digits)));
        record.push(status(cell));
        w.write_record(&record).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Input(format!("writing CSV: {e}")))?;
    Ok(())
}

pub fn csv_string(result: &SweepResult, digits: usize) -> Result<String, CliError> {
    let mut buf = Vec::new();
    write_csv(result, digits, &mut buf)?;
    String::from_utf8(buf).map_err(|e| CliError::Input(e.to_string()))
}

fn rounded(x: f64, digits: usize) -> Value {
    if x.is_finite() {
        json!(fmt_float(x, digits).parse::<f64>().unwrap_or(x))
    } else {
        Value::Null
    }
}

/// The CSV payload as JSON rows plus run metadata. Wall time is left out so
/// reruns are byte-identical.
pub fn json_string(result: &SweepResult, digits: usize) -> Result<String, CliError> {
    let n = result.n_sites();
    let rows: Vec<Value> = result
        .cells
        .iter()
        .map(|cell| {
            let (omega_d, phi, v) = row_values(cell, n);
            json!({
                "omega_d": rounded(omega_d, digits),
                "phi": rounded(phi, digits),
                "current_natural": rounded(v[0], digits),
                "current_per_sec": rounded(v[1], digits),
                "n_ground": rounded(v[2], digits),
                "n_k": v[3..3 + n].iter().map(|&x| rounded(x, digits)).collect::<Vec<_>>(),
                "trace_err": rounded(v[3 + n], digits),
                "residual": rounded(v[4 + n], digits),
                "solver_status": status(cell),
            })
        })
        .collect();
    let m = &result.metadata;
    let payload = json!({
        "metadata": {
            "device": m.device,
            "eps_d": m.eps_d,
            "solver": m.solver,
            "version": m.version,
            "columns": csv_header(n),
            "n_omega_d": result.omega_d.len(),
            "n_phi": result.phi.len(),
            "row_order": "phi outer, omega_d inner",
        },
        "rows": rows,
    });
    serde_json::to_string_pretty(&payload).map_err(|e| CliError::Input(e.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub omega_d: f64,
    pub phi: f64,
    pub current_natural: f64,
    pub current_per_sec: f64,
    pub n_ground: f64,
    pub n_k: Vec<f64>,
    pub trace_err: f64,
    pub residual: f64,
    pub status: String,
}

/// A sweep read back from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub n_sites: usize,
    pub omega_d: Vec<f64>,
    pub phi: Vec<f64>,
    pub rows: Vec<CsvRow>,
}

pub fn read_csv<R: Read>(input: R) -> Result<SweepTable, CliError> {
    let bad = |msg: String| CliError::Input(msg);
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r
        .headers()
        .map_err(|e| bad(format!("reading CSV header: {e}")))?
        .iter()
        .map(|s| s.to_string())
        .collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(bad("empty CSV".into()));
    }
    let n_sites = header.iter().filter(|h| h.starts_with("n_k")).count();
    if header != csv_header(n_sites) {
        return Err(bad(format!("unexpected CSV columns: {}", header.join(","))));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(format!("row {}: {e}", line + 2)))?;
        let num = |i: usize| -> Result<f64, CliError> {
            rec.get(i)
                .unwrap_or("")
                .parse::<f64>()
                .map_err(|e| bad(format!("row {}, column {}: {e}", line + 2, header[i])))
        };
        rows.push(CsvRow {
            omega_d: num(0)?,
            phi: num(1)?,
            current_natural: num(2)?,
            current_per_sec: num(3)?,
            n_ground: num(4)?,
            n_k: (0..n_sites).map(|k| num(5 + k)).collect::<Result<_, _>>()?,
            trace_err: num(5 + n_sites)?,
            residual: num(6 + n_sites)?,
            status: rec.get(7 + n_sites).unwrap_or("").to_string(),
        });
    }
    if rows.is_empty() {
        return Err(bad("CSV has no data rows".into()));
    }
    let n_omega = rows.iter().take_while(|r| r.phi == rows[0].phi).count();
    if rows.len() % n_omega != 0 {
        return Err(bad(format!("{} rows do not form a grid with {n_omega} ω_d values", rows.len())));
    }
    let omega_d: Vec<f64> = rows[..n_omega].iter().map(|r| r.omega_d).collect();
    let phi: Vec<f64> = rows.iter().step_by(n_omega).map(|r| r.phi).collect();
    for (i, row) in rows.iter().enumerate() {
        if row.omega_d != omega_d[i % n_omega] || row.phi != phi[i / n_omega] {
            return Err(bad(format!("row {} breaks the (phi outer, omega_d inner) grid order", i + 2)));
        }
    }
    Ok(SweepTable {
        n_sites,
        omega_d,
        phi,
        rows,
    })
}

impl SweepTable {
    /// Rebuilds a [`SweepResult`] carrying the currents and populations; the
    /// diagnostics not stored in CSV are NaN.
    pub fn to_sweep_result(&self, device: &DeviceParams, eps_d: f64, solver: Solver) -> Result<SweepResult, CliError> {
        if device.n_sites != self.n_sites {
            return Err(CliError::Input(format!(
                "CSV has {} n_k columns but the configuration has n_sites = {}",
                self.n_sites, device.n_sites
            )));
        }
        let cells = self
            .rows
            .iter()
            .map(|r| {
                if r.status == "ok" {
                    Cell::Ok(PointResult {
                        omega_d: r.omega_d,
                        phi: r.phi,
                        current_natural: r.current_natural,
                        current_si: r.current_per_sec,
                        populations: Populations {
                            n_k: r.n_k.clone(),
                            ground: r.n_ground,
                        },
                        bond_currents: vec![r.current_natural; self.n_sites],
                        diagnostics: Diagnostics {
                            solver,
                            trace_error: r.trace_err,
                            hermiticity_error: f64::NAN,
                            min_eigenvalue: f64::NAN,
                            residual: r.residual,
                            bond_spread: f64::NAN,
                        },
                    })
                } else {
                    Cell::Failed {
                        omega_d: r.omega_d,
                        phi: r.phi,
                        error: r.status.trim_start_matches("failed: ").to_string(),
                    }
                }
            })
            .collect();
        Ok(SweepResult {
            omega_d: self.omega_d.clone(),
            phi: self.phi.clone(),
            cells,
            metadata: SweepMetadata {
                device: device.clone(),
                eps_d,
                solver,
                version: String::new(),
                wall_time_s: 0.0,
            },
        })
    }
}
