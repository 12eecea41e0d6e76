//! CSV and legacy VTK writers.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), which round
//! trips every `f64` exactly; non-finite values are written as `NaN`/`inf`.

use crate::error::{CliError, Stage};
use std::path::Path;
use thermo_enclosure_core::enclosure::{DistanceEstimate, EnclosureRegion, FitMode, ThresholdReport};
use thermo_enclosure_core::geometry::Mesh;
use thermo_enclosure_core::indicator::IndicatorPoint;
use thermo_enclosure_core::vec3::V3;

pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    CliError::stage(Stage::Output, format!("{}: {e}", path.display()))
}

pub const SWEEP_HEADER: [&str; 12] =
    ["tau", "I1", "I2", "Is", "Is_localized", "J", "j", "E", "e", "decomp_residual1", "decomp_residual_combined", "solver_residual"];

pub fn sweep_row(p: &IndicatorPoint) -> Vec<String> {
    let loc = p.is_localized.map_or(f64::NAN, |(_, v)| v);
    [p.tau, p.i1, p.i2, p.is, loc, p.j_elastic, p.j_thermal, p.e_elastic, p.e_thermal, p.decomp_residual1, p.decomp_residual_combined, p.solver_residual]
        .iter()
        .map(|v| num(*v))
        .collect()
}

pub fn write_sweep(path: &Path, points: &[IndicatorPoint]) -> Result<(), CliError> {
    write_csv(path, &SWEEP_HEADER, points.iter().map(sweep_row))
}

/// Columns of a sweep CSV, keyed by header name.
#[derive(Debug, Clone, Default)]
pub struct SweepTable {
    pub tau: Vec<f64>,
    pub i1: Vec<f64>,
    pub i2: Vec<f64>,
    pub is: Vec<f64>,
}

pub fn read_sweep(path: &Path) -> Result<SweepTable, CliError> {
    let bad = |m: String| CliError::stage(Stage::Extract, format!("{}: {m}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| header.iter().position(|h| h == name).ok_or_else(|| bad(format!("missing column {name}")));
    let (ct, c1, c2, cs) = (col("tau")?, col("I1")?, col("I2")?, col("Is")?);
    let mut t = SweepTable::default();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let get = |c: usize| -> Result<f64, CliError> {
            let s = rec.get(c).ok_or_else(|| bad("short row".into()))?;
            s.parse().map_err(|_| bad(format!("bad number {s:?}")))
        };
        t.tau.push(get(ct)?);
        t.i1.push(get(c1)?);
        t.i2.push(get(c2)?);
        t.is.push(get(cs)?);
    }
    Ok(t)
}

pub const ESTIMATE_HEADER: [&str; 9] = ["probe_id", "mode", "alpha", "beta", "gamma", "d_hat", "stderr", "n_used", "n_skipped"];

pub fn write_estimates(path: &Path, ests: &[DistanceEstimate]) -> Result<(), CliError> {
    write_csv(
        path,
        &ESTIMATE_HEADER,
        ests.iter().map(|e| {
            vec![
                e.probe_id.clone(),
                e.mode.name().to_string(),
                num(e.alpha),
                num(e.beta),
                num(e.gamma),
                num(e.d_hat),
                num(e.stderr),
                e.n_used.to_string(),
                e.n_skipped.to_string(),
            ]
        }),
    )
}

/// Estimates CSV rows; the probe position comes from the config.
pub fn read_estimates(path: &Path) -> Result<Vec<DistanceEstimate>, CliError> {
    let bad = |m: String| CliError::stage(Stage::Enclose, format!("{}: {m}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != ESTIMATE_HEADER {
        return Err(bad("unexpected header".into()));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let f = |c: usize| -> Result<f64, CliError> { rec[c].parse().map_err(|_| bad(format!("bad number {:?}", &rec[c]))) };
        let u = |c: usize| -> Result<usize, CliError> { rec[c].parse().map_err(|_| bad(format!("bad count {:?}", &rec[c]))) };
        let mode = FitMode::from_name(&rec[1]).ok_or_else(|| bad(format!("unknown mode {:?}", &rec[1])))?;
        out.push(DistanceEstimate {
            probe_id: rec[0].to_string(),
            mode,
            p: [0.0; 3],
            eta: 0.0,
            alpha: f(2)?,
            beta: f(3)?,
            gamma: f(4)?,
            d_hat: f(5)?,
            stderr: f(6)?,
            window: (f64::NAN, f64::NAN),
            n_used: u(7)?,
            n_skipped: u(8)?,
        });
    }
    Ok(out)
}

pub const THRESHOLD_HEADER: [&str; 8] = ["probe_id", "horizon", "verdict", "rate", "rate_stderr", "band", "threshold_distance", "consistent_candidates"];

pub fn write_thresholds(path: &Path, rows: &[(String, ThresholdReport)]) -> Result<(), CliError> {
    write_csv(
        path,
        &THRESHOLD_HEADER,
        rows.iter().map(|(id, r)| {
            let cands: Vec<String> = r.candidates.iter().filter(|c| c.consistent).map(|c| num(c.distance)).collect();
            vec![id.clone(), num(r.horizon), r.verdict.name().into(), num(r.rate), num(r.rate_stderr), num(r.band), num(r.threshold_distance), cands.join(";")]
        }),
    )
}

pub const VALIDATION_HEADER: [&str; 8] = ["kind", "j", "tau", "eta", "dist", "closed_form", "oracle", "rel_err"];

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRow {
    pub kind: String,
    pub j: usize,
    pub tau: f64,
    pub eta: f64,
    pub dist: f64,
    pub closed_form: f64,
    pub oracle: f64,
    pub rel_err: f64,
}

pub fn write_validation(path: &Path, rows: &[ValidationRow]) -> Result<(), CliError> {
    write_csv(
        path,
        &VALIDATION_HEADER,
        rows.iter().map(|r| vec![r.kind.clone(), r.j.to_string(), num(r.tau), num(r.eta), num(r.dist), num(r.closed_form), num(r.oracle), num(r.rel_err)]),
    )
}

/// Structured points with a 0/1 `excluded` scalar.
pub fn format_enclosure_vtk(r: &EnclosureRegion) -> String {
    let n = r.n;
    let sp = |c: usize| (r.hi[c] - r.lo[c]) / (n - 1) as f64;
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\nenclosure exclusion field\nASCII\nDATASET STRUCTURED_POINTS\n");
    s.push_str(&format!("DIMENSIONS {n} {n} {n}\n"));
    s.push_str(&format!("ORIGIN {} {} {}\n", num(r.lo[0]), num(r.lo[1]), num(r.lo[2])));
    s.push_str(&format!("SPACING {} {} {}\n", num(sp(0)), num(sp(1)), num(sp(2))));
    s.push_str(&format!("POINT_DATA {}\nSCALARS excluded int 1\nLOOKUP_TABLE default\n", n * n * n));
    for chunk in r.excluded.chunks(n) {
        let line: Vec<&str> = chunk.iter().map(|e| if *e { "1" } else { "0" }).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

/// Unstructured grid with a point vector `w` and a point scalar `Xi`.
pub fn format_field_vtk(mesh: &Mesh, w: &[V3], xi: &[f64], title: &str) -> String {
    let mut s = String::new();
    s.push_str(&format!("# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID\n"));
    s.push_str(&format!("POINTS {} double\n", mesh.nodes.len()));
    for x in &mesh.nodes {
        s.push_str(&format!("{} {} {}\n", num(x[0]), num(x[1]), num(x[2])));
    }
    let nt = mesh.tets.len();
    s.push_str(&format!("CELLS {nt} {}\n", 5 * nt));
    for t in &mesh.tets {
        s.push_str(&format!("4 {} {} {} {}\n", t[0], t[1], t[2], t[3]));
    }
    s.push_str(&format!("CELL_TYPES {nt}\n"));
    for _ in 0..nt {
        s.push_str("10\n");
    }
    s.push_str(&format!("POINT_DATA {}\nVECTORS w double\n", mesh.nodes.len()));
    for v in w {
        s.push_str(&format!("{} {} {}\n", num(v[0]), num(v[1]), num(v[2])));
    }
    s.push_str("SCALARS Xi double 1\nLOOKUP_TABLE default\n");
    for v in xi {
        s.push_str(&num(*v));
        s.push('\n');
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}
