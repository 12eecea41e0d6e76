//! Experiment stages and the full run.

use crate::config::{ExperimentConfig, ModeConfig, Resolved};
use crate::error::{CliError, Stage};
use crate::meshio;
use crate::output::{self, SweepTable};
use rayon::prelude::*;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thermo_enclosure_core::enclosure::{attach_probe, classify_threshold_data, enclose, fit_distance_data, DistanceEstimate, EnclosureRegion, FitMode, ThresholdReport};
use thermo_enclosure_core::geometry::{generate_benchmark_mesh, Mesh};
use thermo_enclosure_core::indicator::{indicator, indicator_localized, IndicatorPoint, SolutionRef};
use thermo_enclosure_core::solver::{solve_tau_with, solve_time_with, Discretization, SolveOptions, TimeOptions};
use thermo_enclosure_core::{Material, Probe, ProbeKind};

pub const MESH_FILE: &str = "mesh.tetmesh";
pub const ESTIMATES_FILE: &str = "estimates.csv";
pub const THRESHOLDS_FILE: &str = "thresholds.csv";
pub const ENCLOSURE_FILE: &str = "enclosure.vtk";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const VALIDATION_FILE: &str = "validation.csv";
pub const BOUNDS_FILE: &str = "bounds.csv";

pub fn sweep_file(id: &str) -> String {
    format!("sweep_{id}.csv")
}

pub fn field_file(id: &str) -> String {
    format!("fields_{id}.vtk")
}

/// Command-line overrides of the config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub refine: Option<u32>,
}

impl Overrides {
    pub fn apply(&self, mut cfg: ExperimentConfig) -> ExperimentConfig {
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if let Some(w) = self.workers {
            cfg.workers = Some(w);
        }
        if let Some(r) = self.refine {
            cfg.refinement = r;
        }
        cfg
    }
}

/// Run `f` on a pool of the configured size.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build().map_err(|e| CliError::stage(Stage::Validate, e.to_string()))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn build_mesh(cfg: &ExperimentConfig) -> Result<Mesh, CliError> {
    let scene = cfg.mesh_scene()?;
    scene.validate().map_err(|e| CliError::core(Stage::Validate, e))?;
    generate_benchmark_mesh(&scene, cfg.refinement).map_err(|e| CliError::core(Stage::Mesh, e))
}

/// Indicator sweep of one probe over the configured grid; the order of the
/// points is the grid order whatever the scheduling.
pub fn sweep_probe(cfg: &ExperimentConfig, res: &Resolved, mesh: &Mesh, disc: &Discretization, probe: &Probe) -> Result<Vec<IndicatorPoint>, CliError> {
    let cavity = cfg.scene.cavity.map(|c| c.ball());
    let mat = &res.material;
    let solve_err = |e| CliError::core(Stage::Solve, e);
    let finish = |sol: SolutionRef<'_>| -> Result<IndicatorPoint, CliError> {
        let mut p = indicator(sol, probe, mat, mesh, cavity.as_ref()).map_err(solve_err)?;
        if let Some(m) = cfg.localized_m {
            let (v, _) = indicator_localized(sol, probe, mat, mesh, m).map_err(solve_err)?;
            p.is_localized = Some((m, v));
        }
        Ok(p)
    };
    match cfg.mode {
        ModeConfig::Tau => res
            .taus
            .par_iter()
            .map(|&tau| {
                let sol = solve_tau_with(disc, mesh, probe, tau, &SolveOptions::default()).map_err(solve_err)?;
                finish(SolutionRef::Tau(&sol))
            })
            .collect(),
        ModeConfig::Time { horizon, n_steps } => {
            let opts = TimeOptions { transform_taus: res.taus.clone(), ..Default::default() };
            let sol = solve_time_with(disc, mesh, probe, horizon, n_steps, &opts).map_err(solve_err)?;
            res.taus.par_iter().map(|&tau| finish(SolutionRef::Time(&sol, tau))).collect()
        }
    }
}

/// Column fitted for a probe: `I¹` for wave probes, `I²` for heat.
pub fn fitted_column(kind: ProbeKind, t: &SweepTable) -> Vec<f64> {
    if kind == ProbeKind::Heat {
        t.i2.clone()
    } else {
        t.i1.clone()
    }
}

pub fn extract_probe(cfg: &ExperimentConfig, mat: &Material, id: &str, probe: &Probe, t: &SweepTable) -> (Result<DistanceEstimate, CliError>, Option<Result<ThresholdReport, CliError>>) {
    let mode = FitMode::for_probe(probe.kind);
    let values = fitted_column(probe.kind, t);
    let window = cfg.fit_window.map(|[a, b]| (a, b));
    let est = fit_distance_data(&t.tau, &values, mode, mat, window)
        .map(|e| attach_probe(e, id, probe))
        .map_err(|e| CliError::stage(Stage::Extract, format!("probe {id}: {e}")));
    let thr = match cfg.mode {
        ModeConfig::Time { horizon, .. } => Some(
            classify_threshold_data(&t.tau, &values, horizon, mode.slowness(mat), &cfg.candidate_distances)
                .map_err(|e| CliError::stage(Stage::Extract, format!("probe {id}: {e}"))),
        ),
        ModeConfig::Tau => None,
    };
    (est, thr)
}

pub fn enclosure_box(cfg: &ExperimentConfig) -> ([f64; 3], [f64; 3], usize) {
    match cfg.enclosure {
        Some(e) => (e.lo, e.hi, e.grid_n),
        None => {
            let o = cfg.scene.outer;
            let lo = [o.center[0] - o.radius, o.center[1] - o.radius, o.center[2] - o.radius];
            let hi = [o.center[0] + o.radius, o.center[1] + o.radius, o.center[2] + o.radius];
            (lo, hi, 32)
        }
    }
}

pub fn enclose_estimates(cfg: &ExperimentConfig, ests: &[DistanceEstimate]) -> Result<EnclosureRegion, CliError> {
    let (lo, hi, n) = enclosure_box(cfg);
    enclose(ests, lo, hi, n).map_err(|e| CliError::core(Stage::Enclose, e))
}

/// Attach probe positions from the config to estimates read from CSV.
pub fn locate_estimates(res: &Resolved, ests: Vec<DistanceEstimate>) -> Result<Vec<DistanceEstimate>, CliError> {
    ests.into_iter()
        .map(|e| {
            let (id, probe) = res
                .probes
                .iter()
                .find(|(id, _)| *id == e.probe_id)
                .ok_or_else(|| CliError::stage(Stage::Enclose, format!("estimate for unknown probe {}", e.probe_id)))?;
            Ok(attach_probe(e, id, probe))
        })
        .collect()
}

#[derive(Debug, Default)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
    pub timings: Vec<(String, f64)>,
    pub estimates: Vec<DistanceEstimate>,
    pub thresholds: Vec<(String, ThresholdReport)>,
    pub possible_points: Option<usize>,
    pub mesh_counts: Option<(usize, usize, usize)>,
}

fn manifest(cfg: &ExperimentConfig, s: &RunSummary, status: &str) -> serde_json::Value {
    let files: Vec<String> = s.files.iter().filter_map(|f| f.file_name().map(|n| n.to_string_lossy().into_owned())).collect();
    let timings: serde_json::Map<String, serde_json::Value> = s.timings.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
    let estimates: Vec<_> = s
        .estimates
        .iter()
        .map(|e| json!({"probe_id": e.probe_id, "mode": e.mode.name(), "d_hat": e.d_hat, "stderr": e.stderr, "n_used": e.n_used, "n_skipped": e.n_skipped}))
        .collect();
    let thresholds: Vec<_> = s
        .thresholds
        .iter()
        .map(|(id, r)| json!({"probe_id": id, "verdict": r.verdict.name(), "rate": r.rate, "band": r.band, "threshold_distance": r.threshold_distance}))
        .collect();
    json!({
        "program": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "status": status,
        "config": cfg,
        "mesh": s.mesh_counts.map(|(n, t, f)| json!({"nodes": n, "tets": t, "facets": f})),
        "files": files,
        "warnings": s.warnings,
        "timings_s": timings,
        "estimates": estimates,
        "thresholds": thresholds,
        "enclosure_possible_points": s.possible_points,
    })
}

fn write_manifest(dir: &Path, cfg: &ExperimentConfig, s: &mut RunSummary, status: &str) -> Result<(), CliError> {
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest(cfg, s, status)).map_err(|e| CliError::stage(Stage::Output, e.to_string()))?;
    output::write_text(&path, &(text + "\n"))?;
    s.files.push(path);
    Ok(())
}

fn timed<T>(s: &mut RunSummary, name: &str, f: impl FnOnce() -> Result<T, CliError>) -> Result<T, CliError> {
    let t0 = Instant::now();
    let r = f();
    s.timings.push((name.to_string(), t0.elapsed().as_secs_f64()));
    r
}

/// Sweeps for every probe; writes one CSV per probe as it completes.
fn run_sweeps(cfg: &ExperimentConfig, res: &Resolved, mesh: &Mesh, dir: &Path, s: &mut RunSummary) -> Result<Vec<SweepTable>, CliError> {
    let disc = timed(s, "assemble", || Discretization::new(mesh, &res.material).map_err(|e| CliError::core(Stage::Solve, e)))?;
    let mut tables = Vec::new();
    for (id, probe) in &res.probes {
        let pts = timed(s, &format!("sweep_{id}"), || with_workers(cfg.workers, || sweep_probe(cfg, res, mesh, &disc, probe))?)?;
        let path = dir.join(sweep_file(id));
        output::write_sweep(&path, &pts)?;
        s.files.push(path);
        tables.push(SweepTable {
            tau: pts.iter().map(|p| p.tau).collect(),
            i1: pts.iter().map(|p| p.i1).collect(),
            i2: pts.iter().map(|p| p.i2).collect(),
            is: pts.iter().map(|p| p.is).collect(),
        });
    }
    Ok(tables)
}

/// Fits and threshold verdicts for every probe. Writes what succeeded and
/// then reports the first failure.
fn run_extract(cfg: &ExperimentConfig, res: &Resolved, tables: &[SweepTable], dir: &Path, s: &mut RunSummary) -> Result<(), CliError> {
    let mut first_err = None;
    for ((id, probe), t) in res.probes.iter().zip(tables) {
        let (est, thr) = extract_probe(cfg, &res.material, id, probe, t);
        match est {
            Ok(e) => s.estimates.push(e),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
        match thr {
            Some(Ok(r)) => s.thresholds.push((id.clone(), r)),
            Some(Err(e)) => s.warnings.push(format!("threshold classification: {e}")),
            None => {}
        }
    }
    let path = dir.join(ESTIMATES_FILE);
    output::write_estimates(&path, &s.estimates)?;
    s.files.push(path);
    if matches!(cfg.mode, ModeConfig::Time { .. }) {
        let path = dir.join(THRESHOLDS_FILE);
        output::write_thresholds(&path, &s.thresholds)?;
        s.files.push(path);
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn run_inner(cfg: &ExperimentConfig, dir: &Path, s: &mut RunSummary) -> Result<(), CliError> {
    let res = cfg.resolve()?;
    s.warnings.extend(res.warnings.iter().cloned());
    if res.probes.is_empty() {
        return Ok(());
    }
    let mesh = timed(s, "mesh", || build_mesh(cfg))?;
    s.mesh_counts = Some((mesh.nodes.len(), mesh.tets.len(), mesh.facets.len()));
    let path = dir.join(MESH_FILE);
    meshio::write_mesh(&path, &mesh)?;
    s.files.push(path);
    let tables = run_sweeps(cfg, &res, &mesh, dir, s)?;
    let t0 = Instant::now();
    let r = run_extract(cfg, &res, &tables, dir, s);
    s.timings.push(("extract".into(), t0.elapsed().as_secs_f64()));
    r?;
    let ests = s.estimates.clone();
    let region = timed(s, "enclose", || enclose_estimates(cfg, &ests))?;
    s.possible_points = Some(region.possible_count());
    let path = dir.join(ENCLOSURE_FILE);
    output::write_text(&path, &output::format_enclosure_vtk(&region))?;
    s.files.push(path);
    Ok(())
}

/// Full pipeline: mesh, sweeps, fits, enclosure and manifest. The manifest
/// is written on failure too, with the failing stage as its status.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary, CliError> {
    let dir = cfg.output_dir.clone();
    ensure_dir(&dir)?;
    let mut s = RunSummary::default();
    let t0 = Instant::now();
    let r = run_inner(cfg, &dir, &mut s);
    s.timings.push(("total".into(), t0.elapsed().as_secs_f64()));
    let status = match &r {
        Ok(()) => "ok".to_string(),
        Err(e) => format!("failed: {e}"),
    };
    write_manifest(&dir, cfg, &mut s, &status)?;
    r.map(|_| s)
}

pub fn cmd_mesh(cfg: &ExperimentConfig) -> Result<RunSummary, CliError> {
    cfg.resolve()?;
    ensure_dir(&cfg.output_dir)?;
    let mesh = build_mesh(cfg)?;
    let path = cfg.output_dir.join(MESH_FILE);
    meshio::write_mesh(&path, &mesh)?;
    Ok(RunSummary { files: vec![path], mesh_counts: Some((mesh.nodes.len(), mesh.tets.len(), mesh.facets.len())), ..Default::default() })
}

/// Use the mesh file in the output directory if present, otherwise generate.
fn load_or_build_mesh(cfg: &ExperimentConfig) -> Result<Mesh, CliError> {
    let path = cfg.output_dir.join(MESH_FILE);
    if path.exists() {
        meshio::read_mesh(&path)
    } else {
        build_mesh(cfg)
    }
}

/// Field dump per probe: the total fields at `tau` (tau mode) or the
/// terminal fields (time mode).
pub fn cmd_solve(cfg: &ExperimentConfig, tau: Option<f64>) -> Result<RunSummary, CliError> {
    let res = cfg.resolve()?;
    ensure_dir(&cfg.output_dir)?;
    let mut s = RunSummary { warnings: res.warnings.clone(), ..Default::default() };
    if res.probes.is_empty() {
        return Ok(s);
    }
    let mesh = load_or_build_mesh(cfg)?;
    let disc = Discretization::new(&mesh, &res.material).map_err(|e| CliError::core(Stage::Solve, e))?;
    let tau = tau.unwrap_or(res.taus[0]);
    let dumps: Vec<(String, String)> = with_workers(cfg.workers, || {
        res.probes
            .par_iter()
            .map(|(id, probe)| {
                let (w, xi, title) = match cfg.mode {
                    ModeConfig::Tau => {
                        let sol = solve_tau_with(&disc, &mesh, probe, tau, &SolveOptions::default()).map_err(|e| CliError::core(Stage::Solve, e))?;
                        (sol.w, sol.xi, format!("probe {id} tau {tau}"))
                    }
                    ModeConfig::Time { horizon, n_steps } => {
                        let sol = solve_time_with(&disc, &mesh, probe, horizon, n_steps, &TimeOptions::default()).map_err(|e| CliError::core(Stage::Solve, e))?;
                        (sol.terminal_u, sol.terminal_theta, format!("probe {id} t {horizon} ({})", sol.formulation.name()))
                    }
                };
                Ok((id.clone(), output::format_field_vtk(&mesh, &w, &xi, &title)))
            })
            .collect::<Result<Vec<_>, CliError>>()
    })??;
    for (id, text) in dumps {
        let path = cfg.output_dir.join(field_file(&id));
        output::write_text(&path, &text)?;
        s.files.push(path);
    }
    Ok(s)
}

pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<RunSummary, CliError> {
    let res = cfg.resolve()?;
    ensure_dir(&cfg.output_dir)?;
    let mut s = RunSummary { warnings: res.warnings.clone(), ..Default::default() };
    if res.probes.is_empty() {
        return Ok(s);
    }
    let mesh = load_or_build_mesh(cfg)?;
    run_sweeps(cfg, &res, &mesh, &cfg.output_dir, &mut s)?;
    Ok(s)
}

/// Fits from the sweep CSVs in the output directory.
pub fn cmd_extract(cfg: &ExperimentConfig) -> Result<RunSummary, CliError> {
    let res = cfg.resolve()?;
    let mut s = RunSummary { warnings: res.warnings.clone(), ..Default::default() };
    let tables = res.probes.iter().map(|(id, _)| output::read_sweep(&cfg.output_dir.join(sweep_file(id)))).collect::<Result<Vec<_>, _>>()?;
    run_extract(cfg, &res, &tables, &cfg.output_dir, &mut s)?;
    Ok(s)
}

/// Enclosure from the estimates CSV in the output directory.
pub fn cmd_enclose(cfg: &ExperimentConfig) -> Result<RunSummary, CliError> {
    let res = cfg.resolve()?;
    let ests = output::read_estimates(&cfg.output_dir.join(ESTIMATES_FILE))?;
    let ests = locate_estimates(&res, ests)?;
    let region = enclose_estimates(cfg, &ests)?;
    let path = cfg.output_dir.join(ENCLOSURE_FILE);
    output::write_text(&path, &output::format_enclosure_vtk(&region))?;
    Ok(RunSummary { files: vec![path], estimates: ests, possible_points: Some(region.possible_count()), warnings: res.warnings, ..Default::default() })
}
