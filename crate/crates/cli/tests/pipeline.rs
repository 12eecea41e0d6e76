use std::path::Path;
use std::process::Command;
use thermo_enclosure::config::{benchmark_config, ModeConfig, ProbeConfig, ProbeKindConfig, Spacing, TauGrid};
use thermo_enclosure::pipeline::{self, run_experiment, sweep_file};
use thermo_enclosure::validate::{validate, Level};
use thermo_enclosure::{ExperimentConfig, Stage};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_thermo-enclosure"))
}

fn small(dir: &Path) -> ExperimentConfig {
    let mut cfg = benchmark_config();
    cfg.refinement = 1;
    cfg.tau_grid = TauGrid { min: 3.0, max: 6.0, count: 6, spacing: Spacing::Geometric };
    cfg.output_dir = dir.to_path_buf();
    cfg
}

#[test]
fn tau_grid_spacing() {
    let g = TauGrid { min: 2.0, max: 10.1, count: 13, spacing: Spacing::Geometric }.values();
    assert_eq!((g[0], g[12]), (2.0, 10.1));
    for w in g.windows(2) {
        assert!((w[1] / w[0] - (10.1f64 / 2.0).powf(1.0 / 12.0)).abs() < 1e-12);
    }
    let g = TauGrid { min: 1.0, max: 2.0, count: 5, spacing: Spacing::Linear }.values();
    assert_eq!(g, vec![1.0, 1.25, 1.5, 1.75, 2.0]);
}

#[test]
fn config_json_round_trip_and_defaults() {
    let cfg = benchmark_config();
    let text = serde_json::to_string(&cfg).unwrap();
    let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(back, cfg);
    let minimal: ExperimentConfig = serde_json::from_str(r#"{"mode": {"kind": "time", "horizon": 4.0, "n_steps": 512}}"#).unwrap();
    assert_eq!(minimal.mode, ModeConfig::Time { horizon: 4.0, n_steps: 512 });
    assert_eq!(minimal.tau_grid, TauGrid::default());
    assert!(serde_json::from_str::<ExperimentConfig>(r#"{"bogus": 1}"#).is_err());
}

#[test]
fn config_invariants() {
    let mut cfg = benchmark_config();
    cfg.tau_grid.count = 4;
    assert!(cfg.resolve().is_err());
    let mut cfg = benchmark_config();
    cfg.tau_grid.min = 10.0;
    assert!(cfg.resolve().is_err());
    let mut cfg = benchmark_config();
    cfg.probes.push(cfg.probes[0].clone());
    assert!(cfg.resolve().is_err());
    let mut cfg = benchmark_config();
    cfg.probes[0].direction = None;
    assert!(cfg.resolve().is_err());
    // B overlapping Ω
    let mut cfg = benchmark_config();
    cfg.probes[0].center = [1.1, 0.0, 0.0];
    let e = cfg.resolve().unwrap_err();
    assert_eq!(e.exit_code(), 2);
    assert!(matches!(e, thermo_enclosure::CliError::Stage { stage: Stage::Validate, .. }));
}

#[test]
fn short_horizon_warns_but_runs() {
    let mut cfg = benchmark_config();
    // s(2 dist(D,B) − dist(Ω,B)) = 2·1.5 − 0.8 = 2.2
    cfg.mode = ModeConfig::Time { horizon: 2.0, n_steps: 64 };
    let res = cfg.resolve().unwrap();
    assert_eq!(res.warnings.len(), 1);
    assert!(res.warnings[0].contains("horizon"));
    cfg.mode = ModeConfig::Time { horizon: 2.5, n_steps: 64 };
    assert!(cfg.resolve().unwrap().warnings.is_empty());
    // heat probes carry no horizon restriction
    cfg.mode = ModeConfig::Time { horizon: 0.5, n_steps: 64 };
    cfg.probes = vec![ProbeConfig { id: "h".into(), kind: ProbeKindConfig::Heat, center: [2.0, 0.0, 0.0], eta: 0.2, direction: None }];
    assert!(cfg.resolve().unwrap().warnings.is_empty());
}

#[test]
fn no_probes_writes_only_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.probes.clear();
    let s = run_experiment(&cfg).unwrap();
    assert!(s.warnings.iter().any(|w| w.contains("no probes")));
    let files: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert_eq!(files, vec!["manifest.json"]);
}

#[test]
fn run_writes_every_artifact_and_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut cfg = small(a.path());
    cfg.localized_m = Some(1.6);
    cfg.workers = Some(1);
    run_experiment(&cfg).unwrap();
    for f in ["mesh.tetmesh", "sweep_shear.csv", "estimates.csv", "enclosure.vtk", "manifest.json"] {
        assert!(a.path().join(f).exists(), "{f}");
    }
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "ok");
    let echoed: ExperimentConfig = serde_json::from_value(manifest["config"].clone()).unwrap();
    assert_eq!(echoed, cfg);
    // a different worker count must not change the numbers or their order
    cfg.output_dir = b.path().to_path_buf();
    cfg.workers = Some(3);
    run_experiment(&cfg).unwrap();
    for f in ["sweep_shear.csv", "estimates.csv", "enclosure.vtk", "mesh.tetmesh"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let sweep = std::fs::read_to_string(a.path().join("sweep_shear.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 7);
    assert!(!sweep.lines().nth(1).unwrap().split(',').nth(4).unwrap().contains("NaN"));
}

#[test]
fn staged_commands_reproduce_the_run() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = small(a.path());
    run_experiment(&cfg).unwrap();
    let mut staged = cfg.clone();
    staged.output_dir = b.path().to_path_buf();
    pipeline::cmd_mesh(&staged).unwrap();
    pipeline::cmd_sweep(&staged).unwrap();
    pipeline::cmd_extract(&staged).unwrap();
    pipeline::cmd_enclose(&staged).unwrap();
    for f in ["mesh.tetmesh", "sweep_shear.csv", "estimates.csv", "enclosure.vtk"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn extraction_failure_keeps_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    pipeline::cmd_mesh(&cfg).unwrap();
    pipeline::cmd_sweep(&cfg).unwrap();
    // every value non-positive: the fit has nothing to use
    let path = dir.path().join(sweep_file("shear"));
    let text = std::fs::read_to_string(&path).unwrap();
    let neg: String = text
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i == 0 {
                return format!("{l}\n");
            }
            let mut f: Vec<String> = l.split(',').map(String::from).collect();
            f[1] = "-1.0".into();
            f.join(",") + "\n"
        })
        .collect();
    std::fs::write(&path, neg).unwrap();
    let e = pipeline::cmd_extract(&cfg).unwrap_err();
    assert_eq!(e.exit_code(), 4);
    assert!(dir.path().join("estimates.csv").exists());
}

#[test]
fn time_mode_writes_threshold_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.refinement = 0;
    cfg.mode = ModeConfig::Time { horizon: 2.4, n_steps: 64 };
    cfg.tau_grid = TauGrid { min: 1.0, max: 3.0, count: 12, spacing: Spacing::Geometric };
    cfg.candidate_distances = vec![1.0, 1.5];
    let _ = run_experiment(&cfg);
    let text = std::fs::read_to_string(dir.path().join("thresholds.csv")).unwrap();
    assert!(text.starts_with("probe_id,horizon,verdict,rate,rate_stderr,band,threshold_distance,consistent_candidates\n"));
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn field_dump_per_probe() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.refinement = 0;
    let s = pipeline::cmd_solve(&cfg, Some(2.0)).unwrap();
    assert_eq!(s.files.len(), 1);
    let text = std::fs::read_to_string(&s.files[0]).unwrap();
    assert!(text.contains("DATASET UNSTRUCTURED_GRID"));
}

#[test]
fn quick_validation_passes_on_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { output_dir: dir.path().to_path_buf(), ..Default::default() };
    let rep = validate(&cfg, Level::Quick).unwrap();
    assert!(rep.passed(), "{:?}", rep.failures);
    assert_eq!(rep.oracle_failures, 0);
    assert!(rep.max_oracle_rel_err <= 1e-8);
    assert!(rep.max_identity_rel_err <= 1e-13);
    assert!(rep.bounds.is_empty());
}

#[test]
fn full_validation_runs_the_lemma_sweeps() {
    let rep = validate(&benchmark_config(), Level::Full).unwrap();
    assert_eq!(rep.bounds.len(), 8);
    assert!(rep.passed(), "{:?}", rep.failures);
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = benchmark_config();
    cfg.probes[0].center = [1.1, 0.0, 0.0];
    let path = dir.path().join("bad.json");
    std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let st = bin().args(["validate-appendix", "--config"]).arg(&path).arg("--out").arg(dir.path()).status().unwrap();
    assert_eq!(st.code(), Some(2));
    let st = bin().args(["run", "--config"]).arg(&path).arg("--out").arg(dir.path()).status().unwrap();
    assert_eq!(st.code(), Some(2));
    assert!(!dir.path().join("mesh.tetmesh").exists());

    let mut cfg = benchmark_config();
    cfg.probes.clear();
    std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = bin().args(["run", "--config"]).arg(&path).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    assert!(dir.path().join("manifest.json").exists());

    std::fs::write(&path, "{ not json").unwrap();
    let st = bin().args(["mesh", "--config"]).arg(&path).status().unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn refine_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let st = bin().args(["mesh", "--refine", "0", "--out"]).arg(dir.path()).status().unwrap();
    assert!(st.success());
    let m = thermo_enclosure::meshio::read_mesh(&dir.path().join("mesh.tetmesh")).unwrap();
    // level 0 icosphere: 20 facets on each sphere
    assert_eq!(m.facets.len(), 40);
}
