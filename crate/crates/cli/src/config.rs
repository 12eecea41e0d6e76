//! Experiment configuration: one JSON document.

use crate::error::{CliError, Stage};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thermo_enclosure_core::geometry::{set_distance, Scene};
use thermo_enclosure_core::{Ball, Material, Probe, ProbeKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    pub rho: f64,
    pub mu: f64,
    pub lambda: f64,
    pub m: f64,
    pub c: f64,
    pub k: f64,
    pub theta0: f64,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        MaterialConfig { rho: 1.0, mu: 1.0, lambda: 1.0, m: 0.5, c: 1.0, k: 1.0, theta0: 1.0 }
    }
}

impl MaterialConfig {
    pub fn build(&self) -> Result<Material, CliError> {
        Material::new(self.rho, self.mu, self.lambda, self.m, self.c, self.k, self.theta0).map_err(|e| CliError::core(Stage::Validate, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallConfig {
    pub center: [f64; 3],
    pub radius: f64,
}

impl BallConfig {
    pub fn ball(&self) -> Ball {
        Ball::new(self.center, self.radius)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub outer: BallConfig,
    #[serde(default)]
    pub cavity: Option<BallConfig>,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            outer: BallConfig { center: [0.0; 3], radius: 1.0 },
            cavity: Some(BallConfig { center: [0.0; 3], radius: 0.3 }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeKindConfig {
    Shear,
    Pressure,
    Heat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub id: String,
    pub kind: ProbeKindConfig,
    pub center: [f64; 3],
    pub eta: f64,
    /// Polarization of the shear probe; ignored otherwise.
    #[serde(default)]
    pub direction: Option<[f64; 3]>,
}

impl ProbeConfig {
    pub fn build(&self) -> Result<Probe, CliError> {
        let r = match self.kind {
            ProbeKindConfig::Shear => {
                let a = self.direction.ok_or_else(|| CliError::validation(format!("probe {}: shear probe needs a direction", self.id)))?;
                let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
                if !(n > 0.0) {
                    return Err(CliError::validation(format!("probe {}: direction must be nonzero", self.id)));
                }
                Probe::shear(self.center, self.eta, [a[0] / n, a[1] / n, a[2] / n])
            }
            ProbeKindConfig::Pressure => Probe::pressure(self.center, self.eta),
            ProbeKindConfig::Heat => Probe::heat(self.center, self.eta),
        };
        r.map_err(|e| CliError::validation(format!("probe {}: {e}", self.id)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModeConfig {
    Tau,
    Time { horizon: f64, n_steps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Geometric,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    #[serde(default = "default_spacing")]
    pub spacing: Spacing,
}

fn default_spacing() -> Spacing {
    Spacing::Geometric
}

impl Default for TauGrid {
    fn default() -> Self {
        TauGrid { min: 4.0, max: 10.0, count: 13, spacing: Spacing::Geometric }
    }
}

impl TauGrid {
    pub fn values(&self) -> Vec<f64> {
        let n = self.count;
        (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                if i == n - 1 {
                    return self.max;
                }
                match self.spacing {
                    Spacing::Geometric => self.min * (self.max / self.min).powf(t),
                    Spacing::Linear => self.min + (self.max - self.min) * t,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnclosureConfig {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub grid_n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub material: MaterialConfig,
    #[serde(default)]
    pub scene: SceneConfig,
    #[serde(default)]
    pub probes: Vec<ProbeConfig>,
    #[serde(default = "default_mode")]
    pub mode: ModeConfig,
    #[serde(default)]
    pub tau_grid: TauGrid,
    #[serde(default = "default_refinement")]
    pub refinement: u32,
    #[serde(default)]
    pub fit_window: Option<[f64; 2]>,
    #[serde(default)]
    pub localized_m: Option<f64>,
    /// Distances tested against the finite-horizon threshold in time mode.
    #[serde(default)]
    pub candidate_distances: Vec<f64>,
    /// Box and resolution of the enclosure grid; defaults to the bounding
    /// box of the body with 32 points per axis.
    #[serde(default)]
    pub enclosure: Option<EnclosureConfig>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
}

fn default_mode() -> ModeConfig {
    ModeConfig::Tau
}

fn default_refinement() -> u32 {
    2
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            material: MaterialConfig::default(),
            scene: SceneConfig::default(),
            probes: Vec::new(),
            mode: ModeConfig::Tau,
            tau_grid: TauGrid::default(),
            refinement: 2,
            fit_window: None,
            localized_m: None,
            candidate_distances: Vec::new(),
            enclosure: None,
            output_dir: default_output(),
            seed: 0,
            workers: None,
        }
    }
}

/// The benchmark: unit ball, concentric cavity of radius 0.3, shear probe at
/// `(2, 0, 0)` with `η = 0.2`, τ mode on 13 geometric points in `[4, 10]`.
pub fn benchmark_config() -> ExperimentConfig {
    ExperimentConfig {
        probes: vec![ProbeConfig {
            id: "shear".into(),
            kind: ProbeKindConfig::Shear,
            center: [2.0, 0.0, 0.0],
            eta: 0.2,
            direction: Some([0.0, 0.0, 1.0]),
        }],
        ..ExperimentConfig::default()
    }
}

/// Validated view of a config with core types built.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub material: Material,
    pub probes: Vec<(String, Probe)>,
    pub taus: Vec<f64>,
    pub warnings: Vec<String>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
    }

    pub fn scene_for(&self, probe: &Probe) -> Scene {
        Scene { outer: self.scene.outer.ball(), cavity: self.scene.cavity.map(|c| c.ball()), probe_ball: probe.ball() }
    }

    /// Scene used for meshing. The mesh does not depend on the probe ball;
    /// without probes a ball far from the body stands in for it.
    pub fn mesh_scene(&self) -> Result<Scene, CliError> {
        let probe = match self.probes.first() {
            Some(p) => p.build()?,
            None => {
                let o = self.scene.outer;
                Probe::heat([o.center[0] + 4.0 * o.radius, o.center[1], o.center[2]], 0.5 * o.radius).map_err(|e| CliError::core(Stage::Validate, e))?
            }
        };
        Ok(self.scene_for(&probe))
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let material = self.material.build()?;
        let g = &self.tau_grid;
        if !(g.min > 0.0 && g.min < g.max && g.max.is_finite()) {
            return Err(CliError::validation("tau grid needs 0 < min < max"));
        }
        if g.count < 5 {
            return Err(CliError::validation("tau grid needs at least 5 points"));
        }
        if let Some([a, b]) = self.fit_window {
            if !(a < b) {
                return Err(CliError::validation("fit window needs min < max"));
            }
        }
        if let Some(m) = self.localized_m {
            if !(m > 0.0) {
                return Err(CliError::validation("localized_m must be positive"));
            }
        }
        if let ModeConfig::Time { horizon, n_steps } = self.mode {
            if !(horizon > 0.0) || n_steps < 16 {
                return Err(CliError::validation("time mode needs horizon > 0 and n_steps >= 16"));
            }
        }
        if let Some(e) = &self.enclosure {
            if e.grid_n < 16 || (0..3).any(|i| !(e.lo[i] < e.hi[i])) {
                return Err(CliError::validation("enclosure box needs lo < hi and grid_n >= 16"));
            }
        }
        let mut ids = std::collections::BTreeSet::new();
        let mut probes = Vec::new();
        let mut warnings = Vec::new();
        for pc in &self.probes {
            if !ids.insert(pc.id.clone()) {
                return Err(CliError::validation(format!("duplicate probe id {}", pc.id)));
            }
            if pc.id.is_empty() || !pc.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                return Err(CliError::validation(format!("probe id {:?} must be nonempty [A-Za-z0-9_-]", pc.id)));
            }
            let probe = pc.build()?;
            let scene = self.scene_for(&probe);
            scene.validate().map_err(|e| CliError::validation(format!("probe {}: {e}", pc.id)))?;
            let (d_db, d_ob) = set_distance(&scene).map_err(|e| CliError::validation(format!("probe {}: {e}", pc.id)))?;
            if let (ModeConfig::Time { horizon, .. }, Some(d_db)) = (self.mode, d_db) {
                if let Some(bound) = horizon_bound(probe.kind, &material, d_db, d_ob) {
                    if horizon <= bound {
                        warnings.push(format!(
                            "probe {}: horizon {horizon} does not exceed s(2 dist(D,B) - dist(Omega,B)) = {bound:.6}; the indicator may not recover the distance",
                            pc.id
                        ));
                    }
                }
            }
            probes.push((pc.id.clone(), probe));
        }
        if probes.is_empty() {
            warnings.push("no probes configured; nothing to compute".into());
        }
        Ok(Resolved { material, probes, taus: g.values(), warnings })
    }
}

/// Lower bound on the horizon above which the wave indicators recover
/// `dist(D,B)`; heat probes carry no such restriction.
pub fn horizon_bound(kind: ProbeKind, mat: &Material, d_db: f64, d_ob: f64) -> Option<f64> {
    match kind {
        ProbeKind::Heat => None,
        k => Some(k.slowness(mat) * (2.0 * d_db - d_ob)),
    }
}
