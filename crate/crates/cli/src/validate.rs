//! Closed-form-vs-oracle comparisons, the elastic identity battery and, at
//! the full level, the lower-bound sweeps on the configured scene.

use crate::config::ExperimentConfig;
use crate::error::{CliError, Stage};
use crate::output::ValidationRow;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thermo_enclosure_core::bounds::{bound_check_sweep, BoundLemma, BoundParams, BoundRow};
use thermo_enclosure_core::indicator::elastic_identity_check;
use thermo_enclosure_core::oracle::{oracle_quadrature, OracleTarget};
use thermo_enclosure_core::probe::{moment_scalar, moment_vector, probe_field_tau};
use thermo_enclosure_core::vec3::{self, V3};
use thermo_enclosure_core::{Ball, Material, Probe, ProbeKind};

pub const ORACLE_TOL: f64 = 1e-8;
pub const ORACLE_CASES: usize = 200;
pub const IDENTITY_MATRICES: usize = 1000;
pub const IDENTITY_PAIRS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Quick,
    Full,
}

#[derive(Debug, Clone)]
pub struct BoundSweep {
    pub lemma: BoundLemma,
    pub rows: Vec<BoundRow>,
    pub passed: bool,
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub rows: Vec<ValidationRow>,
    pub oracle_failures: usize,
    pub max_oracle_rel_err: f64,
    pub identity_failures: usize,
    pub max_identity_rel_err: f64,
    pub bounds: Vec<BoundSweep>,
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
struct Case {
    target: OracleTarget,
    eta: f64,
    tau: f64,
    x: V3,
    p: V3,
    a: V3,
    mat: Material,
}

fn unit(rng: &mut ChaCha8Rng) -> V3 {
    let z: f64 = rng.gen_range(-1.0..1.0);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let s = (1.0 - z * z).sqrt();
    [s * phi.cos(), s * phi.sin(), z]
}

const TARGETS: [OracleTarget; 8] = [
    OracleTarget::Scalar(0),
    OracleTarget::Scalar(1),
    OracleTarget::Scalar(2),
    OracleTarget::Vector(0),
    OracleTarget::Vector(1),
    OracleTarget::Probe(ProbeKind::Shear),
    OracleTarget::Probe(ProbeKind::Pressure),
    OracleTarget::Probe(ProbeKind::Heat),
];

/// `n` admissible inputs cycling through the targets: `τη` log-uniform in
/// `[0.01, 50]`, `|x − p| ∈ [1.05η, 4η]`, random materials for the probes.
fn sample_cases(seed: u64, n: usize) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let eta = rng.gen_range(0.1..1.0);
            let tau = 10f64.powf(rng.gen_range(-2.0..50f64.log10())) / eta;
            let dist = rng.gen_range(1.05..4.0) * eta;
            let p = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let x = vec3::add(p, vec3::scale(unit(&mut rng), dist));
            let a = unit(&mut rng);
            let mat = Material::new(
                rng.gen_range(0.5..2.0),
                rng.gen_range(0.5..2.0),
                rng.gen_range(-0.2..2.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.5..2.0),
                rng.gen_range(0.5..2.0),
                rng.gen_range(0.5..2.0),
            )
            .expect("sampled material is admissible");
            Case { target: TARGETS[i % TARGETS.len()], eta, tau, x, p, a, mat }
        })
        .collect()
}

fn rel_vec(a: V3, b: V3) -> f64 {
    let nb = vec3::norm(b);
    let d = vec3::norm(vec3::sub(a, b));
    if nb == 0.0 {
        d
    } else {
        d / nb
    }
}

fn run_case(c: &Case) -> Result<ValidationRow, thermo_enclosure_core::Error> {
    let ball = Ball::new(c.p, c.eta);
    let dist = vec3::dist(c.x, c.p);
    let (kind, j, probe) = match c.target {
        OracleTarget::Scalar(j) => ("moment_scalar", j, Probe::heat(c.p, c.eta)?),
        OracleTarget::Vector(j) => ("moment_vector", j, Probe::heat(c.p, c.eta)?),
        OracleTarget::Probe(ProbeKind::Shear) => ("probe_shear", 0, Probe::shear(c.p, c.eta, c.a)?),
        OracleTarget::Probe(ProbeKind::Pressure) => ("probe_pressure", 0, Probe::pressure(c.p, c.eta)?),
        OracleTarget::Probe(ProbeKind::Heat) => ("probe_heat", 0, Probe::heat(c.p, c.eta)?),
    };
    let or = oracle_quadrature(c.target, c.x, c.tau, &probe, &c.mat)?;
    let (cf, ov, rel) = match c.target {
        OracleTarget::Scalar(j) => {
            let v = moment_scalar(j, c.x, c.tau, &ball)?;
            let o = or.value.scalar();
            (v, o, (v - o).abs() / o.abs())
        }
        OracleTarget::Vector(j) => {
            let v = moment_vector(j, c.x, c.tau, &ball)?;
            let o = or.value.vector();
            (vec3::norm(v), vec3::norm(o), rel_vec(v, o))
        }
        OracleTarget::Probe(ProbeKind::Heat) => {
            let (_, th) = probe_field_tau(&probe, &c.mat, c.x, c.tau)?;
            let o = or.value.scalar();
            (th, o, (th - o).abs() / o.abs())
        }
        OracleTarget::Probe(_) => {
            let (w, _) = probe_field_tau(&probe, &c.mat, c.x, c.tau)?;
            let o = or.value.vector();
            (vec3::norm(w), vec3::norm(o), rel_vec(w, o))
        }
    };
    Ok(ValidationRow { kind: kind.into(), j, tau: c.tau, eta: c.eta, dist, closed_form: cf, oracle: ov, rel_err: rel })
}

/// Oracle comparisons on `n` seeded random inputs, in input order.
pub fn oracle_rows(seed: u64, n: usize) -> Result<Vec<ValidationRow>, CliError> {
    sample_cases(seed, n).par_iter().map(|c| run_case(c).map_err(|e| CliError::core(Stage::Validate, e))).collect()
}

/// Worst relative identity error and inequality failures per `(λ, μ)` pair.
pub fn identity_rows(seed: u64, pairs: usize, matrices: usize) -> Result<Vec<ValidationRow>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut rows = Vec::with_capacity(pairs);
    for pair in 0..pairs {
        let mu: f64 = 10f64.powf(rng.gen_range(-2.0..1.0));
        // λ spans (−2μ/3, 10μ)
        let lambda = -2.0 * mu / 3.0 + mu * rng.gen_range(1e-3..10.0 + 2.0 / 3.0);
        let (mut worst, mut wl, mut wr, mut ineq_fail) = (0.0f64, 0.0, 0.0, 0usize);
        for _ in 0..matrices {
            let mut a = [[0.0; 3]; 3];
            for row in a.iter_mut() {
                for v in row.iter_mut() {
                    *v = rng.gen_range(-10.0..10.0);
                }
            }
            let (l, r, ok) = elastic_identity_check(&a, lambda, mu).map_err(|e| CliError::core(Stage::Validate, e))?;
            let s = vec3::sym(&a);
            let tr = vec3::trace(&a);
            let scale = 2.0 * mu * vec3::ddot(&s, &s) + lambda.abs() * tr * tr;
            let rel = (l - r).abs() / scale;
            if rel >= worst {
                worst = rel;
                wl = l;
                wr = r;
            }
            let c = 2.0 * (1.0 / (2.0 * mu)).max(1.0 / (3.0 * lambda + 2.0 * mu));
            if !ok || vec3::ddot(&s, &s) > c * r * (1.0 + 1e-14) {
                ineq_fail += 1;
            }
        }
        rows.push(ValidationRow {
            kind: if ineq_fail == 0 { "identity".into() } else { "identity_inequality_failed".into() },
            j: pair,
            tau: lambda,
            eta: mu,
            dist: f64::NAN,
            closed_form: wl,
            oracle: wr,
            rel_err: worst,
        });
    }
    Ok(rows)
}

/// Bound parameters for the scene: the first probe (or the benchmark probe)
/// and the point of the outer boundary nearest to it.
pub fn bound_params(cfg: &ExperimentConfig) -> Result<BoundParams, CliError> {
    let material = cfg.material.build()?;
    let (p, eta, a) = match cfg.probes.first() {
        Some(pc) => (pc.center, pc.eta, pc.direction.unwrap_or([0.0, 0.0, 1.0])),
        None => ([2.0, 0.0, 0.0], 0.2, [0.0, 0.0, 1.0]),
    };
    let o = cfg.scene.outer;
    let dir = vec3::normalize(vec3::sub(p, o.center));
    let x = vec3::add(o.center, vec3::scale(dir, o.radius));
    Ok(BoundParams {
        material,
        p,
        eta,
        a,
        x: Some(x),
        r_max: Some(2.0 * vec3::dist(x, p)),
        cavity: cfg.scene.cavity.map(|c| c.ball()),
    })
}

fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

/// Every lemma sweep on `[2, 50]` (wave) or `[2, 200]` (heat): ratios must
/// be positive with infimum at least a tenth of the first value. Sweeps
/// whose right-hand side vanishes on the configured geometry pass trivially.
pub fn bound_sweeps(params: &BoundParams) -> Result<Vec<BoundSweep>, CliError> {
    let lemmas: Vec<BoundLemma> = BoundLemma::ALL
        .iter()
        .copied()
        .filter(|l| params.cavity.is_some() || !matches!(l, BoundLemma::LA1 | BoundLemma::LA2 | BoundLemma::P25iii | BoundLemma::P25iv | BoundLemma::P25v))
        .collect();
    lemmas
        .par_iter()
        .map(|&lemma| {
            let grid = if lemma.is_heat() { geometric(2.0, 200.0, 16) } else { geometric(2.0, 50.0, 16) };
            let rows = bound_check_sweep(lemma, params, &grid).map_err(|e| CliError::stage(Stage::Validate, format!("{}: {e}", lemma.id())))?;
            let vals: Vec<Option<f64>> = rows.iter().map(|r| r.ratio.value()).collect();
            let passed = if vals.iter().all(|v| v.is_none()) {
                true
            } else {
                let v: Vec<f64> = vals.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
                let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
                v.iter().all(|x| *x > 0.0 && x.is_finite()) && min >= 0.1 * v[0]
            };
            Ok(BoundSweep { lemma, rows, passed })
        })
        .collect()
}

pub fn validate(cfg: &ExperimentConfig, level: Level) -> Result<ValidationReport, CliError> {
    // scene invariants before any numerics
    cfg.resolve()?;
    let mut rep = ValidationReport::default();
    let oracle = oracle_rows(cfg.seed, ORACLE_CASES)?;
    for r in &oracle {
        rep.max_oracle_rel_err = rep.max_oracle_rel_err.max(r.rel_err);
        if !(r.rel_err <= ORACLE_TOL) {
            rep.oracle_failures += 1;
            rep.failures.push(format!("{} j={} tau={} eta={} dist={}: rel_err {:e}", r.kind, r.j, r.tau, r.eta, r.dist, r.rel_err));
        }
    }
    let ids = identity_rows(cfg.seed, IDENTITY_PAIRS, IDENTITY_MATRICES)?;
    for r in &ids {
        rep.max_identity_rel_err = rep.max_identity_rel_err.max(r.rel_err);
        if !(r.rel_err <= 1e-13) || r.kind != "identity" {
            rep.identity_failures += 1;
            rep.failures.push(format!("{} lambda={} mu={}: rel_err {:e}", r.kind, r.tau, r.eta, r.rel_err));
        }
    }
    rep.rows = oracle;
    rep.rows.extend(ids);
    if level == Level::Full {
        rep.bounds = bound_sweeps(&bound_params(cfg)?)?;
        for b in &rep.bounds {
            if !b.passed {
                rep.failures.push(format!("{}: ratios not positive-bounded: {:?}", b.lemma.id(), b.rows.iter().map(|r| r.ratio.value()).collect::<Vec<_>>()));
            }
        }
    }
    Ok(rep)
}
