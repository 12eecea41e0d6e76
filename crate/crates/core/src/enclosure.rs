//! Distance extraction from indicator sweeps, finite-horizon threshold
//! classification and the multi-probe enclosure grid.

use crate::error::{Error, Result};
use crate::indicator::{IndicatorSweep, SweepMode};
use crate::material::Material;
use crate::probe::{Probe, ProbeKind};
use crate::vec3::{self, V3};
use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FitMode {
    WaveShear,
    WavePressure,
    Heat,
}

impl FitMode {
    pub fn for_probe(kind: ProbeKind) -> FitMode {
        match kind {
            ProbeKind::Shear => FitMode::WaveShear,
            ProbeKind::Pressure => FitMode::WavePressure,
            ProbeKind::Heat => FitMode::Heat,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FitMode::WaveShear => "wave-shear",
            FitMode::WavePressure => "wave-pressure",
            FitMode::Heat => "heat",
        }
    }

    pub fn from_name(s: &str) -> Option<FitMode> {
        [FitMode::WaveShear, FitMode::WavePressure, FitMode::Heat].into_iter().find(|m| m.name() == s)
    }

    /// Slowness `s` with `log I ≈ −2s·dist·τ` (wave) or `−2s·dist·√τ` (heat).
    pub fn slowness(&self, mat: &Material) -> f64 {
        match self {
            FitMode::WaveShear => mat.shear_slowness(),
            FitMode::WavePressure => mat.pressure_slowness(),
            FitMode::Heat => mat.heat_slowness(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceEstimate {
    pub probe_id: String,
    pub mode: FitMode,
    pub p: V3,
    pub eta: f64,
    /// Coefficient of `τ` (or `√τ`).
    pub alpha: f64,
    /// Coefficient of `log τ`.
    pub beta: f64,
    pub gamma: f64,
    pub d_hat: f64,
    pub stderr: f64,
    pub window: (f64, f64),
    pub n_used: usize,
    pub n_skipped: usize,
}

/// Least squares `min ‖A c − y‖` for a tall matrix with three columns by
/// Householder QR. Returns the coefficients, the residual sum of squares and
/// the diagonal of `(AᵀA)⁻¹`.
fn lstsq3(rows: &[[f64; 3]], y: &[f64]) -> Result<([f64; 3], f64, [f64; 3])> {
    let m = rows.len();
    let mut a: Vec<[f64; 3]> = rows.to_vec();
    let mut b = y.to_vec();
    for k in 0..3 {
        let norm = libm::sqrt((k..m).map(|i| a[i][k] * a[i][k]).sum::<f64>());
        if norm == 0.0 {
            return Err(Error::Extraction("rank-deficient design matrix".into()));
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..m).map(|i| a[i][k]).collect();
        v[0] -= alpha;
        let vn: f64 = v.iter().map(|x| x * x).sum();
        for j in k..3 {
            let s: f64 = (k..m).map(|i| v[i - k] * a[i][j]).sum::<f64>() * 2.0 / vn;
            for i in k..m {
                a[i][j] -= s * v[i - k];
            }
        }
        let s: f64 = (k..m).map(|i| v[i - k] * b[i]).sum::<f64>() * 2.0 / vn;
        for i in k..m {
            b[i] -= s * v[i - k];
        }
    }
    let scale = (0..3).map(|k| libm::fabs(a[k][k])).fold(0.0, f64::max);
    if (0..3).any(|k| libm::fabs(a[k][k]) <= 1e-12 * scale) {
        return Err(Error::Extraction("rank-deficient design matrix".into()));
    }
    let mut c = [0.0; 3];
    for k in (0..3).rev() {
        let mut s = b[k];
        for j in k + 1..3 {
            s -= a[k][j] * c[j];
        }
        c[k] = s / a[k][k];
    }
    let rss: f64 = b[3..].iter().map(|x| x * x).sum();
    // R⁻¹ (upper triangular), diag((RᵀR)⁻¹) = row norms² of R⁻¹
    let mut rinv = [[0.0; 3]; 3];
    for j in 0..3 {
        rinv[j][j] = 1.0 / a[j][j];
        for i in (0..j).rev() {
            let mut s = 0.0;
            for k in i + 1..=j {
                s += a[i][k] * rinv[k][j];
            }
            rinv[i][j] = -s / a[i][i];
        }
    }
    let mut diag = [0.0; 3];
    for i in 0..3 {
        diag[i] = (0..3).map(|j| rinv[i][j] * rinv[i][j]).sum();
    }
    Ok((c, rss, diag))
}

/// Fit `log I = γ + β log τ + α τ` (wave) or `γ + β log τ + α √τ` (heat) on
/// raw `(τ, I)` data; non-positive values are skipped and counted.
pub fn fit_distance_data(taus: &[f64], values: &[f64], mode: FitMode, mat: &Material, window: Option<(f64, f64)>) -> Result<DistanceEstimate> {
    if taus.len() != values.len() {
        return Err(Error::Invalid("tau and value lists differ in length".into()));
    }
    let (lo, hi) = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let mut rows = Vec::new();
    let mut y = Vec::new();
    let mut skipped = 0;
    let (mut wlo, mut whi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (&t, &v) in taus.iter().zip(values) {
        if !(t >= lo && t <= hi) {
            continue;
        }
        if !(v > 0.0) || !v.is_finite() {
            skipped += 1;
            continue;
        }
        let z = if mode == FitMode::Heat { libm::sqrt(t) } else { t };
        rows.push([1.0, libm::log(t), z]);
        y.push(libm::log(v));
        wlo = wlo.min(t);
        whi = whi.max(t);
    }
    if rows.len() < 5 {
        return Err(Error::Extraction(alloc::format!("only {} positive indicator values in the window (need 5)", rows.len())));
    }
    let (c, rss, diag) = lstsq3(&rows, &y)?;
    let alpha = c[2];
    if !(alpha < 0.0) {
        return Err(Error::Extraction("no decay detected (alpha >= 0)".into()));
    }
    let dof = rows.len() - 3;
    let sigma2 = if dof > 0 { rss / dof as f64 } else { 0.0 };
    let se_alpha = libm::sqrt(sigma2 * diag[2]);
    let s = mode.slowness(mat);
    Ok(DistanceEstimate {
        probe_id: String::new(),
        mode,
        p: [0.0; 3],
        eta: 0.0,
        alpha,
        beta: c[1],
        gamma: c[0],
        d_hat: -alpha / (2.0 * s),
        stderr: se_alpha / (2.0 * s),
        window: (wlo, whi),
        n_used: rows.len(),
        n_skipped: skipped,
    })
}

/// Indicator column fitted for a probe: `I¹` for wave probes, `I²` for the
/// heat probe.
pub fn fitted_values(sweep: &IndicatorSweep) -> Vec<f64> {
    sweep
        .points
        .iter()
        .map(|p| if sweep.probe.kind == ProbeKind::Heat { p.i2 } else { p.i1 })
        .collect()
}

pub fn fit_distance(sweep: &IndicatorSweep, mode: FitMode, window: Option<(f64, f64)>) -> Result<DistanceEstimate> {
    sweep.validate()?;
    let taus: Vec<f64> = sweep.points.iter().map(|p| p.tau).collect();
    let mut est = fit_distance_data(&taus, &fitted_values(sweep), mode, &sweep.material, window)?;
    est.p = sweep.probe.p;
    est.eta = sweep.probe.eta;
    Ok(est)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Grows,
    Decays,
    Borderline,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Grows => "grows",
            Verdict::Decays => "decays",
            Verdict::Borderline => "borderline",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateVerdict {
    pub distance: f64,
    /// Behaviour of `e^{τT} I` expected if this were the true distance.
    pub predicted: Verdict,
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    pub verdict: Verdict,
    /// Exponential rate of `y(τ) = τT + log I` on the last third.
    pub rate: f64,
    pub rate_stderr: f64,
    /// Half-width of the borderline band.
    pub band: f64,
    pub horizon: f64,
    /// `T / (2s)`: the distance at which `2s·dist = T`.
    pub threshold_distance: f64,
    /// Implied bound on `2s·dist(D,B)`: `(lower, upper)`.
    pub bracket: (f64, f64),
    pub candidates: Vec<CandidateVerdict>,
}

/// Classify `y(τ) = τT + log I(τ)` on the last third of the grid. The rate
/// is the `τ` coefficient of a regression on `1, τ, log τ`, so algebraic
/// factors do not count as growth. The verdict is borderline when the rate
/// is within `max(3·stderr, 1e-6·T)` of zero.
pub fn classify_threshold_data(taus: &[f64], values: &[f64], horizon: f64, slowness: f64, candidates: &[f64]) -> Result<ThresholdReport> {
    if taus.len() != values.len() || taus.is_empty() {
        return Err(Error::Invalid("tau and value lists differ in length or are empty".into()));
    }
    if !(horizon > 0.0) {
        return Err(Error::Invalid("horizon must be positive".into()));
    }
    let n = taus.len();
    let start = n - n.div_ceil(3);
    let tail = start..n;
    if tail.len() < 4 {
        return Err(Error::Extraction("last third has fewer than 4 points".into()));
    }
    if values[tail.clone()].iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Extraction("unreliable: non-positive indicator values in the last third".into()));
    }
    let rows: Vec<[f64; 3]> = tail.clone().map(|i| [1.0, taus[i], libm::log(taus[i])]).collect();
    let y: Vec<f64> = tail.map(|i| taus[i] * horizon + libm::log(values[i])).collect();
    let (c, rss, diag) = lstsq3(&rows, &y)?;
    let dof = rows.len() - 3;
    let se = libm::sqrt(rss / dof as f64 * diag[1]);
    let band = (3.0 * se).max(1e-6 * horizon);
    let rate = c[1];
    let verdict = if libm::fabs(rate) <= band {
        Verdict::Borderline
    } else if rate > 0.0 {
        Verdict::Grows
    } else {
        Verdict::Decays
    };
    // rate ≈ T − 2s·dist
    let bracket = match verdict {
        Verdict::Grows => (0.0, horizon),
        Verdict::Decays => (horizon, f64::INFINITY),
        Verdict::Borderline => (horizon - band, horizon + band),
    };
    let threshold_distance = horizon / (2.0 * slowness);
    let candidates = candidates
        .iter()
        .map(|&d| {
            let gap = horizon - 2.0 * slowness * d;
            let predicted = if libm::fabs(gap) <= band {
                Verdict::Borderline
            } else if gap > 0.0 {
                Verdict::Grows
            } else {
                Verdict::Decays
            };
            CandidateVerdict { distance: d, predicted, consistent: predicted == verdict }
        })
        .collect();
    Ok(ThresholdReport { verdict, rate, rate_stderr: se, band, horizon, threshold_distance, bracket, candidates })
}

pub fn classify_threshold(sweep: &IndicatorSweep, material: &Material, candidates: &[f64]) -> Result<ThresholdReport> {
    sweep.validate()?;
    let horizon = match sweep.mode {
        SweepMode::Time { horizon, .. } => horizon,
        SweepMode::Tau => return Err(Error::Invalid("threshold classification needs a time-mode sweep".into())),
    };
    let taus: Vec<f64> = sweep.points.iter().map(|p| p.tau).collect();
    let s = FitMode::for_probe(sweep.probe.kind).slowness(material);
    classify_threshold_data(&taus, &fitted_values(sweep), horizon, s, candidates)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnclosureRegion {
    pub lo: V3,
    pub hi: V3,
    pub n: usize,
    /// `excluded[i + n(j + n k)]` for grid node `(i, j, k)`.
    pub excluded: Vec<bool>,
    pub estimates: Vec<DistanceEstimate>,
}

impl EnclosureRegion {
    pub fn point(&self, i: usize, j: usize, k: usize) -> V3 {
        let h = |a: usize, c: usize| self.lo[c] + (self.hi[c] - self.lo[c]) * a as f64 / (self.n - 1) as f64;
        [h(i, 0), h(j, 1), h(k, 2)]
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n * (j + self.n * k)
    }

    pub fn possible_count(&self) -> usize {
        self.excluded.iter().filter(|e| !**e).count()
    }

    pub fn cell_diagonal(&self) -> f64 {
        let d = vec3::sub(self.hi, self.lo);
        vec3::norm(d) / (self.n - 1) as f64
    }

    /// Grid points not excluded by any estimate.
    pub fn possible_points(&self) -> Vec<V3> {
        let mut out = Vec::new();
        for k in 0..self.n {
            for j in 0..self.n {
                for i in 0..self.n {
                    if !self.excluded[self.index(i, j, k)] {
                        out.push(self.point(i, j, k));
                    }
                }
            }
        }
        out
    }
}

/// Whether `x` lies in the open ball `|x − p| < η + d̂` of an estimate.
pub fn excludes(est: &DistanceEstimate, x: V3) -> bool {
    vec3::dist(x, est.p) < est.eta + est.d_hat
}

pub fn enclose(estimates: &[DistanceEstimate], lo: V3, hi: V3, grid_n: usize) -> Result<EnclosureRegion> {
    if grid_n < 16 {
        return Err(Error::Invalid("grid resolution must be at least 16 per axis".into()));
    }
    if (0..3).any(|c| !(hi[c] > lo[c])) {
        return Err(Error::Invalid("bounding box must have positive extent".into()));
    }
    if estimates.iter().any(|e| !(e.d_hat > 0.0)) {
        return Err(Error::Invalid("estimates must have positive distances".into()));
    }
    let mut region = EnclosureRegion { lo, hi, n: grid_n, excluded: alloc::vec![false; grid_n * grid_n * grid_n], estimates: estimates.to_vec() };
    for k in 0..grid_n {
        for j in 0..grid_n {
            for i in 0..grid_n {
                let x = region.point(i, j, k);
                let idx = region.index(i, j, k);
                region.excluded[idx] = estimates.iter().any(|e| excludes(e, x));
            }
        }
    }
    if region.possible_count() == 0 {
        return Err(Error::Extraction("empty possible set: the estimates are inconsistent".into()));
    }
    Ok(region)
}

/// Probe descriptor attached to an estimate.
pub fn attach_probe(mut est: DistanceEstimate, id: &str, probe: &Probe) -> DistanceEstimate {
    est.probe_id = String::from(id);
    est.p = probe.p;
    est.eta = probe.eta;
    est
}
