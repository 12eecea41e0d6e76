//! Brute-force quadrature over the probe ball, independent of the closed forms.
//!
//! Spherical coordinates centred at `p` with the polar axis along `x − p`;
//! radial panels are graded geometrically toward `r = η` and polar panels
//! toward `θ = 0`, where the kernel concentrates. Every panel carries an
//! `n`-point Gauss–Legendre rule and `n` doubles until two successive levels
//! agree.

use crate::error::{invalid, Error, Result};
use crate::material::Material;
use crate::probe::{Ball, Probe, ProbeKind};
use crate::quadrature::gauss_legendre;
use crate::vec3::{self, V3};
use alloc::vec::Vec;
use core::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleTarget {
    /// `I_j`, `j ∈ {0,1,2}`
    Scalar(usize),
    /// `I⃗_j`, `j ∈ {0,1}`
    Vector(usize),
    /// τ-domain probe field of the given kind
    Probe(ProbeKind),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleValue {
    Scalar(f64),
    Vector(V3),
}

impl OracleValue {
    pub fn scalar(&self) -> f64 {
        match self {
            OracleValue::Scalar(v) => *v,
            OracleValue::Vector(v) => vec3::norm(*v),
        }
    }

    pub fn vector(&self) -> V3 {
        match self {
            OracleValue::Scalar(v) => [*v, 0.0, 0.0],
            OracleValue::Vector(v) => *v,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OracleResult {
    pub value: OracleValue,
    /// Relative difference between the last two refinement levels.
    pub agreement: f64,
}

/// Panel breakpoints on `[0, len]` graded geometrically toward `len`
/// (`toward_end`) or toward `0`, down to width `min_width`.
fn graded(len: f64, min_width: f64, toward_end: bool) -> Vec<f64> {
    let mut gaps = Vec::new();
    let mut w = len;
    while w > min_width && gaps.len() < 80 {
        w *= 0.5;
        gaps.push(w);
    }
    // distances from the graded end: len, len/2, ..., smallest, 0
    let mut d: Vec<f64> = core::iter::once(len).chain(gaps.iter().copied()).collect();
    d.push(0.0);
    let mut pts: Vec<f64> = if toward_end { d.iter().map(|v| len - v).collect() } else { d };
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    pts
}

/// `∫_B kernel(|x-y|) density(|y-p|) dy` and the same with the extra
/// factor `(y-p)/|y-p|`, at fixed points per panel.
fn ball_sum<K, D>(x: V3, ball: &Ball, kernel: &K, density: &D, scale: f64, n: usize) -> (f64, V3)
where
    K: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let p = ball.center;
    let eta = ball.radius;
    let dvec = vec3::sub(x, p);
    let xi = vec3::norm(dvec);
    let e3 = vec3::scale(dvec, 1.0 / xi);
    let e1 = vec3::orthonormal_to(e3);
    let e2 = vec3::cross(e3, e1);
    let gap = (xi - eta).max(1e-300);
    let lr = (0.05 * scale.min(gap).min(eta)).max(eta * 1e-14);
    let rb = graded(eta, lr, true);
    let umin = (0.05 * (gap * gap / (xi * eta)).min(scale * gap / (xi * eta)).min(1.0)).max(1e-15);
    let ub = graded(2.0, umin, false);
    let (gx, gw) = gauss_legendre(n);
    let nphi = 8;
    let (mut cphi, mut sphi) = ([0.0; 8], [0.0; 8]);
    for k in 0..nphi {
        let ang = 2.0 * PI * (k as f64 + 0.5) / nphi as f64;
        cphi[k] = libm::cos(ang);
        sphi[k] = libm::sin(ang);
    }
    let wphi = 2.0 * PI / nphi as f64;
    let mut s = 0.0;
    let mut v = [0.0; 3];
    for rp in rb.windows(2) {
        let (ra, rbb) = (rp[0], rp[1]);
        for (xr, wr) in gx.iter().zip(&gw) {
            let r = 0.5 * (ra + rbb) + 0.5 * (rbb - ra) * xr;
            let wr = 0.5 * (rbb - ra) * wr;
            let dens = density(r);
            if dens == 0.0 {
                continue;
            }
            let xr_gap = xi - r;
            for up in ub.windows(2) {
                let (ua, ubb) = (up[0], up[1]);
                for (xu, wu) in gx.iter().zip(&gw) {
                    let u = 0.5 * (ua + ubb) + 0.5 * (ubb - ua) * xu;
                    let wu = 0.5 * (ubb - ua) * wu;
                    let d = libm::sqrt(xr_gap * xr_gap + 2.0 * xi * r * u);
                    let base = wr * wu * r * r * dens * kernel(d);
                    let cost = 1.0 - u;
                    let sint = libm::sqrt((u * (2.0 - u)).max(0.0));
                    for k in 0..nphi {
                        let w = base * wphi;
                        s += w;
                        let dir = [sint * cphi[k], sint * sphi[k], cost];
                        for c in 0..3 {
                            v[c] += w * (dir[0] * e1[c] + dir[1] * e2[c] + dir[2] * e3[c]);
                        }
                    }
                }
            }
        }
    }
    (s, v)
}

/// Converged `(scalar, vector)` ball integrals; see [`ball_sum`].
///
/// `scale` is the length over which the kernel varies appreciably.
pub fn ball_convolution<K, D>(x: V3, ball: &Ball, kernel: K, density: D, scale: f64, tol: f64) -> Result<(f64, V3, f64)>
where
    K: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    if !(vec3::dist(x, ball.center) > ball.radius) {
        return Err(Error::InsideBall);
    }
    let mut prev = ball_sum(x, ball, &kernel, &density, scale, 8);
    let mut agreement = f64::INFINITY;
    for &n in &[16usize, 32, 48] {
        let cur = ball_sum(x, ball, &kernel, &density, scale, n);
        let mag = libm::fabs(cur.0).max(vec3::norm(cur.1)).max(1e-300);
        let diff = libm::fabs(cur.0 - prev.0).max(vec3::norm(vec3::sub(cur.1, prev.1)));
        agreement = diff / mag;
        prev = cur;
        if agreement <= tol {
            return Ok((prev.0, prev.1, agreement));
        }
    }
    Err(Error::NotConverged { achieved: agreement })
}

/// Brute-force evaluation of a moment integral or τ-domain probe field.
pub fn oracle_quadrature(target: OracleTarget, x: V3, tau: f64, probe: &Probe, mat: &Material) -> Result<OracleResult> {
    if !(tau > 0.0) {
        return invalid("tau must be positive");
    }
    let ball = probe.ball();
    let eta = probe.eta;
    let yukawa = |kappa: f64| move |d: f64| libm::exp(-kappa * d) / d;
    let gdens = move |r: f64| if r < eta { (eta - r) * (eta - r) } else { 0.0 };
    let grad_dens = move |r: f64| if r < eta { -2.0 * (eta - r) } else { 0.0 };
    let tol = 1e-10;
    let (value, agreement) = match target {
        OracleTarget::Scalar(j) => {
            if j > 2 {
                return invalid("scalar moment index must be 0, 1 or 2");
            }
            let (s, _, ag) = ball_convolution(x, &ball, yukawa(tau), |r| libm::pow(r, j as f64), 1.0 / tau, tol)?;
            (OracleValue::Scalar(s), ag)
        }
        OracleTarget::Vector(j) => {
            if j > 1 {
                return invalid("vector moment index must be 0 or 1");
            }
            let (_, v, ag) = ball_convolution(x, &ball, yukawa(tau), |r| libm::pow(r, j as f64), 1.0 / tau, tol)?;
            (OracleValue::Vector(v), ag)
        }
        OracleTarget::Probe(kind) => match kind {
            ProbeKind::Shear | ProbeKind::Pressure => {
                let (coef, kappa) = if kind == ProbeKind::Shear {
                    (mat.rho / mat.mu, tau * mat.shear_slowness())
                } else {
                    (mat.rho / (mat.lambda + 2.0 * mat.mu), tau * mat.pressure_slowness())
                };
                let (_, v, ag) = ball_convolution(x, &ball, yukawa(kappa), grad_dens, 1.0 / kappa, tol)?;
                let v = vec3::scale(v, coef / (4.0 * PI));
                let out = if kind == ProbeKind::Shear {
                    let a = probe.a.ok_or_else(|| Error::Invalid("shear probe requires a direction a".into()))?;
                    vec3::cross(v, a)
                } else {
                    v
                };
                (OracleValue::Vector(out), ag)
            }
            ProbeKind::Heat => {
                let sigma = libm::sqrt(tau) * mat.heat_slowness();
                let (s, _, ag) = ball_convolution(x, &ball, yukawa(sigma), gdens, 1.0 / sigma, tol)?;
                (OracleValue::Scalar(s * mat.c / (4.0 * PI * mat.k)), ag)
            }
        },
    };
    Ok(OracleResult { value, agreement })
}

/// 3D Gaussian convolution of the heat-probe initial data: `Θ(x,t)`.
pub fn heat_time_oracle(probe: &Probe, mat: &Material, x: V3, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return invalid("time must be positive");
    }
    let eta = probe.eta;
    let four_kt = 4.0 * mat.diffusivity() * t;
    let norm = libm::pow(PI * four_kt, -1.5);
    let kernel = move |d: f64| norm * libm::exp(-d * d / four_kt);
    let gdens = move |r: f64| if r < eta { (eta - r) * (eta - r) } else { 0.0 };
    let (s, _, _) = ball_convolution(x, &probe.ball(), kernel, gdens, libm::sqrt(four_kt), 1e-11)?;
    Ok(s)
}
