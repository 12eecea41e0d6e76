//! Lower-bound ratio sweeps for the pointwise and volume estimates of the
//! probe fields, and the cavity-ball quadrature they rely on.

use crate::error::{invalid, Error, Result};
use crate::material::Material;
use crate::probe::{probe_state_tau, Ball, FieldState, Probe, ProbeKind};
use crate::quadrature::gauss_legendre;
use crate::vec3::{self, V3};
use alloc::vec::Vec;
use core::f64::consts::PI;

/// `∫_D f` over a ball `D` not containing `origin`, in spherical coordinates
/// centred at `origin` with radial panels graded toward the nearest point of
/// `D`. `decay` is the rate of the dominant factor `e^{-decay·|x-origin|}`.
///
/// Refines until successive levels agree to `rel_tol`.
pub fn ball_integral<F: Fn(V3) -> f64>(origin: V3, ball: &Ball, decay: f64, f: F, rel_tol: f64) -> Result<f64> {
    let (v, agreement) = ball_integral_estimate(origin, ball, decay, f, rel_tol)?;
    if agreement <= rel_tol {
        Ok(v)
    } else {
        Err(Error::NotConverged { achieved: agreement })
    }
}

/// Like [`ball_integral`] but returns the finest estimate together with the
/// relative agreement of the last two levels instead of failing.
pub fn ball_integral_estimate<F: Fn(V3) -> f64>(origin: V3, ball: &Ball, decay: f64, f: F, rel_tol: f64) -> Result<(f64, f64)> {
    ball_integral_split(origin, ball, decay, f, rel_tol, &[])
}

/// [`ball_integral_estimate`] with extra radial breakpoints (distances from
/// `origin`) where the integrand is known to have kinks.
pub fn ball_integral_split<F: Fn(V3) -> f64>(
    origin: V3,
    ball: &Ball,
    decay: f64,
    f: F,
    rel_tol: f64,
    kinks: &[f64],
) -> Result<(f64, f64)> {
    let axis = vec3::sub(ball.center, origin);
    let l = vec3::norm(axis);
    let rd = ball.radius;
    if !(l > rd) {
        return invalid("integration origin must lie outside the ball");
    }
    let mut prev = ball_sum(origin, axis, l, rd, decay, &f, 8, kinks);
    let mut agreement = f64::INFINITY;
    for n in [16usize, 24, 32] {
        let cur = ball_sum(origin, axis, l, rd, decay, &f, n, kinks);
        agreement = libm::fabs(cur - prev) / libm::fabs(cur).max(1e-300);
        prev = cur;
        if agreement <= rel_tol || cur == 0.0 {
            return Ok((cur, if cur == 0.0 { 0.0 } else { agreement }));
        }
    }
    Ok((prev, agreement))
}

#[allow(clippy::too_many_arguments)]
fn ball_sum<F: Fn(V3) -> f64>(origin: V3, axis: V3, l: f64, rd: f64, decay: f64, f: &F, n: usize, kinks: &[f64]) -> f64 {
    let e3 = vec3::scale(axis, 1.0 / l);
    let e1 = vec3::orthonormal_to(e3);
    let e2 = vec3::cross(e3, e1);
    let (rmin, rmax) = (l - rd, l + rd);
    // radial panels: widths doubling away from rmin
    let mut breaks = alloc::vec![rmin];
    let mut w = if decay > 0.0 { (0.25 / decay).min(rmax - rmin) } else { rmax - rmin };
    while breaks[breaks.len() - 1] + w < rmax {
        let last = breaks[breaks.len() - 1];
        breaks.push(last + w);
        w *= 2.0;
    }
    breaks.push(rmax);
    breaks.extend(kinks.iter().copied().filter(|&k| k > rmin && k < rmax));
    breaks.sort_by(|a, b| a.total_cmp(b));
    breaks.dedup_by(|a, b| *a - *b < 1e-12 * rmax);
    let (gx, gw) = gauss_legendre(n);
    let nphi = 2 * n;
    let wphi = 2.0 * PI / nphi as f64;
    let dirs: Vec<(f64, f64)> =
        (0..nphi).map(|k| 2.0 * PI * k as f64 / nphi as f64).map(|a| (libm::cos(a), libm::sin(a))).collect();
    let mut total = 0.0;
    for pan in breaks.windows(2) {
        let (a, b) = (pan[0], pan[1]);
        for (xr, wr) in gx.iter().zip(&gw) {
            let r = 0.5 * (a + b) + 0.5 * (b - a) * xr;
            let wr = 0.5 * (b - a) * wr;
            let umin = ((r * r + l * l - rd * rd) / (2.0 * r * l)).clamp(-1.0, 1.0);
            for (xu, wu) in gx.iter().zip(&gw) {
                let u = 0.5 * (umin + 1.0) + 0.5 * (1.0 - umin) * xu;
                let wu = 0.5 * (1.0 - umin) * wu;
                let st = libm::sqrt((1.0 - u * u).max(0.0));
                let mut ring = 0.0;
                for &(c, s) in &dirs {
                    let mut x = origin;
                    for i in 0..3 {
                        x[i] += r * (u * e3[i] + st * (c * e1[i] + s * e2[i]));
                    }
                    ring += f(x);
                }
                total += wr * wu * r * r * wphi * ring;
            }
        }
    }
    total
}

/// Elastic energy density `2μ|Sym∇w|² + λ|∇·w|² + ρτ²|w|²`.
pub fn elastic_density(st: &FieldState, mat: &Material, tau: f64) -> f64 {
    let g = &st.grad;
    let mut sym2 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let s = 0.5 * (g[i][j] + g[j][i]);
            sym2 += s * s;
        }
    }
    let div = g[0][0] + g[1][1] + g[2][2];
    2.0 * mat.mu * sym2 + mat.lambda * div * div + mat.rho * tau * tau * vec3::dot(st.disp, st.disp)
}

/// Thermal energy density `k|∇Ξ|² + cτ|Ξ|²`.
pub fn thermal_density(st: &FieldState, mat: &Material, tau: f64) -> f64 {
    mat.k * vec3::dot(st.temp_grad, st.temp_grad) + mat.c * tau * st.temp * st.temp
}

/// Probe energies `(J, j)` over a ball-shaped cavity. Wave probes carry no
/// temperature and the heat probe no displacement, so one of the two is zero.
pub fn probe_energies(probe: &Probe, mat: &Material, cavity: &Ball, tau: f64, rel_tol: f64) -> Result<(f64, f64)> {
    let rate = 2.0 * probe_rate(probe, mat, tau);
    let heat = probe.kind == ProbeKind::Heat;
    let v = ball_integral(
        probe.p,
        cavity,
        rate,
        |x| match probe_state_tau(probe, mat, x, tau) {
            Ok(s) if heat => thermal_density(&s, mat, tau),
            Ok(s) => elastic_density(&s, mat, tau),
            Err(_) => f64::NAN,
        },
        rel_tol,
    )?;
    if v.is_nan() {
        return invalid("cavity intersects the probe ball");
    }
    Ok(if heat { (0.0, v) } else { (v, 0.0) })
}

/// Exponential decay rate of the probe field away from the ball at this τ.
pub fn probe_rate(probe: &Probe, mat: &Material, tau: f64) -> f64 {
    match probe.kind {
        ProbeKind::Heat => libm::sqrt(tau) * mat.heat_slowness(),
        k => tau * k.slowness(mat),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundLemma {
    /// Pointwise bound on the shear probe.
    L22Shear,
    /// Pointwise bound on the pressure probe.
    L22Pressure,
    /// Pointwise bound on the heat probe.
    L23Heat,
    /// Weighted volume integral with the shear angular factor.
    LA1,
    /// Unweighted volume integral.
    LA2,
    /// Shear probe energy `J`.
    P25iii,
    /// Pressure probe energy `J`.
    P25iv,
    /// Heat probe energy `j`.
    P25v,
}

impl BoundLemma {
    pub const ALL: [BoundLemma; 8] = [
        BoundLemma::L22Shear,
        BoundLemma::L22Pressure,
        BoundLemma::L23Heat,
        BoundLemma::LA1,
        BoundLemma::LA2,
        BoundLemma::P25iii,
        BoundLemma::P25iv,
        BoundLemma::P25v,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            BoundLemma::L22Shear => "L2.2-shear",
            BoundLemma::L22Pressure => "L2.2-pressure",
            BoundLemma::L23Heat => "L2.3-heat",
            BoundLemma::LA1 => "LA.1",
            BoundLemma::LA2 => "LA.2",
            BoundLemma::P25iii => "P2.5-iii",
            BoundLemma::P25iv => "P2.5-iv",
            BoundLemma::P25v => "P2.5-v",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|l| l.id() == id)
    }

    /// Whether the sweep variable enters through `√τ`.
    pub fn is_heat(&self) -> bool {
        matches!(self, BoundLemma::L23Heat | BoundLemma::P25v)
    }
}

/// Inputs of a sweep. Pointwise lemmas use `x` (and `r_max` for the shear and
/// pressure bounds); volume lemmas use `cavity`.
#[derive(Debug, Clone, Copy)]
pub struct BoundParams {
    pub material: Material,
    pub p: V3,
    pub eta: f64,
    /// Shear direction, used by the shear bounds.
    pub a: V3,
    pub x: Option<V3>,
    pub r_max: Option<f64>,
    pub cavity: Option<Ball>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundRatio {
    Value(f64),
    /// The right-hand side vanishes identically (e.g. `x − p ∥ a`).
    Trivial,
}

impl BoundRatio {
    pub fn value(&self) -> Option<f64> {
        match self {
            BoundRatio::Value(v) => Some(*v),
            BoundRatio::Trivial => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundRow {
    pub tau: f64,
    pub ratio: BoundRatio,
    /// Exponent of τ used in the ratio.
    pub power: f64,
}

const PARALLEL_TOL: f64 = 1e-6;

/// Ratio of each bound's left-hand side to its right-hand side with the
/// constant removed, on every τ of `taus`.
pub fn bound_check_sweep(lemma: BoundLemma, params: &BoundParams, taus: &[f64]) -> Result<Vec<BoundRow>> {
    params.material.validate()?;
    let mat = &params.material;
    let eta = params.eta;
    let shear = Probe::shear(params.p, eta, vec3::normalize(params.a))?;
    let pressure = Probe::pressure(params.p, eta)?;
    let heat = Probe::heat(params.p, eta)?;
    let point = || params.x.ok_or_else(|| Error::Invalid(alloc::format!("{} requires a point x", lemma.id())));
    let cavity = || params.cavity.ok_or_else(|| Error::Invalid(alloc::format!("{} requires a ball cavity D", lemma.id())));
    if let Some(d) = params.cavity {
        if !(vec3::dist(d.center, params.p) > d.radius + eta) {
            return invalid("cavity must be disjoint from the probe ball");
        }
    }
    let mut rows = Vec::with_capacity(taus.len());
    for &tau in taus {
        if !(tau > 0.0) {
            return invalid("tau must be positive");
        }
        let (ratio, power) = match lemma {
            BoundLemma::L22Shear | BoundLemma::L22Pressure => {
                let x = point()?;
                let xi = vec3::dist(x, params.p);
                if let Some(r) = params.r_max {
                    if !(r > eta) {
                        return invalid("R must exceed eta");
                    }
                    if xi > r {
                        return invalid("|x - p| exceeds R");
                    }
                }
                if lemma == BoundLemma::L22Shear {
                    let st = probe_state_tau(&shear, mat, x, tau)?;
                    let cr = vec3::norm(vec3::cross(vec3::scale(vec3::sub(x, params.p), 1.0 / xi), shear.a.unwrap()));
                    if cr < PARALLEL_TOL {
                        (BoundRatio::Trivial, 1.0)
                    } else {
                        let e = libm::exp(tau * mat.shear_slowness() * (xi - eta));
                        (BoundRatio::Value(vec3::norm(st.disp) * tau * e / cr), 1.0)
                    }
                } else {
                    let st = probe_state_tau(&pressure, mat, x, tau)?;
                    let e = libm::exp(tau * mat.pressure_slowness() * (xi - eta));
                    (BoundRatio::Value(vec3::norm(st.disp) * tau * e), 1.0)
                }
            }
            BoundLemma::L23Heat => {
                let x = point()?;
                let xi = vec3::dist(x, params.p);
                let st = probe_state_tau(&heat, mat, x, tau)?;
                let e = libm::exp(libm::sqrt(tau) * mat.heat_slowness() * (xi - eta));
                (BoundRatio::Value(st.temp * libm::pow(tau, 1.5) * e * xi), 1.5)
            }
            BoundLemma::LA1 => {
                let d = cavity()?;
                let s = mat.shear_slowness();
                let dist = vec3::dist(d.center, params.p) - d.radius - eta;
                let a = shear.a.unwrap();
                let omega0 = vec3::normalize(vec3::sub(d.center, params.p));
                let kappa = if vec3::norm(vec3::cross(omega0, a)) < PARALLEL_TOL { 3.0 } else { 2.0 };
                let rate = 2.0 * tau * s;
                // fold e^{2τs·dist} into the integrand to keep it O(1)
                let v = ball_integral(
                    params.p,
                    &d,
                    rate,
                    |y| {
                        let dv = vec3::sub(y, params.p);
                        let r = vec3::norm(dv);
                        let c = vec3::cross(vec3::scale(dv, 1.0 / r), a);
                        libm::exp(-rate * (r - eta - dist)) * vec3::dot(c, c)
                    },
                    1e-9,
                )?;
                (BoundRatio::Value(libm::pow(tau, kappa) * v), kappa)
            }
            BoundLemma::LA2 => {
                let d = cavity()?;
                let dist = vec3::dist(d.center, params.p) - d.radius - eta;
                let rate = 2.0 * tau;
                let v = ball_integral(
                    params.p,
                    &d,
                    rate,
                    |y| libm::exp(-rate * (vec3::dist(y, params.p) - eta - dist)),
                    1e-9,
                )?;
                (BoundRatio::Value(tau * tau * v), 2.0)
            }
            BoundLemma::P25iii | BoundLemma::P25iv | BoundLemma::P25v => {
                let d = cavity()?;
                let dist = vec3::dist(d.center, params.p) - d.radius - eta;
                let (probe, power) = match lemma {
                    BoundLemma::P25iii => (shear, 3.0),
                    BoundLemma::P25iv => (pressure, 2.0),
                    _ => (heat, 4.0),
                };
                let rate = probe_rate(&probe, mat, tau);
                let (bj, sj) = probe_energies(&probe, mat, &d, tau, 1e-9)?;
                let energy = if lemma == BoundLemma::P25v { sj } else { bj };
                let scale = libm::pow(tau, power) * libm::exp(2.0 * rate * dist);
                (BoundRatio::Value(scale * energy), power)
            }
        };
        rows.push(BoundRow { tau, ratio, power });
    }
    Ok(rows)
}
