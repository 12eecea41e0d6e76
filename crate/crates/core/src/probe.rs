//! Probe fields: closed-form ball moments, τ-domain probes, their
//! time-domain counterparts, and boundary tractions/fluxes.
//!
//! Every probe is generated by the radial density `g(r) = (η − r)²` on the
//! ball `B(p, η)`. Its Yukawa potential
//! `U(ξ; κ) = (1/4π) ∫_B e^{-κ|x-y|}/|x-y| g(|y-p|) dy = 2 W(κη) e^{-κξ} / (κ⁵ ξ)`
//! yields all three τ-domain probes:
//!
//! * shear: `w = (ρ/μ) ∇U(·; τ√(ρ/μ)) × a`,
//! * pressure: `w = (ρ/(λ+2μ)) ∇U(·; τ√(ρ/(λ+2μ)))`,
//! * heat: `Θ = (c/k) U(·; √τ √(c/k))`.
//!
//! These are the Laplace transforms over `t ∈ [0, ∞)` of the time-domain
//! probes evaluated by [`probe_state_time`].

use crate::error::{invalid, Error, Result};
use crate::kernels;
use crate::material::Material;
use crate::quadrature;
use crate::vec3::{self, M3, V3};
use alloc::collections::BTreeMap;
use core::cell::RefCell;
use core::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProbeKind {
    Shear,
    Pressure,
    Heat,
}

impl ProbeKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProbeKind::Shear => "shear",
            ProbeKind::Pressure => "pressure",
            ProbeKind::Heat => "heat",
        }
    }

    /// Slowness entering the decay rate of the indicator.
    pub fn slowness(&self, mat: &Material) -> f64 {
        match self {
            ProbeKind::Shear => mat.shear_slowness(),
            ProbeKind::Pressure => mat.pressure_slowness(),
            ProbeKind::Heat => mat.heat_slowness(),
        }
    }
}

/// Open ball `B(center, radius)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ball {
    pub center: V3,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: V3, radius: f64) -> Self {
        Ball { center, radius }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub kind: ProbeKind,
    pub p: V3,
    pub eta: f64,
    /// Shear direction; required for shear probes.
    pub a: Option<V3>,
}

impl Probe {
    pub fn shear(p: V3, eta: f64, a: V3) -> Result<Self> {
        let pr = Probe { kind: ProbeKind::Shear, p, eta, a: Some(a) };
        pr.validate()?;
        Ok(pr)
    }

    pub fn pressure(p: V3, eta: f64) -> Result<Self> {
        let pr = Probe { kind: ProbeKind::Pressure, p, eta, a: None };
        pr.validate()?;
        Ok(pr)
    }

    pub fn heat(p: V3, eta: f64) -> Result<Self> {
        let pr = Probe { kind: ProbeKind::Heat, p, eta, a: None };
        pr.validate()?;
        Ok(pr)
    }

    pub fn ball(&self) -> Ball {
        Ball::new(self.p, self.eta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return invalid("probe radius eta must be positive");
        }
        if self.p.iter().any(|v| !v.is_finite()) {
            return invalid("probe center must be finite");
        }
        if self.kind == ProbeKind::Shear {
            match self.a {
                None => return invalid("shear probe requires a direction a"),
                Some(a) if libm::fabs(vec3::norm(a) - 1.0) > 1e-12 => {
                    return invalid("shear direction a must be a unit vector")
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn shear_dir(&self) -> Result<V3> {
        self.a.ok_or_else(|| Error::Invalid("shear probe requires a direction a".into()))
    }
}

/// Displacement, temperature and their gradients at one point.
/// `grad[i][j] = ∂_j w_i`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldState {
    pub disp: V3,
    pub temp: f64,
    pub grad: M3,
    pub temp_grad: V3,
}

impl FieldState {
    pub fn stress(&self, mat: &Material) -> M3 {
        let div = vec3::trace(&self.grad);
        let iso = mat.lambda * div + mat.m * self.temp;
        let mut s = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                s[i][j] = mat.mu * (self.grad[i][j] + self.grad[j][i]);
            }
            s[i][i] += iso;
        }
        s
    }

    pub fn traction(&self, mat: &Material, nu: V3) -> V3 {
        vec3::mat_vec(&self.stress(mat), nu)
    }

    /// `-k ∇Θ·ν`
    pub fn flux(&self, mat: &Material, nu: V3) -> f64 {
        -mat.k * vec3::dot(self.temp_grad, nu)
    }

    pub fn div(&self) -> f64 {
        vec3::trace(&self.grad)
    }

    pub fn scaled(&self, s: f64) -> FieldState {
        let mut g = self.grad;
        for row in g.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        FieldState {
            disp: vec3::scale(self.disp, s),
            temp: self.temp * s,
            grad: g,
            temp_grad: vec3::scale(self.temp_grad, s),
        }
    }

    pub fn minus(&self, o: &FieldState) -> FieldState {
        let mut g = self.grad;
        for i in 0..3 {
            for j in 0..3 {
                g[i][j] -= o.grad[i][j];
            }
        }
        FieldState {
            disp: vec3::sub(self.disp, o.disp),
            temp: self.temp - o.temp,
            grad: g,
            temp_grad: vec3::sub(self.temp_grad, o.temp_grad),
        }
    }
}

fn check_outside(x: V3, ball: &Ball, tau: f64) -> Result<f64> {
    if !(tau > 0.0) || !tau.is_finite() {
        return invalid("tau must be positive and finite");
    }
    let xi = vec3::dist(x, ball.center);
    if !(xi > ball.radius) {
        return Err(Error::InsideBall);
    }
    Ok(xi)
}

/// `I_j(x;τ) = ∫_B e^{-τ|x-y|}/|x-y| |y-p|^j dy` for `j ∈ {0,1,2}`.
pub fn moment_scalar(j: usize, x: V3, tau: f64, ball: &Ball) -> Result<f64> {
    if j > 2 {
        return invalid("moment_scalar: j must be 0, 1 or 2");
    }
    let xi = check_outside(x, ball, tau)?;
    let eta = ball.radius;
    let s = tau * eta;
    let pw = libm::pow(eta, (j + 3) as f64);
    Ok(4.0 * PI * pw * kernels::phi_bar(j, s) * libm::exp(-tau * (xi - eta)) / xi)
}

/// `I⃗₀ = ∫_B e^{-τ|x-y|}/|x-y| (y-p)/|y-p| dy` and `I⃗₁ = ∫_B e^{-τ|x-y|}/|x-y| (y-p) dy`.
pub fn moment_vector(j: usize, x: V3, tau: f64, ball: &Ball) -> Result<V3> {
    if j > 1 {
        return invalid("moment_vector: j must be 0 or 1");
    }
    let xi = check_outside(x, ball, tau)?;
    let eta = ball.radius;
    let s = tau * eta;
    let pw = libm::pow(eta, (j + 4) as f64);
    let mag = 4.0 * PI * pw * (1.0 + tau * xi) * kernels::psi_bar(j, s) * libm::exp(-tau * (xi - eta)) / (xi * xi);
    let xh = vec3::scale(vec3::sub(x, ball.center), 1.0 / xi);
    Ok(vec3::scale(xh, mag))
}

/// Radial Yukawa potential of `(η - r)²` and its first two ξ-derivatives.
#[derive(Debug, Clone, Copy)]
struct Radial {
    u: f64,
    du: f64,
    d2u: f64,
}

fn yukawa_potential(xi: f64, kappa: f64, eta: f64) -> Radial {
    let s = kappa * eta;
    let eta5 = libm::pow(eta, 5.0);
    let u = 2.0 * eta5 * kernels::w_bar(s) * libm::exp(-kappa * (xi - eta)) / xi;
    let kx = kappa * xi;
    Radial { u, du: -u * (1.0 + kx) / xi, d2u: u * (kx * kx + 2.0 * kx + 2.0) / (xi * xi) }
}

/// Field `H(r)(x-p)×a` (shear) or `H(r)(x-p)` (pressure) with gradient.
fn radial_vector_state(kind: ProbeKind, a: Option<V3>, d: V3, r: f64, h: f64, dh: f64) -> FieldState {
    let xh = vec3::scale(d, 1.0 / r);
    let mut st = FieldState::default();
    match kind {
        ProbeKind::Shear => {
            let a = a.unwrap_or([0.0; 3]);
            let c = vec3::cross(d, a);
            st.disp = vec3::scale(c, h);
            // ∂_j [(x-p)×a]_i = ε_{ijl} a_l
            let eps_a = [[0.0, a[2], -a[1]], [-a[2], 0.0, a[0]], [a[1], -a[0], 0.0]];
            for i in 0..3 {
                for j in 0..3 {
                    st.grad[i][j] = dh * xh[j] * c[i] + h * eps_a[i][j];
                }
            }
        }
        _ => {
            st.disp = vec3::scale(d, h);
            for i in 0..3 {
                for j in 0..3 {
                    st.grad[i][j] = dh * xh[j] * d[i] + if i == j { h } else { 0.0 };
                }
            }
        }
    }
    st
}

/// τ-domain probe field with analytic gradients.
pub fn probe_state_tau(probe: &Probe, mat: &Material, x: V3, tau: f64) -> Result<FieldState> {
    probe.validate()?;
    let ball = probe.ball();
    let xi = check_outside(x, &ball, tau)?;
    let d = vec3::sub(x, probe.p);
    match probe.kind {
        ProbeKind::Shear | ProbeKind::Pressure => {
            let (coef, kappa) = if probe.kind == ProbeKind::Shear {
                (mat.rho / mat.mu, tau * mat.shear_slowness())
            } else {
                (mat.rho / (mat.lambda + 2.0 * mat.mu), tau * mat.pressure_slowness())
            };
            let rad = yukawa_potential(xi, kappa, probe.eta);
            let h = coef * rad.du / xi;
            let dh = coef * (rad.d2u / xi - rad.du / (xi * xi));
            if probe.kind == ProbeKind::Shear {
                probe.shear_dir()?;
            }
            Ok(radial_vector_state(probe.kind, probe.a, d, xi, h, dh))
        }
        ProbeKind::Heat => {
            let sigma = libm::sqrt(tau) * mat.heat_slowness();
            let rad = yukawa_potential(xi, sigma, probe.eta);
            let coef = mat.c / mat.k;
            Ok(FieldState {
                temp: coef * rad.u,
                temp_grad: vec3::scale(d, coef * rad.du / xi),
                ..FieldState::default()
            })
        }
    }
}

/// τ-domain probe `(w₀(x;τ), Θ₀₀(x;τ))`.
pub fn probe_field_tau(probe: &Probe, mat: &Material, x: V3, tau: f64) -> Result<(V3, f64)> {
    let st = probe_state_tau(probe, mat, x, tau)?;
    Ok((st.disp, st.temp))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainArg {
    Tau(f64),
    Time(f64),
}

/// Traction `s(w,Θ)ν` and flux `-k∇Θ·ν` of the probe at a boundary point.
pub fn probe_traction_flux(probe: &Probe, mat: &Material, x: V3, nu: V3, arg: DomainArg) -> Result<(V3, f64)> {
    if libm::fabs(vec3::norm(nu) - 1.0) > 1e-6 {
        return invalid("normal must have unit length");
    }
    let st = match arg {
        DomainArg::Tau(tau) => {
            let xi = vec3::dist(x, probe.p);
            if xi > probe.eta && xi - probe.eta < 1e-6 * probe.eta {
                return Err(Error::StepUnderflow);
            }
            probe_state_tau(probe, mat, x, tau)?
        }
        DomainArg::Time(t) => probe_state_time(probe, mat, x, t)?,
    };
    let flux = match probe.kind {
        ProbeKind::Heat => st.flux(mat, nu),
        _ => 0.0,
    };
    Ok((st.traction(mat, nu), flux))
}

// ---------------------------------------------------------------------------
// Time domain

fn g(eta: f64, s: f64) -> f64 {
    if s < eta {
        (eta - s) * (eta - s)
    } else {
        0.0
    }
}

fn dg(eta: f64, s: f64) -> f64 {
    if s < eta {
        -2.0 * (eta - s)
    } else {
        0.0
    }
}

/// `G(u) = ∫₀ᵘ s g(s) ds`
fn big_g(eta: f64, u: f64) -> f64 {
    let u = if u < eta { u } else { eta };
    let u2 = u * u;
    eta * eta * u2 / 2.0 - 2.0 * eta * u2 * u / 3.0 + u2 * u2 / 4.0
}

/// Spherical-means solution of `φ_tt = c²Δφ`, `φ(0)=0`, `φ_t(0)=g(|x-p|)`,
/// and the derivatives needed for `∇φ`, its gradient and its time derivative.
#[derive(Debug, Clone, Copy, Default)]
pub struct SphericalMean {
    pub phi: f64,
    pub phi_r: f64,
    pub phi_rr: f64,
    pub phi_t: f64,
    pub phi_rt: f64,
}

pub fn spherical_mean(eta: f64, c: f64, r: f64, t: f64) -> SphericalMean {
    let a = r + c * t;
    let b = r - c * t;
    let ab = libm::fabs(b);
    let phi = (big_g(eta, a) - big_g(eta, ab)) / (2.0 * r * c);
    let n = a * g(eta, a) - b * g(eta, ab);
    let dn = g(eta, a) + a * dg(eta, a) - g(eta, ab) - ab * dg(eta, ab);
    let phi_r = n / (2.0 * r * c) - phi / r;
    let phi_rr = dn / (2.0 * r * c) - n / (r * r * c) + 2.0 * phi / (r * r);
    let phi_t = (a * g(eta, a) + b * g(eta, ab)) / (2.0 * r);
    let phi_rt = (g(eta, a) + a * dg(eta, a) + g(eta, ab) + ab * dg(eta, ab)) / (2.0 * r) - phi_t / r;
    SphericalMean { phi, phi_r, phi_rr, phi_t, phi_rt }
}

/// Heat probe `Θ(r,t)` and `Θ_r(r,t)` by adaptive quadrature of the radial
/// heat-kernel representation.
pub fn heat_radial(eta: f64, kappa: f64, r: f64, t: f64) -> (f64, f64) {
    if t <= 0.0 {
        return (g(eta, r), dg(eta, r));
    }
    let four_kt = 4.0 * kappa * t;
    let tol = 1e-13;
    if r < 1e-9 * eta {
        // Θ(0,t) = (4πκt)^{-3/2} ∫ g(s) e^{-s²/4κt} 4πs² ds
        let pref = 4.0 * PI / libm::pow(PI * four_kt, 1.5);
        let (v, _) = quadrature::integrate(|s| s * s * g(eta, s) * libm::exp(-s * s / four_kt), 0.0, eta, tol, 1e-13);
        return (pref * v, 0.0);
    }
    let pref = 1.0 / (2.0 * r * libm::sqrt(PI * kappa * t));
    let width = libm::sqrt(four_kt);
    let mut breaks = alloc::vec![0.0, eta];
    for c in [r - 6.0 * width, r, r + 6.0 * width] {
        if c > 0.0 && c < eta {
            breaks.push(c);
        }
    }
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (v, _) = quadrature::integrate_breaks(
        |s| {
            let e1 = libm::exp(-(r - s) * (r - s) / four_kt);
            let e2 = libm::exp(-(r + s) * (r + s) / four_kt);
            s * g(eta, s) * (e1 - e2)
        },
        &breaks,
        tol,
        1e-13,
    );
    let (dv, _) = quadrature::integrate_breaks(
        |s| {
            let e1 = libm::exp(-(r - s) * (r - s) / four_kt);
            let e2 = libm::exp(-(r + s) * (r + s) / four_kt);
            s * g(eta, s) * (-(r - s) * e1 + (r + s) * e2) * 2.0 / four_kt
        },
        &breaks,
        tol,
        1e-13,
    );
    let theta = pref * v;
    (theta, pref * dv - theta / r)
}

/// Time-domain probe field with gradients at time `t ≥ 0`.
pub fn probe_state_time(probe: &Probe, mat: &Material, x: V3, t: f64) -> Result<FieldState> {
    Ok(probe_time_full(probe, mat, x, t)?.0)
}

/// Time-domain probe state and the displacement velocity `∂ₜv`.
pub fn probe_time_full(probe: &Probe, mat: &Material, x: V3, t: f64) -> Result<(FieldState, V3)> {
    probe.validate()?;
    if !(t >= 0.0) || !t.is_finite() {
        return invalid("time must be finite and non-negative");
    }
    let d = vec3::sub(x, probe.p);
    let r = vec3::norm(d);
    match probe.kind {
        ProbeKind::Shear | ProbeKind::Pressure => {
            if !(r > 0.0) {
                return invalid("wave probes are undefined at the ball center");
            }
            if t == 0.0 {
                return Ok((FieldState::default(), [0.0; 3]));
            }
            let c = if probe.kind == ProbeKind::Shear { mat.shear_speed() } else { mat.pressure_speed() };
            let sm = spherical_mean(probe.eta, c, r, t);
            let h = sm.phi_r / r;
            let dh = sm.phi_rr / r - sm.phi_r / (r * r);
            if probe.kind == ProbeKind::Shear {
                probe.shear_dir()?;
            }
            let st = radial_vector_state(probe.kind, probe.a, d, r, h, dh);
            let ht = sm.phi_rt / r;
            let vel = match probe.kind {
                ProbeKind::Shear => vec3::scale(vec3::cross(d, probe.a.unwrap()), ht),
                _ => vec3::scale(d, ht),
            };
            Ok((st, vel))
        }
        ProbeKind::Heat => {
            let (th, th_r) = heat_radial(probe.eta, mat.diffusivity(), r, t);
            let tg = if r > 0.0 { vec3::scale(d, th_r / r) } else { [0.0; 3] };
            Ok((FieldState { temp: th, temp_grad: tg, ..FieldState::default() }, [0.0; 3]))
        }
    }
}

/// `(v(x,t), Θ(x,t))`
pub fn probe_field_time(probe: &Probe, mat: &Material, x: V3, t: f64) -> Result<(V3, f64)> {
    let st = probe_state_time(probe, mat, x, t)?;
    Ok((st.disp, st.temp))
}

/// `∫₀ᵀ e^{-τt} (probe state)(x,t) dt`: the full transform minus the tail
/// beyond `T`. Wave tails end when the wave has passed `x`; heat tails are
/// truncated where `e^{-τ(t-T)} < e^{-50}`.
pub fn probe_state_laplace(probe: &Probe, mat: &Material, x: V3, tau: f64, horizon: f64) -> Result<FieldState> {
    let full = probe_state_tau(probe, mat, x, tau)?;
    if horizon.is_infinite() {
        return Ok(full);
    }
    if !(horizon > 0.0) {
        return invalid("horizon must be positive");
    }
    let tail = probe_tail(probe, mat, x, tau, horizon)?;
    Ok(full.minus(&tail))
}

fn probe_tail(probe: &Probe, mat: &Material, x: V3, tau: f64, horizon: f64) -> Result<FieldState> {
    let d = vec3::sub(x, probe.p);
    let r = vec3::norm(d);
    Ok(tail_state(probe, d, r, tail_radial(probe, mat, r, tau, horizon)))
}

/// Radial profile pair of the tail beyond `T` at distance `r` from the
/// probe centre: `(h, h')` for wave probes, `(Θ, ∂ᵣΘ)` for heat.
fn tail_radial(probe: &Probe, mat: &Material, r: f64, tau: f64, horizon: f64) -> (f64, f64) {
    let eta = probe.eta;
    let tol = 1e-15;
    match probe.kind {
        ProbeKind::Shear | ProbeKind::Pressure => {
            let c = if probe.kind == ProbeKind::Shear { mat.shear_speed() } else { mat.pressure_speed() };
            let t_end = (r + eta) / c;
            if horizon >= t_end {
                return (0.0, 0.0);
            }
            let mut breaks = alloc::vec![horizon];
            for b in [(r - eta) / c, r / c] {
                if b > horizon {
                    breaks.push(b);
                }
            }
            breaks.push(t_end);
            let scale = libm::exp(-tau * horizon);
            let (h, _) = quadrature::integrate_breaks(
                |t| {
                    let sm = spherical_mean(eta, c, r, t);
                    libm::exp(-tau * (t - horizon)) * sm.phi_r / r
                },
                &breaks,
                tol,
                1e-13,
            );
            let (dh, _) = quadrature::integrate_breaks(
                |t| {
                    let sm = spherical_mean(eta, c, r, t);
                    libm::exp(-tau * (t - horizon)) * (sm.phi_rr / r - sm.phi_r / (r * r))
                },
                &breaks,
                tol,
                1e-13,
            );
            (scale * h, scale * dh)
        }
        ProbeKind::Heat => {
            // s = τ(t − T) on geometric panels; the weight e^{-s} is
            // negligible past s = 50
            let kappa = mat.diffusivity();
            let scale = libm::exp(-tau * horizon);
            let (gx, gw) = quadrature::gauss_legendre(12);
            let mut breaks = [0.0; 12];
            for (k, b) in breaks.iter_mut().enumerate().skip(1) {
                *b = (0.0625 * libm::pow(2.0, (k - 1) as f64)).min(50.0);
            }
            breaks[11] = 50.0;
            let (mut th, mut thr) = (0.0, 0.0);
            for pan in breaks.windows(2) {
                let (a, b) = (pan[0], pan[1]);
                for (x, w) in gx.iter().zip(&gw) {
                    let s = 0.5 * (a + b) + 0.5 * (b - a) * x;
                    let wt = 0.5 * (b - a) * w * libm::exp(-s) / tau;
                    let (v, dv) = heat_radial(eta, kappa, r, horizon + s / tau);
                    th += wt * v;
                    thr += wt * dv;
                }
            }
            (scale * th, scale * thr)
        }
    }
}

fn tail_state(probe: &Probe, d: V3, r: f64, (a, b): (f64, f64)) -> FieldState {
    match probe.kind {
        ProbeKind::Heat => {
            let tg = if r > 0.0 { vec3::scale(d, b / r) } else { [0.0; 3] };
            FieldState { temp: a, temp_grad: tg, ..FieldState::default() }
        }
        kind => radial_vector_state(kind, probe.a, d, r, a, b),
    }
}

/// Finite-horizon probe transform with the tail profile memoized by
/// distance from the probe centre, for quadratures that revisit each
/// radius many times.
pub struct LaplaceProbe<'a> {
    probe: &'a Probe,
    mat: &'a Material,
    tau: f64,
    horizon: f64,
    cache: RefCell<BTreeMap<u64, (f64, f64)>>,
}

impl<'a> LaplaceProbe<'a> {
    pub fn new(probe: &'a Probe, mat: &'a Material, tau: f64, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return invalid("horizon must be positive");
        }
        probe.validate()?;
        Ok(LaplaceProbe { probe, mat, tau, horizon, cache: RefCell::new(BTreeMap::new()) })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn state(&self, x: V3) -> Result<FieldState> {
        let full = probe_state_tau(self.probe, self.mat, x, self.tau)?;
        let d = vec3::sub(x, self.probe.p);
        let r = vec3::norm(d);
        // points on one quadrature sphere agree in r only to rounding
        let key = libm::round(r * 1e12) as u64;
        let cached = self.cache.borrow().get(&key).copied();
        let radial = match cached {
            Some(v) => v,
            None => {
                let v = tail_radial(self.probe, self.mat, r, self.tau, self.horizon);
                self.cache.borrow_mut().insert(key, v);
                v
            }
        };
        Ok(full.minus(&tail_state(self.probe, d, r, radial)))
    }
}

/// Gradient of a vector field by 4th-order central differences with one
/// Richardson step. `grad[i][j] = ∂_j f_i`.
pub fn fd_gradient<F: Fn(V3) -> V3>(f: F, x: V3, h: f64) -> M3 {
    let d4 = |h: f64, j: usize| -> V3 {
        let at = |s: f64| {
            let mut y = x;
            y[j] += s;
            f(y)
        };
        let (p1, m1, p2, m2) = (at(h), at(-h), at(2.0 * h), at(-2.0 * h));
        let mut out = [0.0; 3];
        for i in 0..3 {
            out[i] = (8.0 * (p1[i] - m1[i]) - (p2[i] - m2[i])) / (12.0 * h);
        }
        out
    };
    let mut g = [[0.0; 3]; 3];
    for j in 0..3 {
        let coarse = d4(h, j);
        let fine = d4(0.5 * h, j);
        for i in 0..3 {
            g[i][j] = fine[i] + (fine[i] - coarse[i]) / 15.0;
        }
    }
    g
}

/// Step size for [`fd_gradient`] relative to the distance from the probe center.
pub fn fd_step(x: V3, p: V3) -> f64 {
    let r = vec3::dist(x, p);
    if 1e-4 * r > 1e-5 {
        1e-4 * r
    } else {
        1e-5
    }
}
