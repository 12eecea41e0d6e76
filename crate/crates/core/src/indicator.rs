//! Indicator functions from boundary data, the energies entering their
//! decomposition, and the residuals of the decomposition identities.

use crate::bounds::{ball_integral_estimate, ball_integral_split, elastic_density, probe_rate, thermal_density};
use crate::error::{invalid, Error, Result};
use crate::fem;
use crate::geometry::{boundary_patch, Mesh, Scene, Tag};
use crate::material::Material;
use crate::probe::{LaplaceProbe, probe_state_tau, probe_time_full, Ball, FieldState, Probe, ProbeKind};
use crate::quadrature::{TetRule, TriRule};
use crate::solver::{laplace_trace, time_reflected, Formulation, TauSolution, TimeSolution};
use crate::vec3::{self, M3, V3};
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IndicatorPoint {
    pub tau: f64,
    pub i1: f64,
    pub i2: f64,
    /// Substituted indicator (probe `w_s0` in place of the finite-horizon
    /// transform). Equal to `i1` in tau mode.
    pub is: f64,
    /// `(M, I^s(τ; M))` when a patch size was requested.
    pub is_localized: Option<(f64, f64)>,
    pub j_elastic: f64,
    pub j_thermal: f64,
    pub e_elastic: f64,
    pub e_thermal: f64,
    /// `mθ₀τ ∫ (−Σ∇·w₀ + Ξ₀∇·R)`.
    pub coupling: f64,
    /// Finite-horizon remainder `ℛ = ℛ¹ + ℛ²/(θ₀τ)`; zero in tau mode.
    pub remainder: f64,
    pub decomp_residual1: f64,
    pub decomp_residual_combined: f64,
    pub solver_residual: f64,
    pub theta0: f64,
}

impl IndicatorPoint {
    fn main_energy(&self) -> f64 {
        if self.j_thermal > 0.0 && self.j_elastic == 0.0 {
            self.j_thermal + self.e_thermal + self.theta0 * self.tau * self.e_elastic
        } else {
            self.j_elastic + self.e_elastic + self.e_thermal / (self.theta0 * self.tau)
        }
    }

    /// `|decomp_residual1|` relative to the energy sum it is compared with.
    pub fn relative_residual1(&self) -> f64 {
        libm::fabs(self.decomp_residual1) / self.main_energy()
    }

    /// `|decomp_residual_combined|` relative to the sum of the magnitudes of
    /// the right-hand terms of the combined identity.
    pub fn relative_residual_combined(&self) -> f64 {
        let tt = self.theta0 * self.tau;
        let scale = self.j_thermal + tt * self.j_elastic + self.e_thermal + tt * self.e_elastic + libm::fabs(self.coupling) + tt * libm::fabs(self.remainder);
        libm::fabs(self.decomp_residual_combined) / scale
    }

    /// `(e + θ₀τE) / (τj + τ³J + τ³e^{−2τT})`.
    pub fn basic_estimate_ratio(&self, horizon: Option<f64>) -> f64 {
        let t = self.tau;
        let tail = horizon.map_or(0.0, |h| t * t * t * libm::exp(-2.0 * t * h));
        (self.e_thermal + self.theta0 * t * self.e_elastic) / (t * self.j_thermal + t * t * t * self.j_elastic + tail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepMode {
    Tau,
    Time { horizon: f64, n_steps: usize },
}

#[derive(Debug, Clone)]
pub struct IndicatorSweep {
    pub material: Material,
    pub probe: Probe,
    pub scene: Option<Scene>,
    pub mode: SweepMode,
    pub points: Vec<IndicatorPoint>,
}

impl IndicatorSweep {
    pub fn validate(&self) -> Result<()> {
        for w in self.points.windows(2) {
            if !(w[1].tau > w[0].tau) {
                return invalid("tau grid must be strictly increasing");
            }
        }
        Ok(())
    }

    pub fn horizon(&self) -> Option<f64> {
        match self.mode {
            SweepMode::Tau => None,
            SweepMode::Time { horizon, .. } => Some(horizon),
        }
    }

    /// Largest basic-estimate ratio over its median.
    pub fn basic_estimate_spread(&self) -> (f64, f64) {
        let mut v: Vec<f64> = self.points.iter().map(|p| p.basic_estimate_ratio(self.horizon())).collect();
        let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
        let n = v.len();
        let median = if n == 0 { f64::NAN } else if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        (max, median)
    }
}

/// A solution the indicator can be evaluated from.
#[derive(Clone, Copy)]
pub enum SolutionRef<'a> {
    Tau(&'a TauSolution),
    /// Time solution and the Laplace parameter.
    Time(&'a TimeSolution, f64),
}

impl SolutionRef<'_> {
    fn tau(&self) -> f64 {
        match self {
            SolutionRef::Tau(s) => s.tau,
            SolutionRef::Time(_, t) => *t,
        }
    }
}

/// Probe field entering the indicator at `x`: the closed form in tau mode,
/// the finite-horizon transform in time mode.
fn probe_at(probe: &Probe, mat: &Material, x: V3, tau: f64, lp: Option<&LaplaceProbe<'_>>) -> Result<FieldState> {
    match lp {
        None => probe_state_tau(probe, mat, x, tau),
        Some(lp) => lp.state(x),
    }
}

/// Nodal reflected fields on the whole mesh (time mode: boundary nodes from
/// the trace transform, interior nodes from the volume transform if present).
fn reflected(sol: SolutionRef<'_>, mesh: &Mesh, mat: &Material, probe: &Probe, lp: Option<&LaplaceProbe<'_>>) -> Result<(Vec<V3>, Vec<f64>, bool)> {
    match sol {
        SolutionRef::Tau(s) => Ok((s.r.clone(), s.sigma.clone(), true)),
        SolutionRef::Time(s, tau) => {
            let tr = laplace_trace(s, tau)?;
            let (mut r, mut sg, have_volume) = match time_reflected(s, mesh, mat, probe, tau) {
                Ok((r, sg)) => (r, sg, true),
                Err(Error::Invalid(_)) => (alloc::vec![[0.0; 3]; mesh.nodes.len()], alloc::vec![0.0; mesh.nodes.len()], false),
                Err(e) => return Err(e),
            };
            for (i, &a) in tr.nodes.iter().enumerate() {
                let (pw, pt) = match s.formulation {
                    Formulation::Scattered => ([0.0; 3], 0.0),
                    Formulation::Total => {
                        let st = probe_at(probe, mat, mesh.nodes[a], tau, lp)?;
                        (st.disp, st.temp)
                    }
                };
                r[a] = vec3::sub(tr.w[i], pw);
                sg[a] = tr.xi[i] - pt;
            }
            Ok((r, sg, have_volume))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn boundary_pair(mesh: &Mesh, facets: &[usize], probe: &Probe, mat: &Material, tau: f64, lp: Option<&LaplaceProbe<'_>>, r: &[V3], sg: &[f64]) -> Result<(f64, f64)> {
    let rule = TriRule::three_point();
    let i1 = fem::facet_integral(mesh, facets, &rule, r, sg, |x, nu, rh, _| {
        let st = probe_at(probe, mat, x, tau, lp)?;
        Ok(vec3::dot(st.traction(mat, nu), rh))
    })?;
    let i2 = if probe.kind == ProbeKind::Heat {
        fem::facet_integral(mesh, facets, &rule, r, sg, |x, nu, _, sh| {
            let st = probe_at(probe, mat, x, tau, lp)?;
            Ok(mat.k * vec3::dot(st.temp_grad, nu) * sh)
        })?
    } else {
        // Ξ₀ vanishes identically for wave probes
        0.0
    };
    Ok((i1, i2))
}

fn outer_facets(mesh: &Mesh) -> Vec<usize> {
    (0..mesh.facets.len()).filter(|&f| mesh.facets[f].1 == Tag::Outer).collect()
}

/// Probe energies `(J, j)` over the cavity ball, with the finite-horizon
/// transform in time mode.
pub fn cavity_energies(probe: &Probe, mat: &Material, cavity: &Ball, tau: f64, horizon: Option<f64>) -> Result<(f64, f64)> {
    let lp = match horizon {
        Some(h) => Some(LaplaceProbe::new(probe, mat, tau, h)?),
        None => None,
    };
    cavity_energies_with(probe, mat, cavity, tau, lp.as_ref())
}

fn cavity_energies_with(probe: &Probe, mat: &Material, cavity: &Ball, tau: f64, lp: Option<&LaplaceProbe<'_>>) -> Result<(f64, f64)> {
    let horizon = lp.map(|l| l.horizon());
    let heat = probe.kind == ProbeKind::Heat;
    let rate = 2.0 * probe_rate(probe, mat, tau);
    // finite-horizon transforms of wave probes have kinks on the spheres
    // |x - p| = cT ± η
    let mut kinks = Vec::new();
    if let (Some(t), false) = (horizon, heat) {
        for c in [mat.pressure_speed(), mat.shear_speed()] {
            kinks.push(c * t - probe.eta);
            kinks.push(c * t + probe.eta);
        }
    }
    let tol = if horizon.is_some() { 1e-6 } else { 1e-8 };
    let field = |x| probe_at(probe, mat, x, tau, lp);
    let (v, agreement) = ball_integral_split(
        probe.p,
        cavity,
        rate,
        |x| match field(x) {
            Ok(s) if heat => thermal_density(&s, mat, tau),
            Ok(s) => elastic_density(&s, mat, tau),
            Err(_) => f64::NAN,
        },
        1e-8,
        &kinks,
    )?;
    if agreement > tol {
        return Err(Error::NotConverged { achieved: agreement });
    }
    if v.is_nan() {
        return invalid("cavity intersects the probe ball");
    }
    Ok(if heat { (0.0, v) } else { (v, 0.0) })
}

fn sym_norm2(g: &M3) -> f64 {
    let s = vec3::sym(g);
    vec3::ddot(&s, &s)
}

/// Energies `(E, e)` of nodal reflected fields, exact for P1 fields.
pub fn reflected_energies(mesh: &Mesh, mat: &Material, tau: f64, r: &[V3], sg: &[f64]) -> Result<(f64, f64)> {
    let rule = TetRule::four_point();
    let e_el = fem::volume_integral(mesh, &rule, r, sg, |_, rh, g, _, _| {
        let d = vec3::trace(g);
        Ok(2.0 * mat.mu * sym_norm2(g) + mat.lambda * d * d + mat.rho * tau * tau * vec3::dot(rh, rh))
    })?;
    let e_th = fem::volume_integral(mesh, &rule, r, sg, |_, _, _, sh, gs| Ok(mat.k * vec3::dot(gs, gs) + mat.c * tau * sh * sh))?;
    Ok((e_el, e_th))
}

fn coupling_term(mesh: &Mesh, mat: &Material, probe: &Probe, tau: f64, lp: Option<&LaplaceProbe<'_>>, r: &[V3], sg: &[f64]) -> Result<f64> {
    if mat.m == 0.0 || probe.kind == ProbeKind::Shear {
        return Ok(0.0);
    }
    let v = fem::volume_integral(mesh, &TetRule::fourteen_point(), r, sg, |x, _, g, sh, _| {
        let st = probe_at(probe, mat, x, tau, lp)?;
        Ok(-sh * st.div() + st.temp * vec3::trace(g))
    })?;
    Ok(mat.m * mat.theta0 * tau * v)
}

/// `ℛ = ℛ¹ + ℛ²/(θ₀τ)` from the terminal snapshot and the closed-form probe
/// at `T`.
#[allow(clippy::too_many_arguments)]
fn remainder(sol: &TimeSolution, mesh: &Mesh, mat: &Material, probe: &Probe, lp: &LaplaceProbe<'_>, cavity: Option<&Ball>, tau: f64, r: &[V3], sg: &[f64]) -> Result<f64> {
    let t = sol.horizon;
    let scattered = sol.formulation == Formulation::Scattered;
    // snapshot pair (u, ∂ₜu, ϑ) packed as nodal fields: F_solved = ∂ₜu + τu
    let fs: Vec<V3> = sol.terminal_u.iter().zip(&sol.terminal_v).map(|(u, v)| vec3::add(*v, vec3::scale(*u, tau))).collect();
    let h_th = &sol.terminal_theta;
    let rule = TetRule::fourteen_point();
    // ∫_{Ω\D} [ρ(F·R + (F₀ − F)·w₀) + (hΣ + (h₀ − h)Ξ₀)/(θ₀τ)]
    let mut acc_el = 0.0;
    let mut acc_th = 0.0;
    for tidx in 0..mesh.tets.len() {
        let tet = mesh.tets[tidx];
        let g = fem::tet_geom(mesh, tidx);
        let p = [mesh.nodes[tet[0]], mesh.nodes[tet[1]], mesh.nodes[tet[2]], mesh.nodes[tet[3]]];
        let mut div_u = 0.0;
        for k in 0..4 {
            div_u += vec3::dot(sol.terminal_u[tet[k]], g.grads[k]);
        }
        for (bc, w) in rule.points.iter().zip(&rule.weights) {
            let x = fem::bary4(&p, bc);
            let interp3 = |f: &[V3]| {
                let mut o = [0.0; 3];
                for k in 0..4 {
                    o = vec3::add(o, vec3::scale(f[tet[k]], bc[k]));
                }
                o
            };
            let interp1 = |f: &[f64]| (0..4).map(|k| bc[k] * f[tet[k]]).sum::<f64>();
            let (st_t, vel_t) = probe_time_full(probe, mat, x, t)?;
            let f0 = vec3::add(vel_t, vec3::scale(st_t.disp, tau));
            let h0 = mat.c * st_t.temp - mat.m * mat.theta0 * st_t.div();
            let w0 = lp.state(x)?;
            let mut f = interp3(&fs);
            let mut th_t = interp1(h_th);
            let mut du = div_u;
            if scattered {
                f = vec3::add(f, f0);
                th_t += st_t.temp;
                du += st_t.div();
            }
            let h = mat.c * th_t - mat.m * mat.theta0 * du;
            let rh = interp3(r);
            let sh = interp1(sg);
            let wv = g.vol * w;
            acc_el += wv * (vec3::dot(f, rh) + vec3::dot(vec3::sub(f0, f), w0.disp));
            acc_th += wv * (h * sh + (h0 - h) * w0.temp);
        }
    }
    // ∫_D terms from closed forms
    let (mut d_el, mut d_th) = (0.0, 0.0);
    if let Some(cav) = cavity {
        let rate = 2.0 * probe_rate(probe, mat, tau);
        let heat = probe.kind == ProbeKind::Heat;
        // the terminal wave field has kinks, so take the finest estimate
        let (v, _) = ball_integral_estimate(
            probe.p,
            cav,
            rate,
            |x| match (probe_time_full(probe, mat, x, t), lp.state(x)) {
                (Ok((st, vel)), Ok(w0)) => {
                    if heat {
                        (mat.c * st.temp - mat.m * mat.theta0 * st.div()) * w0.temp
                    } else {
                        vec3::dot(vec3::add(vel, vec3::scale(st.disp, tau)), w0.disp)
                    }
                }
                _ => f64::NAN,
            },
            1e-8,
        )?;
        if v.is_nan() {
            return invalid("cavity intersects the probe ball");
        }
        if heat {
            d_th = v;
        } else {
            d_el = v;
        }
    }
    let decay = libm::exp(-tau * t);
    let r1 = mat.rho * decay * (d_el + acc_el);
    let r2 = decay * (d_th + acc_th);
    Ok(r1 + r2 / (mat.theta0 * tau))
}

/// Indicator values, energies and identity residuals at one `τ`.
///
/// `cavity` is the analytic cavity ball used for `J` and `j`; it is required
/// when the mesh has cavity facets.
pub fn indicator(sol: SolutionRef<'_>, probe: &Probe, mat: &Material, mesh: &Mesh, cavity: Option<&Ball>) -> Result<IndicatorPoint> {
    let tau = sol.tau();
    if !(tau > 0.0) {
        return invalid("tau must be positive");
    }
    let n = mesh.nodes.len();
    let (horizon, solver_residual) = match sol {
        SolutionRef::Tau(s) => {
            if s.r.len() != n {
                return invalid("solution does not match the mesh");
            }
            (None, s.stats.residual)
        }
        SolutionRef::Time(s, _) => {
            if s.terminal_u.len() != n {
                return invalid("solution does not match the mesh");
            }
            (Some(s.horizon), s.max_residual)
        }
    };
    if mesh.has_cavity() && cavity.is_none() {
        return invalid("J and j need the cavity as a ball; no cavity volume mesh is available");
    }
    let lp = match horizon {
        Some(h) => Some(LaplaceProbe::new(probe, mat, tau, h)?),
        None => None,
    };
    let lp = lp.as_ref();
    let (r, sg, have_volume) = reflected(sol, mesh, mat, probe, lp)?;
    let outer = outer_facets(mesh);
    let (i1, i2) = boundary_pair(mesh, &outer, probe, mat, tau, lp, &r, &sg)?;
    let is = match (sol, lp) {
        (SolutionRef::Time(..), Some(lp)) => substituted(mesh, &outer, probe, mat, tau, lp, &r)?,
        _ => i1,
    };
    let (j_el, j_th) = match cavity {
        Some(c) if mesh.has_cavity() => cavity_energies_with(probe, mat, c, tau, lp)?,
        _ => (0.0, 0.0),
    };
    let (e_el, e_th, coupling) = if have_volume {
        let (a, b) = reflected_energies(mesh, mat, tau, &r, &sg)?;
        (a, b, coupling_term(mesh, mat, probe, tau, lp, &r, &sg)?)
    } else {
        (f64::NAN, f64::NAN, f64::NAN)
    };
    let rem = match (sol, lp) {
        (SolutionRef::Time(s, _), Some(lp)) if have_volume => remainder(s, mesh, mat, probe, lp, cavity.filter(|_| mesh.has_cavity()), tau, &r, &sg)?,
        (SolutionRef::Time(..), _) => f64::NAN,
        (SolutionRef::Tau(_), _) => 0.0,
    };
    let tt = mat.theta0 * tau;
    let residual1 = if probe.kind == ProbeKind::Heat {
        i2 - (j_th + e_th + tt * e_el + tt * rem)
    } else {
        i1 - (j_el + e_el + e_th / tt + rem)
    };
    let combined = tt * i1 + i2 - ((j_th + tt * j_el) + (e_th + tt * e_el) + coupling + tt * rem);
    Ok(IndicatorPoint {
        tau,
        i1,
        i2,
        is,
        is_localized: None,
        j_elastic: j_el,
        j_thermal: j_th,
        e_elastic: e_el,
        e_thermal: e_th,
        coupling,
        remainder: rem,
        decomp_residual1: residual1,
        decomp_residual_combined: combined,
        solver_residual,
        theta0: mat.theta0,
    })
}

/// Time-mode `I^s`: the closed-form probe `w_s0` against `L_T u − w_s0`.
fn substituted(mesh: &Mesh, facets: &[usize], probe: &Probe, mat: &Material, tau: f64, lp: &LaplaceProbe<'_>, r: &[V3]) -> Result<f64> {
    // L_T u − w_s0 = R_T − (w_s0 − w0_T)
    let rule = TriRule::three_point();
    let zero = alloc::vec![0.0; r.len()];
    fem::facet_integral(mesh, facets, &rule, r, &zero, |x, nu, rh, _| {
        let full = probe_state_tau(probe, mat, x, tau)?;
        let fin = lp.state(x)?;
        let diff = vec3::sub(rh, vec3::sub(full.disp, fin.disp));
        Ok(vec3::dot(full.traction(mat, nu), diff))
    })
}

/// Localized indicator over `∂Ω(B, M)`. Returns the value and whether the
/// patch was empty (value 0 then).
pub fn indicator_localized(sol: SolutionRef<'_>, probe: &Probe, mat: &Material, mesh: &Mesh, m: f64) -> Result<(f64, bool)> {
    let patch = boundary_patch(mesh, &probe.ball(), m)?;
    if patch.is_empty() {
        return Ok((0.0, true));
    }
    let tau = sol.tau();
    let lp = match sol {
        SolutionRef::Time(s, _) => Some(LaplaceProbe::new(probe, mat, tau, s.horizon)?),
        SolutionRef::Tau(_) => None,
    };
    let (r, _, _) = reflected(sol, mesh, mat, probe, lp.as_ref())?;
    let v = match (sol, &lp) {
        (SolutionRef::Time(..), Some(lp)) => substituted(mesh, &patch, probe, mat, tau, lp, &r)?,
        _ => {
            let zero = alloc::vec![0.0; r.len()];
            fem::facet_integral(mesh, &patch, &TriRule::three_point(), &r, &zero, |x, nu, rh, _| {
                let st = probe_state_tau(probe, mat, x, tau)?;
                Ok(vec3::dot(st.traction(mat, nu), rh))
            })?
        }
    };
    Ok((v, false))
}

/// Checks `2μ|Sym A − (trA/3)I|² + ((3λ+2μ)/3)|trA|² = 2μ|Sym A|² + λ|trA|²`
/// and `|Sym A|² ≤ C(2μ|Sym A|² + λ|trA|²)` with
/// `C = 2·max(1/(2μ), 1/(3λ+2μ))`.
pub fn elastic_identity_check(a: &M3, lambda: f64, mu: f64) -> Result<(f64, f64, bool)> {
    if !(mu > 0.0) || !(3.0 * lambda + 2.0 * mu > 0.0) {
        return invalid("need mu > 0 and 3 lambda + 2 mu > 0");
    }
    let s = vec3::sym(a);
    let tr = vec3::trace(a);
    let mut dev = s;
    for i in 0..3 {
        dev[i][i] -= tr / 3.0;
    }
    let lhs = 2.0 * mu * vec3::ddot(&dev, &dev) + (3.0 * lambda + 2.0 * mu) / 3.0 * tr * tr;
    let s2 = vec3::ddot(&s, &s);
    let rhs = 2.0 * mu * s2 + lambda * tr * tr;
    let scale = (2.0 * mu * s2).max(libm::fabs(lambda) * tr * tr).max(f64::MIN_POSITIVE);
    let identity = libm::fabs(lhs - rhs) <= 1e-13 * scale;
    let c = 2.0 * (1.0 / (2.0 * mu)).max(1.0 / (3.0 * lambda + 2.0 * mu));
    let inequality = s2 <= c * rhs * (1.0 + 1e-14);
    Ok((lhs, rhs, identity && inequality))
}
