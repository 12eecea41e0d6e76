//! Forward solves: the Laplace-domain system at a single `τ` and the
//! time-domain system on `[0, T]`, plus finite-horizon Laplace transforms of
//! recorded boundary traces.
//!
//! Two equivalent formulations are available. `Total` solves for `(w, Ξ)`
//! with the probe traction and flux prescribed on `∂Ω`. `Scattered` solves
//! for the reflected pair `(R, Σ) = (w − w₀, Ξ − Ξ₀)`, driven by the probe
//! data on `∂D` and the coupling residual of the probe in the volume. The
//! reflected field is exponentially small compared with the probe on `∂Ω`,
//! so indicators built from it do not lose digits to cancellation.

use crate::error::{invalid, Error, Result};
use crate::fem::{self, dof, pack, unpack, Operators, NDOF};
use crate::geometry::{Mesh, Tag};
use crate::material::Material;
use crate::probe::{probe_state_laplace, probe_state_tau, probe_state_time, Probe, ProbeKind};
use crate::quadrature::{TetRule, TriRule};
use crate::sparse::{norm2, rcm, solve_refined, Csr, SkylineLdl};
use crate::vec3::{self, V3};
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    Total,
    Scattered,
}

impl Formulation {
    pub fn name(&self) -> &'static str {
        match self {
            Formulation::Total => "total",
            Formulation::Scattered => "scattered",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// `None` picks `Scattered` on meshes with a cavity and `Total` otherwise.
    pub formulation: Option<Formulation>,
    /// Points of the facet rule for boundary loads (3 or 7).
    pub facet_points: usize,
    pub tol: f64,
    pub max_refinement: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { formulation: None, facet_points: 3, tol: 1e-10, max_refinement: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    pub n_dofs: usize,
    /// `‖b − Ax‖ / ‖b‖` of the coupled system.
    pub residual: f64,
    pub refinement_steps: usize,
    pub profile: usize,
    /// Smallest over largest pivot magnitude; a conditioning hint.
    pub pivot_ratio: f64,
    pub negative_pivots: usize,
}

#[derive(Debug, Clone)]
pub struct TauSolution {
    pub tau: f64,
    pub formulation: Formulation,
    /// Total displacement `w` at the nodes.
    pub w: Vec<V3>,
    /// Total temperature `Ξ` at the nodes.
    pub xi: Vec<f64>,
    /// Reflected displacement `R = w − w₀`.
    pub r: Vec<V3>,
    /// Reflected temperature `Σ = Ξ − Ξ₀`.
    pub sigma: Vec<f64>,
    pub stats: SolveStats,
}

/// Mesh-dependent data shared by every solve on one mesh and material.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub ops: Operators,
    dof_perm: Vec<usize>,
}

/// A factored, symmetrized system matrix at one `τ`.
pub struct Factored {
    pub tau: f64,
    matrix: Csr,
    scale: Vec<f64>,
    ldl: SkylineLdl,
}

impl Factored {
    /// Solve the unscaled system `A x = b`.
    pub fn solve(&self, b: &[f64], tol: f64, max_steps: usize) -> (Vec<f64>, SolveStats) {
        let bs: Vec<f64> = b.iter().zip(&self.scale).map(|(b, s)| b * s).collect();
        let (x, _, steps) = solve_refined(&self.matrix, &self.ldl, &bs, tol, max_steps);
        // residual of the unscaled system
        let mut r = self.matrix.mul_vec(&x);
        for i in 0..r.len() {
            r[i] = (bs[i] - r[i]) / self.scale[i];
        }
        let bn = norm2(b);
        let residual = if bn == 0.0 { 0.0 } else { norm2(&r) / bn };
        let (neg, _) = self.ldl.inertia();
        let stats = SolveStats {
            n_dofs: self.ldl.dim(),
            residual,
            refinement_steps: steps,
            profile: self.ldl.profile(),
            pivot_ratio: self.ldl.pivot_ratio(),
            negative_pivots: neg,
        };
        (x, stats)
    }
}

impl Discretization {
    pub fn new(mesh: &Mesh, mat: &Material) -> Result<Discretization> {
        mat.validate()?;
        if mesh.count_tag(Tag::Outer) == 0 {
            return Err(Error::Mesh("mesh has no OUTER facets".into()));
        }
        let ops = Operators::assemble(mesh, mat);
        let node_perm = rcm(&fem::node_adjacency(mesh));
        let mut dof_perm = Vec::with_capacity(NDOF * node_perm.len());
        for &old in &node_perm {
            for c in 0..NDOF {
                dof_perm.push(dof(old, c));
            }
        }
        Ok(Discretization { ops, dof_perm })
    }

    pub fn material(&self) -> &Material {
        &self.ops.material
    }

    pub fn factor(&self, tau: f64) -> Result<Factored> {
        if !(tau > 0.0) || !tau.is_finite() {
            return invalid("tau must be positive and finite");
        }
        let mut matrix = self.ops.system(tau);
        let scale = self.ops.symmetrizer(tau);
        matrix.scale_rows(&scale);
        let ldl = SkylineLdl::factor(&matrix, self.dof_perm.clone()).map_err(|e| match e {
            Error::Singular { index, .. } => Error::Singular { index, tau },
            e => e,
        })?;
        Ok(Factored { tau, matrix, scale, ldl })
    }
}

pub fn resolve_formulation(mesh: &Mesh, f: Option<Formulation>) -> Formulation {
    f.unwrap_or(if mesh.has_cavity() { Formulation::Scattered } else { Formulation::Total })
}

fn check_probe(mesh: &Mesh, probe: &Probe) -> Result<()> {
    probe.validate()?;
    if mesh.contains_point(probe.p) || mesh.boundary_distance(probe.p) <= probe.eta {
        return invalid("probe ball intersects the mesh");
    }
    Ok(())
}

/// Load vector of the τ-domain problem driven by the closed-form probe.
pub fn tau_load(mesh: &Mesh, mat: &Material, probe: &Probe, tau: f64, form: Formulation, facet_points: usize) -> Result<Vec<f64>> {
    let n = NDOF * mesh.nodes.len();
    let rule = TriRule::with_points(facet_points);
    match form {
        Formulation::Total => fem::facet_load(mesh, Tag::Outer, &rule, n, |x, nu| {
            let st = probe_state_tau(probe, mat, x, tau)?;
            Ok((st.traction(mat, nu), -st.flux(mat, nu)))
        }),
        Formulation::Scattered => {
            let mut b = fem::facet_load(mesh, Tag::Cavity, &rule, n, |x, nu| {
                let st = probe_state_tau(probe, mat, x, tau)?;
                Ok((vec3::scale(st.traction(mat, nu), -1.0), st.flux(mat, nu)))
            })?;
            if has_volume_residual(probe, mat) {
                let vol = fem::volume_load(mesh, &TetRule::fourteen_point(), n, |x| {
                    let st = probe_state_tau(probe, mat, x, tau)?;
                    Ok((vec3::scale(st.temp_grad, mat.m), mat.m * mat.theta0 * tau * st.div()))
                })?;
                for (a, v) in b.iter_mut().zip(vol) {
                    *a += v;
                }
            }
            Ok(b)
        }
    }
}

/// Whether the uncoupled probe leaves a coupling residual in the volume.
pub fn has_volume_residual(probe: &Probe, mat: &Material) -> bool {
    mat.m != 0.0 && probe.kind != ProbeKind::Shear
}

pub fn solve_tau(mesh: &Mesh, material: &Material, probe: &Probe, tau: f64) -> Result<TauSolution> {
    let disc = Discretization::new(mesh, material)?;
    solve_tau_with(&disc, mesh, probe, tau, &SolveOptions::default())
}

pub fn solve_tau_with(disc: &Discretization, mesh: &Mesh, probe: &Probe, tau: f64, opts: &SolveOptions) -> Result<TauSolution> {
    check_probe(mesh, probe)?;
    let mat = *disc.material();
    let form = resolve_formulation(mesh, opts.formulation);
    let fac = disc.factor(tau)?;
    let b = tau_load(mesh, &mat, probe, tau, form, opts.facet_points)?;
    let (x, stats) = fac.solve(&b, opts.tol, opts.max_refinement);
    let (solved_w, solved_xi) = unpack(&x);
    let mut probe_w = Vec::with_capacity(mesh.nodes.len());
    let mut probe_xi = Vec::with_capacity(mesh.nodes.len());
    for x in &mesh.nodes {
        let st = probe_state_tau(probe, &mat, *x, tau)?;
        probe_w.push(st.disp);
        probe_xi.push(st.temp);
    }
    Ok(assemble_solution(tau, form, solved_w, solved_xi, &probe_w, &probe_xi, stats))
}

fn assemble_solution(tau: f64, form: Formulation, sw: Vec<V3>, sx: Vec<f64>, pw: &[V3], px: &[f64], stats: SolveStats) -> TauSolution {
    let (w, xi, r, sigma) = match form {
        Formulation::Total => {
            let r = sw.iter().zip(pw).map(|(a, b)| vec3::sub(*a, *b)).collect();
            let s = sx.iter().zip(px).map(|(a, b)| a - b).collect();
            (sw, sx, r, s)
        }
        Formulation::Scattered => {
            let w = sw.iter().zip(pw).map(|(a, b)| vec3::add(*a, *b)).collect();
            let x = sx.iter().zip(px).map(|(a, b)| a + b).collect();
            (w, x, sw, sx)
        }
    };
    TauSolution { tau, formulation: form, w, xi, r, sigma, stats }
}

// ---------------------------------------------------------------------------
// Time domain

#[derive(Debug, Clone)]
pub struct TimeOptions {
    /// `None` picks `Scattered` when the probe leaves no coupling residual
    /// and the mesh has a cavity, `Total` otherwise.
    pub formulation: Option<Formulation>,
    pub facet_points: usize,
    /// Laplace parameters at which volume transforms of the solved fields
    /// are accumulated during stepping.
    pub transform_taus: Vec<f64>,
    pub tol: f64,
}

impl Default for TimeOptions {
    fn default() -> Self {
        TimeOptions { formulation: None, facet_points: 3, transform_taus: Vec::new(), tol: 1e-10 }
    }
}

/// Finite-horizon Laplace transform `∫₀ᵀ e^{-τt} (u, ϑ) dt` of the solved
/// fields at every node (trapezoidal rule on the step grid).
#[derive(Debug, Clone)]
pub struct VolumeTransform {
    pub tau: f64,
    pub u: Vec<V3>,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TimeSolution {
    pub horizon: f64,
    pub n_steps: usize,
    pub dt: f64,
    pub formulation: Formulation,
    /// Nodes lying on at least one boundary facet, ascending.
    pub boundary_nodes: Vec<usize>,
    /// `trace_u[n][i]` is the solved displacement at `boundary_nodes[i]`
    /// and time `n·dt`.
    pub trace_u: Vec<Vec<V3>>,
    pub trace_theta: Vec<Vec<f64>>,
    /// Solved fields at `t = T`.
    pub terminal_u: Vec<V3>,
    pub terminal_v: Vec<V3>,
    pub terminal_theta: Vec<f64>,
    pub transforms: Vec<VolumeTransform>,
    /// Discrete elastic energy `½ρvᵀMv + ½uᵀKu` per step.
    pub energy: Vec<f64>,
    /// Cumulative trapezoidal boundary work per step.
    pub work: Vec<f64>,
    /// Set when `c_s·Δt` exceeds half the minimum edge length.
    pub dt_warning: bool,
    pub max_residual: f64,
}

pub fn time_formulation(mesh: &Mesh, probe: &Probe, mat: &Material, f: Option<Formulation>) -> Formulation {
    f.unwrap_or(if mesh.has_cavity() && !has_volume_residual(probe, mat) {
        Formulation::Scattered
    } else {
        Formulation::Total
    })
}

/// Load vector at time `t` for the time-domain problem.
pub fn time_load(mesh: &Mesh, mat: &Material, probe: &Probe, t: f64, form: Formulation, facet_points: usize) -> Result<Vec<f64>> {
    let n = NDOF * mesh.nodes.len();
    let rule = TriRule::with_points(facet_points);
    let (tag, sign) = match form {
        Formulation::Total => (Tag::Outer, 1.0),
        Formulation::Scattered => (Tag::Cavity, -1.0),
    };
    fem::facet_load(mesh, tag, &rule, n, |x, nu| {
        let st = probe_state_time(probe, mat, x, t)?;
        Ok((vec3::scale(st.traction(mat, nu), sign), -sign * st.flux(mat, nu)))
    })
}

pub fn boundary_nodes(mesh: &Mesh) -> Vec<usize> {
    let mut v: Vec<usize> = mesh.facets.iter().flat_map(|(t, _)| t.iter().copied()).collect();
    v.sort_unstable();
    v.dedup();
    v
}

pub fn solve_time(mesh: &Mesh, material: &Material, probe: &Probe, horizon: f64, n_steps: usize) -> Result<TimeSolution> {
    let disc = Discretization::new(mesh, material)?;
    solve_time_with(&disc, mesh, probe, horizon, n_steps, &TimeOptions::default())
}

/// Newmark (β = 1/4, γ = 1/2) on the elastic block and Crank–Nicolson on
/// the heat block, both implicit in the coupling. The step matrix equals the
/// Laplace-domain matrix at `τ = 2/Δt`.
pub fn solve_time_with(disc: &Discretization, mesh: &Mesh, probe: &Probe, horizon: f64, n_steps: usize, opts: &TimeOptions) -> Result<TimeSolution> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return invalid("horizon must be positive and finite");
    }
    if n_steps < 16 {
        return invalid("at least 16 time steps are required");
    }
    if opts.transform_taus.iter().any(|&t| !(t > 0.0)) {
        return invalid("transform parameters must be positive");
    }
    check_probe(mesh, probe)?;
    let mat = *disc.material();
    let form = time_formulation(mesh, probe, &mat, opts.formulation);
    let dt = horizon / n_steps as f64;
    let te = 2.0 / dt;
    let fac = disc.factor(te)?;
    let ops = &disc.ops;
    let k_el = ops.block(0);
    let m_el = ops.block(1);
    let d_h = ops.block(3);
    let k_h = ops.block(4);
    let m_h = ops.block(5);
    let nn = mesh.nodes.len();
    let n = NDOF * nn;
    let bnodes = boundary_nodes(mesh);

    let speed = mat.pressure_speed().max(mat.shear_speed());
    let dt_warning = match probe.kind {
        ProbeKind::Heat => false,
        _ => speed * dt > 0.5 * mesh.min_edge_length(),
    };

    let mut u = alloc::vec![[0.0; 3]; nn];
    let mut v = alloc::vec![[0.0; 3]; nn];
    let mut acc = alloc::vec![[0.0; 3]; nn];
    let mut th = alloc::vec![0.0; nn];
    let mut load = time_load(mesh, &mat, probe, 0.0, form, opts.facet_points)?;

    let mut trace_u = Vec::with_capacity(n_steps + 1);
    let mut trace_theta = Vec::with_capacity(n_steps + 1);
    trace_u.push(alloc::vec![[0.0; 3]; bnodes.len()]);
    trace_theta.push(alloc::vec![0.0; bnodes.len()]);
    let mut transforms: Vec<VolumeTransform> = opts
        .transform_taus
        .iter()
        .map(|&tau| VolumeTransform { tau, u: alloc::vec![[0.0; 3]; nn], theta: alloc::vec![0.0; nn] })
        .collect();
    let mut energy = alloc::vec![0.0];
    let mut work = alloc::vec![0.0];
    let mut max_residual: f64 = 0.0;

    for step in 0..n_steps {
        let t1 = (step + 1) as f64 * dt;
        let load1 = time_load(mesh, &mat, probe, t1, form, opts.facet_points)?;
        let mut z = Vec::with_capacity(nn);
        for a in 0..nn {
            z.push(vec3::add(vec3::scale(vec3::add(u[a], vec3::scale(v[a], dt)), 4.0 / (dt * dt)), acc[a]));
        }
        let y = pack(&u, Some(&th));
        let mz = m_el.mul_vec(&pack(&z, None));
        let mh = m_h.mul_vec(&y);
        let kh = k_h.mul_vec(&y);
        let dh = d_h.mul_vec(&y);
        let mut rhs = alloc::vec![0.0; n];
        for a in 0..nn {
            for i in 0..3 {
                let k = dof(a, i);
                rhs[k] = load1[k] + mat.rho * mz[k];
            }
            let k = dof(a, 3);
            rhs[k] = mat.c * te * mh[k] - mat.k * kh[k] - mat.m * mat.theta0 * te * dh[k] + load[k] + load1[k];
        }
        let (x, stats) = fac.solve(&rhs, opts.tol, 10);
        max_residual = max_residual.max(stats.residual);
        let (u1, th1) = unpack(&x);
        let mut acc1 = Vec::with_capacity(nn);
        let mut v1 = Vec::with_capacity(nn);
        for a in 0..nn {
            let du = vec3::sub(vec3::sub(u1[a], u[a]), vec3::scale(v[a], dt));
            let a1 = vec3::sub(vec3::scale(du, 4.0 / (dt * dt)), acc[a]);
            v1.push(vec3::add(v[a], vec3::scale(vec3::add(acc[a], a1), 0.5 * dt)));
            acc1.push(a1);
        }
        // trapezoidal work of the elastic load
        let mut dw = 0.0;
        for a in 0..nn {
            for i in 0..3 {
                let k = dof(a, i);
                dw += 0.5 * (load[k] + load1[k]) * (u1[a][i] - u[a][i]);
            }
        }
        work.push(work.last().unwrap() + dw);
        let xu = pack(&u1, None);
        let xv = pack(&v1, None);
        let ku: f64 = k_el.mul_vec(&xu).iter().zip(&xu).map(|(a, b)| a * b).sum();
        let mv: f64 = m_el.mul_vec(&xv).iter().zip(&xv).map(|(a, b)| a * b).sum();
        energy.push(0.5 * mat.rho * mv + 0.5 * ku);

        let is_last = step + 1 == n_steps;
        for tr in transforms.iter_mut() {
            let wgt = dt * libm::exp(-tr.tau * t1) * if is_last { 0.5 } else { 1.0 };
            for a in 0..nn {
                tr.u[a] = vec3::add(tr.u[a], vec3::scale(u1[a], wgt));
                tr.theta[a] += wgt * th1[a];
            }
        }
        trace_u.push(bnodes.iter().map(|&a| u1[a]).collect());
        trace_theta.push(bnodes.iter().map(|&a| th1[a]).collect());
        u = u1;
        v = v1;
        acc = acc1;
        th = th1;
        load = load1;
    }

    Ok(TimeSolution {
        horizon,
        n_steps,
        dt,
        formulation: form,
        boundary_nodes: bnodes,
        trace_u,
        trace_theta,
        terminal_u: u,
        terminal_v: v,
        terminal_theta: th,
        transforms,
        energy,
        work,
        dt_warning,
        max_residual,
    })
}

impl TimeSolution {
    /// Largest `|energy − work|` relative to the largest cumulative work.
    pub fn energy_audit(&self) -> f64 {
        let wmax = self.work.iter().fold(0.0f64, |m, w| m.max(libm::fabs(*w)));
        let dev = self.energy.iter().zip(&self.work).fold(0.0f64, |m, (e, w)| m.max(libm::fabs(e - w)));
        if wmax == 0.0 {
            dev
        } else {
            dev / wmax
        }
    }

    pub fn volume_transform(&self, tau: f64) -> Option<&VolumeTransform> {
        self.transforms.iter().find(|t| t.tau == tau)
    }
}

/// Trapezoidal `∫₀ᵀ e^{-τt} f(t) dt` of samples on a uniform grid, together
/// with the Simpson value on the same grid (Simpson 3/8 closes an odd number
/// of intervals).
pub fn laplace_samples(values: &[f64], dt: f64, tau: f64) -> (f64, f64) {
    let n = values.len() - 1;
    let g: Vec<f64> = values.iter().enumerate().map(|(i, v)| v * libm::exp(-tau * i as f64 * dt)).collect();
    let mut trap = 0.5 * (g[0] + g[n]);
    for x in &g[1..n] {
        trap += x;
    }
    trap *= dt;
    let simpson = if n < 2 {
        trap
    } else {
        let even = if n % 2 == 0 { n } else { n.saturating_sub(3) };
        let mut s = 0.0;
        let mut i = 0;
        while i + 2 <= even {
            s += dt / 3.0 * (g[i] + 4.0 * g[i + 1] + g[i + 2]);
            i += 2;
        }
        if even < n {
            s += 3.0 * dt / 8.0 * (g[even] + 3.0 * g[even + 1] + 3.0 * g[even + 2] + g[even + 3]);
        }
        s
    };
    (trap, simpson)
}

/// Laplace transforms of the recorded traces at the boundary nodes.
#[derive(Debug, Clone)]
pub struct LaplaceTrace {
    pub tau: f64,
    pub nodes: Vec<usize>,
    pub w: Vec<V3>,
    pub xi: Vec<f64>,
    /// Largest trapezoid–Simpson difference over all components.
    pub error_estimate: f64,
}

pub fn laplace_trace(sol: &TimeSolution, tau: f64) -> Result<LaplaceTrace> {
    if !(tau > 0.0) || !tau.is_finite() {
        return invalid("tau must be positive and finite");
    }
    if sol.trace_u.len() != sol.n_steps + 1 {
        return invalid("trace length does not match the step count");
    }
    let nb = sol.boundary_nodes.len();
    let mut w = alloc::vec![[0.0; 3]; nb];
    let mut xi = alloc::vec![0.0; nb];
    let mut err: f64 = 0.0;
    let mut buf = alloc::vec![0.0; sol.n_steps + 1];
    for i in 0..nb {
        for c in 0..4 {
            for (n, b) in buf.iter_mut().enumerate() {
                *b = if c < 3 { sol.trace_u[n][i][c] } else { sol.trace_theta[n][i] };
            }
            let (t, s) = laplace_samples(&buf, sol.dt, tau);
            err = err.max(libm::fabs(t - s));
            if c < 3 {
                w[i][c] = t;
            } else {
                xi[i] = t;
            }
        }
    }
    Ok(LaplaceTrace { tau, nodes: sol.boundary_nodes.clone(), w, xi, error_estimate: err })
}

/// Reflected fields `(R, Σ)` at every node at Laplace parameter `τ` from a
/// time solution: the accumulated volume transform, minus the finite-horizon
/// transform of the probe in the total formulation.
pub fn time_reflected(sol: &TimeSolution, mesh: &Mesh, mat: &Material, probe: &Probe, tau: f64) -> Result<(Vec<V3>, Vec<f64>)> {
    let tr = sol
        .volume_transform(tau)
        .ok_or_else(|| Error::Invalid("no volume transform was recorded at this tau".into()))?;
    match sol.formulation {
        Formulation::Scattered => Ok((tr.u.clone(), tr.theta.clone())),
        Formulation::Total => {
            let mut r = Vec::with_capacity(mesh.nodes.len());
            let mut s = Vec::with_capacity(mesh.nodes.len());
            for (a, x) in mesh.nodes.iter().enumerate() {
                let st = probe_state_laplace(probe, mat, *x, tau, sol.horizon)?;
                r.push(vec3::sub(tr.u[a], st.disp));
                s.push(tr.theta[a] - st.temp);
            }
            Ok((r, s))
        }
    }
}
