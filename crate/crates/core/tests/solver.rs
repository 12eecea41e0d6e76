use thermo_enclosure_core::fem::{self, field_errors, Operators, NDOF};
use thermo_enclosure_core::geometry::{generate_benchmark_mesh, Mesh, Scene, Tag};
use thermo_enclosure_core::probe::probe_state_tau;
use thermo_enclosure_core::quadrature::{TetRule, TriRule};
use thermo_enclosure_core::solver::*;
use thermo_enclosure_core::vec3::{self, M3, V3};
use thermo_enclosure_core::{Ball, Material, Probe};

fn scene(cavity: bool, probe: &Probe) -> Scene {
    Scene {
        outer: Ball::new([0.0; 3], 1.0),
        cavity: cavity.then(|| Ball::new([0.0; 3], 0.3)),
        probe_ball: probe.ball(),
    }
}

fn shear() -> Probe {
    Probe::shear([2.0, 0.0, 0.0], 0.2, [0.0, 0.0, 1.0]).unwrap()
}

/// `c + b·x + xᵀAx` with `A` symmetric.
#[derive(Clone, Copy)]
struct Quad {
    c: f64,
    b: V3,
    a: M3,
}

impl Quad {
    fn val(&self, x: V3) -> f64 {
        self.c + vec3::dot(self.b, x) + vec3::dot(x, vec3::mat_vec(&self.a, x))
    }
    fn grad(&self, x: V3) -> V3 {
        vec3::add(self.b, vec3::scale(vec3::mat_vec(&self.a, x), 2.0))
    }
    fn hess(&self, i: usize, j: usize) -> f64 {
        2.0 * self.a[i][j]
    }
}

struct Manufactured {
    w: [Quad; 3],
    xi: Quad,
}

impl Manufactured {
    fn new() -> Self {
        let q = |c: f64, b: V3, d: V3, off: V3| Quad {
            c,
            b,
            a: [[d[0], off[2], off[1]], [off[2], d[1], off[0]], [off[1], off[0], d[2]]],
        };
        Manufactured {
            w: [
                q(0.1, [0.3, -0.2, 0.1], [0.5, -0.3, 0.2], [0.1, 0.4, -0.2]),
                q(-0.2, [0.1, 0.2, 0.3], [-0.1, 0.6, 0.3], [0.2, -0.1, 0.3]),
                q(0.05, [-0.4, 0.1, 0.2], [0.2, 0.1, -0.5], [-0.3, 0.2, 0.1]),
            ],
            xi: q(0.3, [0.2, -0.1, 0.4], [0.4, 0.2, -0.3], [0.1, 0.1, -0.2]),
        }
    }

    fn exact(&self, x: V3) -> (V3, M3, f64, V3) {
        let w = [self.w[0].val(x), self.w[1].val(x), self.w[2].val(x)];
        let g = [self.w[0].grad(x), self.w[1].grad(x), self.w[2].grad(x)];
        (w, g, self.xi.val(x), self.xi.grad(x))
    }

    fn stress(&self, mat: &Material, x: V3) -> M3 {
        let (_, g, xi, _) = self.exact(x);
        let div = vec3::trace(&g);
        let mut s = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                s[i][j] = mat.mu * (g[i][j] + g[j][i]);
            }
            s[i][i] += mat.lambda * div + mat.m * xi;
        }
        s
    }

    /// Volume sources `(−∇·s + ρτ²w, −kΔΞ + cτΞ − mθ₀τ∇·w)`.
    fn source(&self, mat: &Material, tau: f64, x: V3) -> (V3, f64) {
        let (w, g, xi, gxi) = self.exact(x);
        let mut f = [0.0; 3];
        for i in 0..3 {
            let mut div_s = 0.0;
            for j in 0..3 {
                div_s += mat.mu * (self.w[i].hess(j, j) + self.w[j].hess(j, i));
                div_s += mat.lambda * self.w[j].hess(i, j);
            }
            div_s += mat.m * gxi[i];
            f[i] = -div_s + mat.rho * tau * tau * w[i];
        }
        let lap: f64 = (0..3).map(|j| self.xi.hess(j, j)).sum();
        let h = -mat.k * lap + mat.c * tau * xi - mat.m * mat.theta0 * tau * vec3::trace(&g);
        (f, h)
    }
}

fn manufactured_errors(level: u32, mat: &Material, tau: f64) -> (f64, [f64; 4]) {
    let mesh = generate_benchmark_mesh(&scene(true, &shear()), level).unwrap();
    let ms = Manufactured::new();
    let disc = Discretization::new(&mesh, mat).unwrap();
    let n = NDOF * mesh.nodes.len();
    let mut b = fem::volume_load(&mesh, &TetRule::fourteen_point(), n, |x| Ok(ms.source(mat, tau, x))).unwrap();
    for tag in [Tag::Outer, Tag::Cavity] {
        let g = fem::facet_load(&mesh, tag, &TriRule::seven_point(), n, |x, nu| {
            let (_, _, _, gxi) = ms.exact(x);
            Ok((vec3::mat_vec(&ms.stress(mat, x), nu), mat.k * vec3::dot(gxi, nu)))
        })
        .unwrap();
        for (a, v) in b.iter_mut().zip(g) {
            *a += v;
        }
    }
    let (x, stats) = disc.factor(tau).unwrap().solve(&b, 1e-12, 10);
    assert!(stats.residual < 1e-10);
    let (u, th) = fem::unpack(&x);
    let h = (mesh.total_volume() / mesh.nodes.len() as f64).cbrt();
    (h, field_errors(&mesh, &u, &th, |x| ms.exact(x)).unwrap())
}

#[test]
fn manufactured_solution_converges() {
    let mat = Material::benchmark();
    let tau = 1.5;
    let runs: Vec<_> = (0..3).map(|l| manufactured_errors(l, &mat, tau)).collect();
    for pair in runs.windows(2) {
        let (h0, e0) = pair[0];
        let (h1, e1) = pair[1];
        let rate = (h0 / h1).ln();
        let l2 = (e0[0] / e1[0]).ln() / rate;
        let h1o = (e0[2] / e1[2]).ln() / rate;
        assert!(l2 >= 1.8, "L2 order {l2}");
        assert!(h1o >= 0.9, "H1 order {h1o}");
    }
    let (_, e) = runs[2];
    assert!(e[0] / e[1] < 2e-2);
}

#[test]
fn scaled_coupling_blocks_are_negative_transposes() {
    let mat = Material::benchmark();
    let mesh = generate_benchmark_mesh(&scene(true, &shear()), 1).unwrap();
    let ops = Operators::assemble(&mesh, &mat);
    for tau in [0.5, 3.0, 10.0] {
        let mut a = ops.system(tau);
        // heat rows scaled by 1/(θ₀τ)
        let s: Vec<f64> = (0..a.n).map(|i| if i % NDOF == 3 { 1.0 / (mat.theta0 * tau) } else { 1.0 }).collect();
        a.scale_rows(&s);
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..a.n {
            for (j, v) in a.row(i) {
                if (i % NDOF == 3) != (j % NDOF == 3) {
                    worst = worst.max((v + a.get(j, i)).abs());
                    scale = scale.max(v.abs());
                }
            }
        }
        assert!(scale > 0.0);
        assert!(worst <= 1e-15 * scale, "{worst} vs {scale}");
        // the symmetrized matrix used by the solver is symmetric
        let mut b = ops.system(tau);
        b.scale_rows(&ops.symmetrizer(tau));
        assert!(b.asymmetry() <= 1e-15);
    }
}

#[test]
fn factorization_has_no_zero_pivots_across_a_sweep() {
    let mat = Material::benchmark();
    let mesh = generate_benchmark_mesh(&scene(true, &shear()), 1).unwrap();
    let disc = Discretization::new(&mesh, &mat).unwrap();
    let n_heat = mesh.nodes.len();
    for tau in [0.1, 1.0, 4.0, 10.0, 50.0] {
        let f = disc.factor(tau).unwrap();
        let (_, st) = f.solve(&vec![1.0; disc.ops.n_dofs()], 1e-12, 10);
        assert!(st.pivot_ratio > 0.0 && st.pivot_ratio.is_finite());
        // quasi-definite: one negative pivot per heat unknown
        assert_eq!(st.negative_pivots, n_heat);
    }
}

#[test]
fn mesh_without_outer_facets_is_rejected() {
    let mat = Material::benchmark();
    let mut mesh = generate_benchmark_mesh(&scene(false, &shear()), 0).unwrap();
    mesh.facets.retain(|f| f.1 != Tag::Outer);
    assert!(Discretization::new(&mesh, &mat).is_err());
}

#[test]
fn probe_overlapping_the_mesh_is_rejected() {
    let mat = Material::benchmark();
    let mesh = generate_benchmark_mesh(&scene(false, &shear()), 0).unwrap();
    let node = mesh.facets.iter().find(|f| f.1 == Tag::Outer).unwrap().0[0];
    let probe = Probe::shear(vec3::scale(mesh.nodes[node], 1.1), 0.2, [0.0, 0.0, 1.0]).unwrap();
    assert!(solve_tau(&mesh, &mat, &probe, 2.0).is_err());
    let inside = Probe::shear([0.0, 0.0, 0.5], 0.01, [1.0, 0.0, 0.0]).unwrap();
    assert!(solve_tau(&mesh, &mat, &inside, 2.0).is_err());
    assert!(solve_tau(&mesh, &mat, &shear(), 0.0).is_err());
}

fn boundary_trace_error(mesh: &Mesh, mat: &Material, probe: &Probe, tau: f64, w: &[V3]) -> (f64, f64) {
    let outer: Vec<usize> = (0..mesh.facets.len()).filter(|&f| mesh.facets[f].1 == Tag::Outer).collect();
    let th = vec![0.0; w.len()];
    let rule = TriRule::seven_point();
    let err = fem::facet_integral(mesh, &outer, &rule, w, &th, |x, _, wh, _| {
        let st = probe_state_tau(probe, mat, x, tau)?;
        let d = vec3::sub(wh, st.disp);
        Ok(vec3::dot(d, d))
    })
    .unwrap();
    let nrm = fem::facet_integral(mesh, &outer, &rule, w, &th, |x, _, _, _| {
        let st = probe_state_tau(probe, mat, x, tau)?;
        Ok(vec3::dot(st.disp, st.disp))
    })
    .unwrap();
    (err.sqrt(), nrm.sqrt())
}

#[test]
fn no_cavity_trace_converges_to_the_probe_field() {
    let mat = Material::benchmark();
    let probe = shear();
    let tau = 0.5;
    let mut errs = Vec::new();
    for level in 0..3 {
        let mesh = generate_benchmark_mesh(&scene(false, &probe), level).unwrap();
        let sol = solve_tau(&mesh, &mat, &probe, tau).unwrap();
        assert_eq!(sol.formulation, Formulation::Total);
        assert!(sol.stats.residual <= 1e-10);
        let (e, n) = boundary_trace_error(&mesh, &mat, &probe, tau, &sol.w);
        let h = (mesh.total_volume() / mesh.nodes.len() as f64).cbrt();
        errs.push((h, e / n));
    }
    assert!(errs[1].1 < errs[0].1);
    // level 0 is pre-asymptotic; the order is read off the finest pair
    let order = (errs[1].1 / errs[2].1).ln() / (errs[1].0 / errs[2].0).ln();
    assert!(order >= 1.8, "trace order {order} from {errs:?}");
}

#[test]
fn shear_probe_without_coupling_leaves_temperature_zero() {
    let mat = Material::benchmark().with_m(0.0);
    let probe = shear();
    let mesh = generate_benchmark_mesh(&scene(true, &probe), 0).unwrap();
    let sol = solve_tau(&mesh, &mat, &probe, 3.0).unwrap();
    assert!(sol.xi.iter().all(|&v| v == 0.0));
    let ts = solve_time(&mesh, &mat, &probe, 2.0, 64).unwrap();
    let umax = ts.trace_u.iter().flatten().map(|u| vec3::norm(*u)).fold(0.0, f64::max);
    let tmax = ts.trace_theta.iter().flatten().map(|t| t.abs()).fold(0.0, f64::max);
    assert!(umax > 0.0);
    assert!(tmax <= 1e-12 * umax, "{tmax}");
    assert!(ts.terminal_theta.iter().all(|t| t.abs() <= 1e-12 * umax));
}

#[test]
fn zero_data_gives_zero_solution() {
    let mat = Material::benchmark();
    let probe = shear();
    let mesh = generate_benchmark_mesh(&scene(true, &probe), 0).unwrap();
    let disc = Discretization::new(&mesh, &mat).unwrap();
    let (x, st) = disc.factor(2.0).unwrap().solve(&vec![0.0; disc.ops.n_dofs()], 1e-12, 10);
    assert!(x.iter().all(|&v| v == 0.0));
    assert_eq!(st.residual, 0.0);
    // the probe wave reaches Ω only after t = dist(Ω, B) = 0.8
    let ts = solve_time(&mesh, &mat, &probe, 0.6, 32).unwrap();
    assert!(ts.trace_u.iter().flatten().all(|u| *u == [0.0; 3]));
    assert!(ts.trace_theta.iter().flatten().all(|&t| t == 0.0));
    assert!(ts.terminal_u.iter().chain(&ts.terminal_v).all(|u| *u == [0.0; 3]));
}

#[test]
fn traces_start_at_zero() {
    let mat = Material::benchmark();
    let probe = Probe::pressure([2.0, 0.0, 0.0], 0.2).unwrap();
    let mesh = generate_benchmark_mesh(&scene(true, &probe), 0).unwrap();
    let ts = solve_time(&mesh, &mat, &probe, 2.0, 32).unwrap();
    assert_eq!(ts.trace_u.len(), 33);
    assert!(ts.trace_u[0].iter().all(|u| *u == [0.0; 3]));
    assert!(ts.trace_theta[0].iter().all(|&t| t == 0.0));
    assert!(solve_time(&mesh, &mat, &probe, 2.0, 15).is_err());
    assert!(solve_time(&mesh, &mat, &probe, 0.0, 32).is_err());
}

#[test]
fn energy_is_bounded_by_boundary_work() {
    let mat = Material::benchmark().with_m(0.0);
    let probe = shear();
    let mesh = generate_benchmark_mesh(&scene(true, &probe), 2).unwrap();
    let ts = solve_time(&mesh, &mat, &probe, 3.0, 512).unwrap();
    let last = ts.energy.len() - 1;
    assert!(ts.work[last] > 0.0);
    assert!(ts.energy[last] <= ts.work[last] * (1.0 + 1e-2));
    assert!(ts.energy_audit() <= 1e-2, "audit {}", ts.energy_audit());
}

#[test]
fn laplace_samples_of_analytic_traces() {
    let (tau, t_end, n) = (1.7, 2.0, 400);
    let dt = t_end / n as f64;
    let ones = vec![1.0; n + 1];
    let exact = (1.0 - (-tau * t_end).exp()) / tau;
    let (trap, simp) = laplace_samples(&ones, dt, tau);
    assert!((trap - exact).abs() <= 1e-5 * exact);
    assert!((simp - exact).abs() <= 1e-10 * exact);

    let dt = 1.0 / 256.0;
    let vals: Vec<f64> = (0..=256).map(|i| (-(i as f64) * dt).exp()).collect();
    let exact = (1.0 - (-3.0f64).exp()) / 3.0;
    assert!((exact - 0.316738).abs() < 1e-6);
    let (trap, simp) = laplace_samples(&vals, dt, 2.0);
    assert!((trap - exact).abs() <= 1.5 * (trap - simp).abs());
    // odd interval count switches the last panel to the 3/8 rule
    let vals: Vec<f64> = (0..=255).map(|i| (-(i as f64) * dt).exp()).collect();
    let exact = (1.0 - (-3.0 * 255.0 * dt).exp()) / 3.0;
    let (_, simp) = laplace_samples(&vals, dt, 2.0);
    assert!((simp - exact).abs() <= 1e-9);
}

#[test]
fn laplace_trace_approaches_the_tau_trace() {
    let mat = Material::benchmark();
    let probe = shear();
    let mesh = generate_benchmark_mesh(&scene(false, &probe), 0).unwrap();
    let disc = Discretization::new(&mesh, &mat).unwrap();
    let taus = [2.0, 4.0, 8.0];
    let reference: Vec<_> = taus.iter().map(|&t| solve_tau_with(&disc, &mesh, &probe, t, &SolveOptions::default()).unwrap()).collect();
    let mut gaps = Vec::new();
    for (horizon, n) in [(1.5, 384), (3.0, 768)] {
        let opts = TimeOptions { transform_taus: taus.to_vec(), ..Default::default() };
        let ts = solve_time_with(&disc, &mesh, &probe, horizon, n, &opts).unwrap();
        let row: Vec<f64> = taus
            .iter()
            .zip(&reference)
            .map(|(&tau, sol)| {
                let lt = laplace_trace(&ts, tau).unwrap();
                let mut d = 0.0f64;
                let mut s = 0.0f64;
                for (k, &node) in lt.nodes.iter().enumerate() {
                    d = d.max(vec3::norm(vec3::sub(lt.w[k], sol.w[node])));
                    s = s.max(vec3::norm(sol.w[node]));
                }
                d / s
            })
            .collect();
        gaps.push(row);
    }
    for k in 0..taus.len() {
        assert!(gaps[1][k] < gaps[0][k], "{gaps:?}");
    }
    assert!(gaps[1].iter().all(|&g| g < 5e-2), "{gaps:?}");
}

/// Spherical-mean temperature in radial shells versus a finite-difference
/// solution of the radial problem with the mean probe flux as data.
#[test]
fn heat_probe_mean_matches_radial_oracle() {
    let mat = Material::benchmark().with_m(0.0);
    let probe = Probe::heat([2.0, 0.0, 0.0], 0.2).unwrap();
    let tau = 1.0;
    let mesh = generate_benchmark_mesh(&scene(true, &probe), 2).unwrap();
    let sol = solve_tau(&mesh, &mat, &probe, tau).unwrap();

    // mean outward flux k∂ᵣΞ₀ over the unit sphere
    let (gx, gw) = thermo_enclosure_core::quadrature::gauss_legendre(48);
    let nphi = 96;
    let mut qbar = 0.0;
    for (u, wu) in gx.iter().zip(&gw) {
        for k in 0..nphi {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / nphi as f64;
            let s = (1.0 - u * u).sqrt();
            let x = [s * phi.cos(), s * phi.sin(), *u];
            let st = probe_state_tau(&probe, &mat, x, tau).unwrap();
            qbar += wu * mat.k * vec3::dot(st.temp_grad, x) / (2.0 * nphi as f64);
        }
    }

    // −k(Ξ'' + 2Ξ'/r) + cτΞ = 0 on [a, b], kΞ'(a) = 0, kΞ'(b) = qbar
    let (a, b, n) = (0.3, 1.0, 4000usize);
    let h = (b - a) / n as f64;
    let r = |i: usize| a + h * i as f64;
    let mut lower = vec![0.0; n + 1];
    let mut diag = vec![0.0; n + 1];
    let mut upper = vec![0.0; n + 1];
    let mut rhs = vec![0.0; n + 1];
    for i in 0..=n {
        let ri = r(i);
        let (cm, cp) = (mat.k * (1.0 / (h * h) - 1.0 / (ri * h)), mat.k * (1.0 / (h * h) + 1.0 / (ri * h)));
        diag[i] = 2.0 * mat.k / (h * h) + mat.c * tau;
        // ghost points from the Neumann conditions
        if i == 0 {
            upper[i] = -(cm + cp);
        } else if i == n {
            lower[i] = -(cm + cp);
            rhs[i] = cp * 2.0 * h * qbar / mat.k;
        } else {
            lower[i] = -cm;
            upper[i] = -cp;
        }
    }
    for i in 1..=n {
        let f = lower[i] / diag[i - 1];
        diag[i] -= f * upper[i - 1];
        rhs[i] -= f * rhs[i - 1];
    }
    let mut y = vec![0.0; n + 1];
    y[n] = rhs[n] / diag[n];
    for i in (0..n).rev() {
        y[i] = (rhs[i] - upper[i] * y[i + 1]) / diag[i];
    }
    let oracle = |rr: f64| {
        let t = ((rr - a) / h).clamp(0.0, n as f64 - 1e-9);
        let i = t as usize;
        y[i] + (t - i as f64) * (y[i + 1] - y[i])
    };

    let nb = 14;
    let mut num = vec![0.0; nb];
    let mut ora = vec![0.0; nb];
    let mut vol = vec![0.0; nb];
    let rule = TetRule::fourteen_point();
    for t in 0..mesh.tets.len() {
        let tet = mesh.tets[t];
        let p = tet.map(|i| mesh.nodes[i]);
        let v = mesh.volume(t);
        for (bc, w) in rule.points.iter().zip(&rule.weights) {
            let x = fem::bary4(&p, bc);
            let rr = vec3::norm(x);
            let bin = (((rr - a) / (b - a)) * nb as f64).clamp(0.0, nb as f64 - 1.0) as usize;
            let xi: f64 = (0..4).map(|k| bc[k] * sol.xi[tet[k]]).sum();
            num[bin] += v * w * xi;
            ora[bin] += v * w * oracle(rr);
            vol[bin] += v * w;
        }
    }
    let (mut d2, mut n2) = (0.0, 0.0);
    for k in 0..nb {
        let (m1, m2) = (num[k] / vol[k], ora[k] / vol[k]);
        d2 += vol[k] * (m1 - m2) * (m1 - m2);
        n2 += vol[k] * m2 * m2;
    }
    let rel = (d2 / n2).sqrt();
    assert!(rel <= 0.02, "radial mean mismatch {rel}");
}
