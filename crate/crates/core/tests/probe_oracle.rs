#![allow(clippy::needless_range_loop)]

use std::f64::consts::PI;
use thermo_enclosure_core::oracle::{heat_time_oracle, oracle_quadrature, OracleTarget};
use thermo_enclosure_core::probe::{
    self, moment_scalar, moment_vector, probe_field_tau, probe_state_laplace, probe_state_tau, probe_state_time,
    probe_traction_flux, Ball, DomainArg, Probe,
};
use thermo_enclosure_core::vec3;
use thermo_enclosure_core::Material;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn relv(a: [f64; 3], b: [f64; 3]) -> f64 {
    vec3::norm(vec3::sub(a, b)) / vec3::norm(b)
}

fn unit_mat() -> Material {
    Material::new(1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0).unwrap()
}

#[test]
fn newtonian_limits() {
    let ball = Ball::new([0.0; 3], 1.0);
    let x = [2.0, 0.0, 0.0];
    let i0 = moment_scalar(0, x, 1e-6, &ball).unwrap();
    let i2 = moment_scalar(2, x, 1e-6, &ball).unwrap();
    assert!(rel(i0, 2.0 * PI / 3.0) < 1e-5, "{i0}");
    assert!(rel(i2, 2.0 * PI / 5.0) < 1e-5, "{i2}");
    let heat = Probe::heat([0.0; 3], 1.0).unwrap();
    // the heat probe decays like e^{-√τ(ξ-η)}, so its limit needs √τ small
    let (_, th) = probe_field_tau(&heat, &unit_mat(), x, 1e-12).unwrap();
    assert!(rel(th, 1.0 / 60.0) < 1e-5, "{th}");
    let (_, th) = probe_field_tau(&heat, &unit_mat(), x, 1e-6).unwrap();
    assert!((rel(th, 1.0 / 60.0) - 2e-3).abs() < 2e-4, "{th}");
}

#[test]
fn scalar_moment_matches_oracle() {
    let pr = Probe::heat([0.0; 3], 0.5).unwrap();
    let x = [1.5, 0.5, 0.0];
    let cf = moment_scalar(1, x, 3.0, &pr.ball()).unwrap();
    let or = oracle_quadrature(OracleTarget::Scalar(1), x, 3.0, &pr, &unit_mat()).unwrap();
    assert!(rel(cf, or.value.scalar()) < 1e-8, "{cf} {:?}", or.value);
}

#[test]
fn vector_moments_match_oracle() {
    let pr = Probe::heat([0.0; 3], 0.5).unwrap();
    let x = [2.0, 0.0, 0.0];
    let cf = moment_vector(1, x, 4.0, &pr.ball()).unwrap();
    let or = oracle_quadrature(OracleTarget::Vector(1), x, 4.0, &pr, &unit_mat()).unwrap().value.vector();
    assert!(rel(cf[0], or[0]) < 1e-8);

    let x = [0.0, 0.0, 3.0];
    let cf = moment_vector(0, x, 2.0, &pr.ball()).unwrap();
    let or = oracle_quadrature(OracleTarget::Vector(0), x, 2.0, &pr, &unit_mat()).unwrap().value.vector();
    assert!(relv(cf, or) < 1e-8);
    assert!(cf[0].abs() < 1e-12 && cf[1].abs() < 1e-12);
}

#[test]
fn vector_moment_is_radial() {
    let ball = Ball::new([0.3, -0.2, 0.1], 0.4);
    let x = [1.1, 0.7, -0.9];
    for j in 0..2 {
        let v = moment_vector(j, x, 2.5, &ball).unwrap();
        let d = vec3::sub(x, ball.center);
        assert!(vec3::norm(vec3::cross(v, d)) <= 1e-12 * vec3::norm(v) * vec3::norm(d));
    }
}

#[test]
fn pressure_probe_matches_oracle() {
    let pr = Probe::pressure([0.0; 3], 0.4).unwrap();
    let x = [1.8 / 3f64.sqrt(), 1.8 / 3f64.sqrt(), 1.8 / 3f64.sqrt()];
    let (w, _) = probe_field_tau(&pr, &unit_mat(), x, 5.0).unwrap();
    let or = oracle_quadrature(OracleTarget::Probe(pr.kind), x, 5.0, &pr, &unit_mat()).unwrap();
    assert!(relv(w, or.value.vector()) < 1e-8);
}

#[test]
fn shear_and_heat_probes_match_oracle() {
    let mat = Material::new(1.3, 0.7, 0.4, 0.2, 1.1, 0.6, 1.0).unwrap();
    let a = vec3::normalize([0.2, 1.0, -0.4]);
    let sh = Probe::shear([0.1, 0.0, -0.2], 0.3, a).unwrap();
    let x = [0.9, 0.5, 0.4];
    let (w, _) = probe_field_tau(&sh, &mat, x, 3.5).unwrap();
    let or = oracle_quadrature(OracleTarget::Probe(sh.kind), x, 3.5, &sh, &mat).unwrap();
    assert!(relv(w, or.value.vector()) < 1e-8);

    let ht = Probe::heat([0.1, 0.0, -0.2], 0.3).unwrap();
    let (_, th) = probe_field_tau(&ht, &mat, x, 7.0).unwrap();
    let or = oracle_quadrature(OracleTarget::Probe(ht.kind), x, 7.0, &ht, &mat).unwrap();
    assert!(rel(th, or.value.scalar()) < 1e-8);
}

#[test]
fn shear_probe_vanishes_on_axis() {
    let a = [0.0, 0.0, 1.0];
    let sh = Probe::shear([0.0; 3], 0.2, a).unwrap();
    let (w, th) = probe_field_tau(&sh, &unit_mat(), [0.0, 0.0, 1.3], 4.0).unwrap();
    assert_eq!(w, [0.0; 3]);
    assert_eq!(th, 0.0);
}

#[test]
fn analytic_gradients_match_richardson_differences() {
    let mat = Material::new(1.0, 1.0, 1.0, 0.5, 1.0, 1.0, 1.0).unwrap();
    let a = vec3::normalize([1.0, 2.0, 0.5]);
    for pr in [
        Probe::shear([2.0, 0.0, 0.0], 0.2, a).unwrap(),
        Probe::pressure([2.0, 0.0, 0.0], 0.2).unwrap(),
    ] {
        let x = [0.6, 0.5, -0.3];
        let st = probe_state_tau(&pr, &mat, x, 6.0).unwrap();
        let fd = probe::fd_gradient(|y| probe_field_tau(&pr, &mat, y, 6.0).unwrap().0, x, probe::fd_step(x, pr.p));
        let scale = st.grad.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..3 {
            for j in 0..3 {
                assert!((st.grad[i][j] - fd[i][j]).abs() < 1e-7 * scale, "{i}{j}");
            }
        }
    }
}

fn oracle_traction(pr: &Probe, mat: &Material, x: [f64; 3], nu: [f64; 3], tau: f64) -> ([f64; 3], f64) {
    let oracle_w = |y: [f64; 3]| oracle_quadrature(OracleTarget::Probe(pr.kind), y, tau, pr, mat).unwrap().value.vector();
    let g = probe::fd_gradient(oracle_w, x, 1e-3);
    let div = g[0][0] + g[1][1] + g[2][2];
    let mut s = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            s[i][j] = mat.mu * (g[i][j] + g[j][i]) + if i == j { mat.lambda * div } else { 0.0 };
        }
    }
    let gnorm = g.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    (vec3::mat_vec(&s, nu), gnorm)
}

#[test]
fn shear_traction_matches_oracle_gradient() {
    let mat = Material::new(1.0, 1.3, 0.8, 0.0, 1.0, 1.0, 1.0).unwrap();
    let tau = 4.0;
    // x - p parallel to a: the field vanishes on the ray, its gradient does not
    let sh = Probe::shear([2.0, 0.0, 0.0], 0.2, [1.0, 0.0, 0.0]).unwrap();
    let x = [1.0, 0.0, 0.0];
    let nu = vec3::normalize([1.0, 0.5, 0.0]);
    let (tr, _) = probe_traction_flux(&sh, &mat, x, nu, DomainArg::Tau(tau)).unwrap();
    let (tr_fd, gnorm) = oracle_traction(&sh, &mat, x, nu, tau);
    assert!(vec3::norm(vec3::sub(tr, tr_fd)) < 1e-6 * gnorm, "{tr:?} {tr_fd:?}");

    let sh = Probe::shear([2.0, 0.0, 0.0], 0.2, [0.0, 0.0, 1.0]).unwrap();
    let x = [1.0, 0.2, 0.1];
    let (tr, _) = probe_traction_flux(&sh, &mat, x, nu, DomainArg::Tau(tau)).unwrap();
    let (tr_fd, _) = oracle_traction(&sh, &mat, x, nu, tau);
    assert!(relv(tr, tr_fd) < 1e-6, "{tr:?} {tr_fd:?}");
}

#[test]
fn heat_probe_traction_is_m_theta_nu() {
    let ht = Probe::heat([2.0, 0.0, 0.0], 0.2).unwrap();
    let x = [1.0, 0.0, 0.0];
    let nu = [1.0, 0.0, 0.0];
    let (tr, fl) = probe_traction_flux(&ht, &unit_mat(), x, nu, DomainArg::Tau(4.0)).unwrap();
    assert_eq!(tr, [0.0; 3]);
    assert!(fl < 0.0, "heat flows outward through the face looking at the ball");
    let m = unit_mat().with_m(0.7);
    let (tr, _) = probe_traction_flux(&ht, &m, x, nu, DomainArg::Tau(4.0)).unwrap();
    let (_, th) = probe_field_tau(&ht, &m, x, 4.0).unwrap();
    assert!(rel(tr[0], 0.7 * th) < 1e-15 && tr[1] == 0.0 && tr[2] == 0.0);
}

#[test]
fn rejects_points_in_or_near_ball() {
    let sh = Probe::shear([0.0; 3], 0.5, [0.0, 0.0, 1.0]).unwrap();
    assert!(probe_field_tau(&sh, &unit_mat(), [0.3, 0.0, 0.0], 1.0).is_err());
    assert!(probe_field_tau(&sh, &unit_mat(), [0.5, 0.0, 0.0], 1.0).is_err());
    let near = [0.5 * (1.0 + 1e-8), 0.0, 0.0];
    assert!(probe_traction_flux(&sh, &unit_mat(), near, [1.0, 0.0, 0.0], DomainArg::Tau(1.0)).is_err());
    assert!(moment_scalar(0, [2.0, 0.0, 0.0], 0.0, &sh.ball()).is_err());
    let mut bad = sh;
    bad.a = None;
    assert!(probe_field_tau(&bad, &unit_mat(), [2.0, 0.0, 0.0], 1.0).is_err());
}

#[test]
fn time_probe_initial_state_and_huygens() {
    let mat = unit_mat();
    let sh = Probe::shear([0.0; 3], 0.2, [0.0, 0.0, 1.0]).unwrap();
    let x = [1.0, 0.3, 0.0];
    assert_eq!(probe_state_time(&sh, &mat, x, 0.0).unwrap().disp, [0.0; 3]);
    let r = vec3::norm(x);
    let late = probe_state_time(&sh, &mat, x, (r + 0.2) * 1.01).unwrap();
    assert_eq!(late.disp, [0.0; 3]);
    let mid = probe_state_time(&sh, &mat, x, r).unwrap();
    assert!(vec3::norm(mid.disp) > 0.0);

    let ht = Probe::heat([0.0; 3], 1.0).unwrap();
    let (_, th0) = probe::probe_field_time(&ht, &mat, [0.4, 0.0, 0.0], 0.0).unwrap();
    assert_eq!(th0, 0.36);
}

#[test]
fn heat_time_probe_matches_gaussian_convolution() {
    let mat = unit_mat();
    let ht = Probe::heat([0.0; 3], 1.0).unwrap();
    let x = [2.0, 0.0, 0.0];
    let (_, th) = probe::probe_field_time(&ht, &mat, x, 0.5).unwrap();
    let or = heat_time_oracle(&ht, &mat, x, 0.5).unwrap();
    assert!((th - or).abs() < 1e-8, "{th} {or}");
}

#[test]
fn laplace_transform_of_time_probe_is_tau_probe() {
    let mat = Material::new(1.0, 1.0, 1.0, 0.5, 1.0, 1.0, 1.0).unwrap();
    let a = vec3::normalize([0.0, 1.0, 1.0]);
    let x = [0.9, 0.2, -0.1];
    for pr in [
        Probe::shear([2.0, 0.0, 0.0], 0.2, a).unwrap(),
        Probe::pressure([2.0, 0.0, 0.0], 0.2).unwrap(),
        Probe::heat([2.0, 0.0, 0.0], 0.2).unwrap(),
    ] {
        let tau = 3.0;
        let full = probe_state_tau(&pr, &mat, x, tau).unwrap();
        let t_end = 12.0;
        let r = vec3::dist(x, pr.p);
        let c = match pr.kind {
            thermo_enclosure_core::ProbeKind::Shear => mat.shear_speed(),
            _ => mat.pressure_speed(),
        };
        let breaks = [0.0, (r - pr.eta) / c, r / c, (r + pr.eta) / c, t_end];
        let direct = |f: &dyn Fn(f64) -> f64| {
            thermo_enclosure_core::quadrature::integrate_breaks(|t| (-tau * t).exp() * f(t), &breaks, 1e-15, 1e-12).0
        };
        let comp = match pr.kind {
            thermo_enclosure_core::ProbeKind::Heat => {
                let lt = direct(&|t| probe_state_time(&pr, &mat, x, t).unwrap().temp);
                let cf = probe_state_laplace(&pr, &mat, x, tau, t_end).unwrap().temp;
                assert!(rel(lt, cf) < 1e-7, "{lt} {cf}");
                rel(cf, full.temp)
            }
            _ => {
                let lt: Vec<f64> =
                    (0..3).map(|i| direct(&|t| probe_state_time(&pr, &mat, x, t).unwrap().disp[i])).collect();
                let lt = [lt[0], lt[1], lt[2]];
                assert!(relv(lt, full.disp) < 1e-8, "{:?} {:?}", lt, full.disp);
                0.0
            }
        };
        assert!(comp < 1e-12);
    }
}

#[test]
fn finite_horizon_transform_subtracts_tail() {
    let mat = unit_mat();
    let sh = Probe::shear([2.0, 0.0, 0.0], 0.2, [0.0, 0.0, 1.0]).unwrap();
    let x = [0.8, 0.3, 0.0];
    let tau = 4.0;
    let horizon = 1.2;
    let part = probe_state_laplace(&sh, &mat, x, tau, horizon).unwrap();
    let direct: Vec<f64> = (0..3)
        .map(|i| {
            thermo_enclosure_core::quadrature::integrate(
                |t| (-tau * t).exp() * probe_state_time(&sh, &mat, x, t).unwrap().disp[i],
                0.0,
                horizon,
                1e-16,
                1e-13,
            )
            .0
        })
        .collect();
    assert!(relv(part.disp, [direct[0], direct[1], direct[2]]) < 1e-8);
    let full = probe_state_tau(&sh, &mat, x, tau).unwrap();
    assert!(relv(part.disp, full.disp) > 1e-3);
}

#[test]
fn heat_finite_horizon_transform_matches_direct_quadrature() {
    let mat = Material::new(1.0, 1.0, 1.0, 0.0, 2.0, 0.7, 1.0).unwrap();
    let pr = Probe::heat([2.0, 0.0, 0.0], 0.2).unwrap();
    for &tau in &[0.5, 4.0, 20.0, 100.0] {
        for &horizon in &[0.3, 1.0, 2.0] {
            for &r in &[0.5, 1.0, 2.5] {
                let x = [2.0 - r * 0.6, r * 0.8, 0.0];
                let part = probe_state_laplace(&pr, &mat, x, tau, horizon).unwrap();
                let direct = |k: usize| {
                    thermo_enclosure_core::quadrature::integrate(
                        |t| {
                            let (v, dv) = probe::heat_radial(pr.eta, mat.diffusivity(), r, t);
                            (-tau * t).exp() * if k == 0 { v } else { dv }
                        },
                        0.0,
                        horizon,
                        1e-300,
                        1e-13,
                    )
                    .0
                };
                let (th, thr) = (direct(0), direct(1));
                assert!(rel(part.temp, th) < 1e-9, "tau {tau} T {horizon} r {r}: {} {th}", part.temp);
                let radial = vec3::dot(part.temp_grad, vec3::scale(vec3::sub(x, pr.p), 1.0 / r));
                assert!(rel(radial, thr) < 1e-9, "tau {tau} T {horizon} r {r}: {radial} {thr}");
            }
        }
    }
}

#[test]
fn memoized_transform_matches_pointwise() {
    let mat = Material::new(1.0, 1.0, 2.0, 0.3, 1.0, 1.0, 1.0).unwrap();
    for pr in [
        Probe::shear([2.0, 0.0, 0.0], 0.2, [0.0, 0.0, 1.0]).unwrap(),
        Probe::pressure([2.0, 0.0, 0.0], 0.2).unwrap(),
        Probe::heat([2.0, 0.0, 0.0], 0.2).unwrap(),
    ] {
        let lp = probe::LaplaceProbe::new(&pr, &mat, 3.0, 1.5).unwrap();
        for x in [[0.5, 0.1, 0.0], [0.5, -0.1, 0.0], [1.0, 0.0, 0.7], [0.4, 0.0, 0.0]] {
            let a = lp.state(x).unwrap();
            let b = probe_state_laplace(&pr, &mat, x, 3.0, 1.5).unwrap();
            assert!((a.temp - b.temp).abs() <= 1e-14 * b.temp.abs());
            assert!(vec3::norm(vec3::sub(a.disp, b.disp)) <= 1e-14 * vec3::norm(b.disp));
        }
    }
    assert!(probe::LaplaceProbe::new(&Probe::heat([2.0, 0.0, 0.0], 0.2).unwrap(), &mat, 3.0, 0.0).is_err());
}
