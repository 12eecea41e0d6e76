//! Gauss–Legendre, adaptive Gauss–Kronrod and simplex rules.

use alloc::vec::Vec;
use core::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    if n == 1 {
        return (alloc::vec![0.0], alloc::vec![2.0]);
    }
    let mut x = alloc::vec![0.0; n];
    let mut w = alloc::vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = libm::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if libm::fabs(dz) < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let h = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    (x.iter().map(|t| c + h * t).collect(), w.iter().map(|v| v * h).collect())
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, libm::fabs((rk - rg) * h))
}

/// Adaptive Gauss–Kronrod (7/15) integration of `f` over `[a, b]`.
///
/// Bisects the interval with the largest error estimate until the summed
/// estimate is below `max(abs_tol, rel_tol·|I|)`. Returns `(value, error)`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> (f64, f64) {
    integrate_mut(&mut f, a, b, abs_tol, rel_tol)
}

fn integrate_mut<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> (f64, f64) {
    if a == b {
        return (0.0, 0.0);
    }
    let mut parts: Vec<(f64, f64, f64, f64)> = Vec::new();
    let (v, e) = gk15(f, a, b);
    parts.push((a, b, v, e));
    let (mut total, mut err) = (v, e);
    for _ in 0..2000 {
        if err <= abs_tol.max(rel_tol * libm::fabs(total)) {
            break;
        }
        let (imax, _) = parts
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc });
        let (lo, hi, pv, pe) = parts.swap_remove(imax);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            parts.push((lo, hi, pv, 0.0));
            err -= pe;
            continue;
        }
        let (v1, e1) = gk15(f, lo, mid);
        let (v2, e2) = gk15(f, mid, hi);
        total += v1 + v2 - pv;
        err += e1 + e2 - pe;
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
    let total: f64 = parts.iter().map(|p| p.2).sum();
    let err: f64 = parts.iter().map(|p| p.3).sum();
    (total, err)
}

/// Adaptive integration over consecutive sub-intervals of sorted `breaks`.
pub fn integrate_breaks<F: FnMut(f64) -> f64>(mut f: F, breaks: &[f64], abs_tol: f64, rel_tol: f64) -> (f64, f64) {
    let n = breaks.len().saturating_sub(1).max(1);
    let mut total = 0.0;
    let mut err = 0.0;
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let (v, e) = integrate_mut(&mut f, w[0], w[1], abs_tol / n as f64, rel_tol);
            total += v;
            err += e;
        }
    }
    (total, err)
}

/// Barycentric points and weights (summing to 1) of a triangle rule.
pub struct TriRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl TriRule {
    /// Degree-2 rule with three interior points.
    pub fn three_point() -> Self {
        let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
        TriRule { points: alloc::vec![[a, b, b], [b, a, b], [b, b, a]], weights: alloc::vec![1.0 / 3.0; 3] }
    }

    /// Degree-5 rule with seven points.
    pub fn seven_point() -> Self {
        let (a1, b1) = (0.059715871789770, 0.470142064105115);
        let (a2, b2) = (0.797426985353087, 0.101286507323456);
        let (w1, w2) = (0.132394152788506, 0.125939180544827);
        TriRule {
            points: alloc::vec![
                [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
                [a1, b1, b1],
                [b1, a1, b1],
                [b1, b1, a1],
                [a2, b2, b2],
                [b2, a2, b2],
                [b2, b2, a2],
            ],
            weights: alloc::vec![0.225, w1, w1, w1, w2, w2, w2],
        }
    }

    /// Rule with this order: 3 → three-point, anything else → seven-point.
    pub fn with_points(n: usize) -> Self {
        if n == 3 {
            Self::three_point()
        } else {
            Self::seven_point()
        }
    }
}

/// Barycentric points and weights (summing to 1) of a tetrahedron rule.
pub struct TetRule {
    pub points: Vec<[f64; 4]>,
    pub weights: Vec<f64>,
}

impl TetRule {
    /// Degree-2 rule with four points.
    pub fn four_point() -> Self {
        let a = 0.585410196624968515;
        let b = 0.138196601125010515;
        TetRule {
            points: alloc::vec![[a, b, b, b], [b, a, b, b], [b, b, a, b], [b, b, b, a]],
            weights: alloc::vec![0.25; 4],
        }
    }

    /// Degree-5 rule with fourteen points and positive weights.
    pub fn fourteen_point() -> Self {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for &(al, w) in &[(0.3108859192633006, 0.1126879257180159), (0.0927352503108912, 0.0734930431163619)] {
            let be = 1.0 - 3.0 * al;
            for i in 0..4 {
                let mut p = [al; 4];
                p[i] = be;
                points.push(p);
                weights.push(w);
            }
        }
        let a = 0.0455037041256496;
        let b = 0.5 - a;
        for &(i, j) in &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)] {
            let mut p = [b; 4];
            p[i] = a;
            p[j] = a;
            points.push(p);
            weights.push(0.0425460207770812);
        }
        TetRule { points, weights }
    }
}
