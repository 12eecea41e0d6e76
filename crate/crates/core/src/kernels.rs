//! Radial kernels of the ball moment integrals.
//!
//! With `s = τη` the moments of `e^{-τ|x-y|}/|x-y|` over the ball reduce to
//!
//! * `φ_j(s) = ∫₀ˢ t^{j+1} sinh t dt`, so `φ₀ = s cosh s − sinh s`,
//!   `φ₁ = (s²+2) cosh s − 2s sinh s − 2`, `φ₂ = s(s²+6) cosh s − 3(s²+2) sinh s`;
//! * `ψ₀ = s sinh s − 2 cosh s + 2` and `ψ₁ = s² sinh s − 3s cosh s + 3 sinh s`
//!   for the vector moments;
//! * `W(s) = s ψ₀ − ψ₁ = s cosh s − 3 sinh s + 2s`, the profile of the
//!   potential generated by the density `(η − r)²`.
//!
//! The `*_bar` variants return `f(s)·e^{-s}/s^n` with `n` the leading power of
//! the small-`s` expansion, which stays finite and accurate for every `s ≥ 0`.

const SERIES_MAX: f64 = 4.0;
const MAX_TERMS: usize = 200;

fn sum_series(mut term: f64, s2: f64, first_n: usize, coeff: impl Fn(usize) -> f64) -> f64 {
    // term = s^{2(n - first_n)} / (2n+1)! at n = first_n
    let mut sum = 0.0;
    for n in first_n..first_n + MAX_TERMS {
        let add = term * coeff(n);
        sum += add;
        if libm::fabs(add) <= 1e-18 * libm::fabs(sum) {
            break;
        }
        term *= s2 / (((2 * n + 2) * (2 * n + 3)) as f64);
    }
    sum
}

/// `φ_j(s)/s^{j+3}` by its power series.
fn phi_norm_series(j: usize, s: f64) -> f64 {
    sum_series(1.0, s * s, 0, |n| 1.0 / ((2 * n + j + 3) as f64))
}

fn psi_norm_series(j: usize, s: f64) -> f64 {
    sum_series(1.0 / 6.0, s * s, 1, |n| (2 * n) as f64 / ((2 * n + 2 + j) as f64))
}

fn w_norm_series(s: f64) -> f64 {
    sum_series(1.0 / 6.0, s * s, 1, |n| {
        (2 * n) as f64 / (((2 * n + 2) * (2 * n + 3)) as f64)
    })
}

fn powi(s: f64, n: usize) -> f64 {
    libm::pow(s, n as f64)
}

/// `φ_j(s)·e^{-s}/s^{j+3}` for `j ∈ {0,1,2}`.
pub fn phi_bar(j: usize, s: f64) -> f64 {
    assert!(j <= 2, "phi_bar: j must be 0, 1 or 2");
    if s <= SERIES_MAX {
        return phi_norm_series(j, s) * libm::exp(-s);
    }
    let e1 = libm::exp(-s);
    let e2 = e1 * e1;
    let scaled = match j {
        0 => 0.5 * (s - 1.0) + 0.5 * e2 * (s + 1.0),
        1 => 0.5 * (s * s - 2.0 * s + 2.0) + 0.5 * e2 * (s * s + 2.0 * s + 2.0) - 2.0 * e1,
        _ => {
            let s2 = s * s;
            0.5 * (s2 * s - 3.0 * s2 + 6.0 * s - 6.0) + 0.5 * e2 * (s2 * s + 3.0 * s2 + 6.0 * s + 6.0)
        }
    };
    scaled / powi(s, j + 3)
}

/// `ψ_j(s)·e^{-s}/s^{j+4}` for `j ∈ {0,1}`.
pub fn psi_bar(j: usize, s: f64) -> f64 {
    assert!(j <= 1, "psi_bar: j must be 0 or 1");
    if s <= SERIES_MAX {
        return psi_norm_series(j, s) * libm::exp(-s);
    }
    let e1 = libm::exp(-s);
    let e2 = e1 * e1;
    let scaled = if j == 0 {
        0.5 * (s - 2.0) - 0.5 * e2 * (s + 2.0) + 2.0 * e1
    } else {
        0.5 * (s * s - 3.0 * s + 3.0) - 0.5 * e2 * (s * s + 3.0 * s + 3.0)
    };
    scaled / powi(s, j + 4)
}

/// `W(s)·e^{-s}/s^5` with `W(s) = s cosh s − 3 sinh s + 2s`.
pub fn w_bar(s: f64) -> f64 {
    if s <= SERIES_MAX {
        return w_norm_series(s) * libm::exp(-s);
    }
    let e1 = libm::exp(-s);
    let e2 = e1 * e1;
    (0.5 * (s - 3.0) + 0.5 * e2 * (s + 3.0) + 2.0 * s * e1) / powi(s, 5)
}

/// `φ_j(s)` unscaled. Overflows beyond `s ≈ 700`.
pub fn phi(j: usize, s: f64) -> f64 {
    if s <= SERIES_MAX {
        return phi_norm_series(j, s) * powi(s, j + 3);
    }
    phi_bar(j, s) * powi(s, j + 3) * libm::exp(s)
}

/// `ψ_j(s)` unscaled.
pub fn psi(j: usize, s: f64) -> f64 {
    if s <= SERIES_MAX {
        return psi_norm_series(j, s) * powi(s, j + 4);
    }
    psi_bar(j, s) * powi(s, j + 4) * libm::exp(s)
}

/// `W(s)` unscaled.
pub fn w_profile(s: f64) -> f64 {
    if s <= SERIES_MAX {
        return w_norm_series(s) * powi(s, 5);
    }
    w_bar(s) * powi(s, 5) * libm::exp(s)
}

/// Vector-moment kernel `K⁰_τ(ξ,s)` in the normalization
/// `I⃗₀ = π e^{-τξ}/ξ² K⁰ x̂`, i.e. `K⁰ = 4(1+τξ)ψ₀(s)/τ⁴`.
pub fn k0(tau: f64, xi: f64, s: f64) -> f64 {
    4.0 * (1.0 + tau * xi) * psi(0, s) / powi(tau, 4)
}

/// Vector-moment kernel `K¹_τ(ξ,s)` in the normalization
/// `I⃗₁ = (4π/τ²) e^{-τξ}/ξ² K¹ x̂`, i.e. `K¹ = (1+τξ)ψ₁(s)/τ³`.
pub fn k1(tau: f64, xi: f64, s: f64) -> f64 {
    (1.0 + tau * xi) * psi(1, s) / powi(tau, 3)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn closed_forms_match_hyperbolic_expressions() {
        for &s in &[4.5f64, 7.0, 12.0, 25.0] {
            let (ch, sh) = (s.cosh(), s.sinh());
            assert!(rel(phi(0, s), s * ch - sh) < 1e-13);
            assert!(rel(phi(1, s), (s * s + 2.0) * ch - 2.0 * s * sh - 2.0) < 1e-13);
            assert!(rel(phi(2, s), s * (s * s + 6.0) * ch - 3.0 * (s * s + 2.0) * sh) < 1e-13);
            assert!(rel(psi(0, s), s * sh - 2.0 * ch + 2.0) < 1e-13);
            assert!(rel(psi(1, s), s * s * sh - 3.0 * s * ch + 3.0 * sh) < 1e-13);
            assert!(rel(w_profile(s), s * ch - 3.0 * sh + 2.0 * s) < 1e-13);
        }
    }

    #[test]
    fn branches_agree_at_switch() {
        let lo = SERIES_MAX * (1.0 - 1e-12);
        let hi = SERIES_MAX * (1.0 + 1e-12);
        for j in 0..3 {
            assert!(rel(phi_bar(j, lo), phi_bar(j, hi)) < 1e-11);
        }
        for j in 0..2 {
            assert!(rel(psi_bar(j, lo), psi_bar(j, hi)) < 1e-11);
        }
        assert!(rel(w_bar(lo), w_bar(hi)) < 1e-11);
    }

    #[test]
    fn small_s_leading_terms() {
        let s = 1e-3;
        assert!(rel(phi(0, s), s.powi(3) / 3.0) < 1e-6);
        assert!(rel(phi(1, s), s.powi(4) / 4.0) < 1e-6);
        assert!(rel(phi(2, s), s.powi(5) / 5.0) < 1e-6);
        assert!(rel(psi(0, s), s.powi(4) / 12.0) < 1e-6);
        assert!(rel(psi(1, s), s.powi(5) / 15.0) < 1e-6);
        assert!(rel(w_profile(s), s.powi(5) / 60.0) < 1e-6);
    }

    #[test]
    fn no_overflow_at_large_s() {
        for &s in &[700.0, 1e4, 1e8] {
            for j in 0..3 {
                assert!(phi_bar(j, s).is_finite() && phi_bar(j, s) > 0.0);
            }
            assert!(psi_bar(0, s) > 0.0 && psi_bar(1, s) > 0.0 && w_bar(s) > 0.0);
        }
    }
}
