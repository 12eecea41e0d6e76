use crate::error::{invalid, Result};

/// Constants of a homogeneous isotropic thermoelastic body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub rho: f64,
    pub mu: f64,
    pub lambda: f64,
    /// Stress-temperature modulus; any real value.
    pub m: f64,
    pub c: f64,
    pub k: f64,
    pub theta0: f64,
}

impl Material {
    pub fn new(rho: f64, mu: f64, lambda: f64, m: f64, c: f64, k: f64, theta0: f64) -> Result<Self> {
        let mat = Material { rho, mu, lambda, m, c, k, theta0 };
        mat.validate()?;
        Ok(mat)
    }

    /// All constants equal to one except `m = 0.5`.
    pub fn benchmark() -> Self {
        Material { rho: 1.0, mu: 1.0, lambda: 1.0, m: 0.5, c: 1.0, k: 1.0, theta0: 1.0 }
    }

    pub fn with_m(self, m: f64) -> Self {
        Material { m, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.rho, self.mu, self.lambda, self.m, self.c, self.k, self.theta0];
        if all.iter().any(|v| !v.is_finite()) {
            return invalid("material constants must be finite");
        }
        if !(self.rho > 0.0 && self.c > 0.0 && self.k > 0.0 && self.theta0 > 0.0) {
            return invalid("rho, c, k and theta0 must be positive");
        }
        if !(self.mu > 0.0 && 3.0 * self.lambda + 2.0 * self.mu > 0.0) {
            return invalid("require mu > 0 and 3*lambda + 2*mu > 0");
        }
        Ok(())
    }

    pub fn shear_speed(&self) -> f64 {
        libm::sqrt(self.mu / self.rho)
    }

    pub fn pressure_speed(&self) -> f64 {
        libm::sqrt((self.lambda + 2.0 * self.mu) / self.rho)
    }

    pub fn diffusivity(&self) -> f64 {
        self.k / self.c
    }

    /// sqrt(rho/mu)
    pub fn shear_slowness(&self) -> f64 {
        1.0 / self.shear_speed()
    }

    /// sqrt(rho/(lambda+2mu))
    pub fn pressure_slowness(&self) -> f64 {
        1.0 / self.pressure_speed()
    }

    /// sqrt(c/k)
    pub fn heat_slowness(&self) -> f64 {
        libm::sqrt(self.c / self.k)
    }
}
