//! Closed-form reference solutions used to validate the numerical paths
//! independently of the main solver.

use crate::error::{Error, Result};
use crate::quad::adaptive_gauss;

/// Source-type self-similar solution of u_t = lap(u^m):
/// U(x, s) = s^{-alpha} (C_M - k |x|^2 s^{-2 beta})_+^{1/(m-1)}
/// with alpha = n/(n(m-1)+2), beta = alpha/n, k = alpha(m-1)/(2mn)
/// and C_M fixed by the total mass.
#[derive(Debug, Clone, Copy)]
pub struct BarenblattSpec {
    pub m: f64,
    pub dim: usize,
    pub mass: f64,
    /// Time offset so the initial slice is bounded.
    pub t0: f64,
    c_m: f64,
}

impl BarenblattSpec {
    pub fn new(m: f64, dim: usize, mass: f64, t0: f64) -> Result<Self> {
        if !(m > 1.0) {
            return Err(Error::InvalidInput(format!("Barenblatt needs m > 1, got {m}")));
        }
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidInput(format!("dimension {dim} not in 1..=3")));
        }
        if !(mass > 0.0) || !(t0 > 0.0) {
            return Err(Error::InvalidInput(
                "Barenblatt needs mass > 0 and t0 > 0".into(),
            ));
        }
        let c_m = solve_c_m(m, dim, mass);
        Ok(BarenblattSpec { m, dim, mass, t0, c_m })
    }

    pub fn alpha(&self) -> f64 {
        let n = self.dim as f64;
        n / (n * (self.m - 1.0) + 2.0)
    }

    pub fn beta(&self) -> f64 {
        self.alpha() / self.dim as f64
    }

    pub fn k_profile(&self) -> f64 {
        let n = self.dim as f64;
        self.alpha() * (self.m - 1.0) / (2.0 * self.m * n)
    }

    /// Mass-normalization constant (solved once by bisection).
    pub fn c_m(&self) -> f64 {
        self.c_m
    }

    /// U at |x| = radius and simulation time t (true self-similar time t + t0).
    pub fn eval(&self, radius: f64, t: f64) -> f64 {
        let s = t + self.t0;
        let arg = self.c_m - self.k_profile() * radius * radius * s.powf(-2.0 * self.beta());
        if arg <= 0.0 {
            0.0
        } else {
            s.powf(-self.alpha()) * arg.powf(1.0 / (self.m - 1.0))
        }
    }

    /// Support radius at simulation time t: sqrt(C_M / k) (t + t0)^beta.
    pub fn support_radius(&self, t: f64) -> f64 {
        (self.c_m / self.k_profile()).sqrt() * (t + self.t0).powf(self.beta())
    }
}

/// Radial mass integral of the profile for a trial constant C.
/// Substituting y = y* sin(theta) removes the endpoint zero of the integrand.
fn profile_mass(c: f64, m: f64, dim: usize) -> f64 {
    let n = dim as f64;
    let alpha = n / (n * (m - 1.0) + 2.0);
    let k = alpha * (m - 1.0) / (2.0 * m * n);
    let ystar = (c / k).sqrt();
    let p = 1.0 / (m - 1.0);
    let surface = match dim {
        1 => 2.0,
        2 => std::f64::consts::TAU,
        _ => 2.0 * std::f64::consts::TAU,
    };
    let integrand = |theta: f64| {
        let y = ystar * theta.sin();
        let val = (c - k * y * y).max(0.0).powf(p);
        val * y.powf(n - 1.0) * ystar * theta.cos()
    };
    surface * adaptive_gauss(integrand, 0.0, std::f64::consts::FRAC_PI_2, 1e-12)
}

/// Bisection on the (monotone) mass integral; bracket width 1e-12 relative.
fn solve_c_m(m: f64, dim: usize, mass: f64) -> f64 {
    let mut lo = 1e-12;
    let mut hi = 1.0;
    while profile_mass(hi, m, dim) < mass {
        hi *= 2.0;
        if hi > 1e12 {
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if profile_mass(mid, m, dim) < mass {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) < 1e-12 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Gaussian data evolved by z_t = lap z - gamma z: heat spreading times
/// exponential decay. Mass sigma at t: sqrt(sigma0^2 + 2t) per axis.
#[derive(Debug, Clone, Copy)]
pub struct GaussianSpec {
    pub mass: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub dim: usize,
}

/// Closed-form value at |x| = radius, time t >= 0.
pub fn heat_solution(radius: f64, t: f64, spec: &GaussianSpec) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::InvalidInput(format!("heat solution needs t >= 0, got {t}")));
    }
    let s2 = spec.sigma * spec.sigma + 2.0 * t;
    let n = spec.dim as f64;
    Ok(spec.mass * (std::f64::consts::TAU * s2).powf(-n / 2.0)
        * (-radius * radius / (2.0 * s2)).exp()
        * (-spec.gamma * t).exp())
}

/// Bessel potential in three dimensions: e^{-sqrt(gamma)|x|} / (4 pi |x|).
pub fn bessel_closed_form_3d(radius: f64, gamma: f64) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::InvalidInput("closed form is singular at |x| = 0".into()));
    }
    Ok((-(gamma.sqrt()) * radius).exp() / (4.0 * std::f64::consts::PI * radius))
}
