//! Exact special functions: the localized weight psi_l, the Bessel
//! potential of -Laplace + gamma, and the heat kernel, together with the
//! constants appearing in their gradient/Laplacian bounds.

use crate::error::{Error, Result};
use crate::quad::{laplace_half_line_capped, ln_gamma};

/// Sharp constant in |grad psi_l| <= (c1/l) sqrt(psi_l).
///
/// On [1, 3/2) the ratio |psi'|/sqrt(psi) = 4(r-1)/sqrt(1-2(r-1)^2) increases
/// to 2*sqrt(2) as r -> 3/2; on [3/2, 2) it is identically 4/sqrt(2) =
/// 2*sqrt(2). So c1 = 2*sqrt(2) and it is attained.
pub const PSI_GRAD_BOUND_C1: f64 = 2.0 * std::f64::consts::SQRT_2;

/// Constant in |lap psi_l| <= c2 / l^2 for dimension n, from |psi''| <= 4
/// and |psi'(r)/r| <= 4.
pub fn psi_laplacian_bound_c2(n: usize) -> f64 {
    4.0 + 4.0 * (n as f64 - 1.0)
}

/// Piecewise weight: 1 on [0,1), 1-2(r-1)^2 on [1,3/2), 2(2-r)^2 on [3/2,2),
/// 0 on [2,inf). Continuous, range [0,1]. Rejects negative r.
pub fn psi(r: f64) -> Result<f64> {
    if r < 0.0 || r.is_nan() {
        return Err(Error::InvalidInput(format!("psi requires r >= 0, got {r}")));
    }
    Ok(psi_unchecked(r))
}

fn psi_unchecked(r: f64) -> f64 {
    if r < 1.0 {
        1.0
    } else if r < 1.5 {
        1.0 - 2.0 * (r - 1.0) * (r - 1.0)
    } else if r < 2.0 {
        2.0 * (2.0 - r) * (2.0 - r)
    } else {
        0.0
    }
}

fn psi_prime(r: f64) -> f64 {
    if r < 1.0 {
        0.0
    } else if r < 1.5 {
        -4.0 * (r - 1.0)
    } else if r < 2.0 {
        -4.0 * (2.0 - r)
    } else {
        0.0
    }
}

fn psi_second(r: f64) -> f64 {
    if r < 1.0 {
        0.0
    } else if r < 1.5 {
        -4.0
    } else if r < 2.0 {
        4.0
    } else {
        0.0
    }
}

/// Scaled cutoff psi_l(x) = psi(|x - center| / l).
#[derive(Debug, Clone)]
pub struct CutoffSpec {
    pub scale: f64,
    pub center: [f64; 3],
}

impl CutoffSpec {
    pub fn new(scale: f64, center: [f64; 3]) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::InvalidInput(format!("cutoff scale {scale} must be positive")));
        }
        Ok(CutoffSpec { scale, center })
    }

    /// Centered at the origin.
    pub fn origin(scale: f64) -> Result<Self> {
        Self::new(scale, [0.0; 3])
    }
}

/// Value, gradient and Laplacian of psi_l at x (dimension = x.len()).
///
/// Chain rule in radial form: grad = psi'(rho)/l * xhat with rho = |x-c|/l,
/// lap = psi''(rho)/l^2 + (n-1)/|x-c| * psi'(rho)/l. At the center psi is
/// locally constant, so gradient and Laplacian are zero there.
pub fn psi_l(x: &[f64], spec: &CutoffSpec) -> (f64, [f64; 3], f64) {
    let n = x.len();
    let mut r2 = 0.0;
    for d in 0..n {
        let dx = x[d] - spec.center[d];
        r2 += dx * dx;
    }
    let r = r2.sqrt();
    let l = spec.scale;
    let rho = r / l;
    let value = psi_unchecked(rho);
    let mut grad = [0.0; 3];
    if r == 0.0 {
        return (value, grad, 0.0);
    }
    let dpsi = psi_prime(rho);
    for d in 0..n {
        grad[d] = dpsi / l * (x[d] - spec.center[d]) / r;
    }
    let lap = psi_second(rho) / (l * l) + (n as f64 - 1.0) / r * dpsi / l;
    (value, grad, lap)
}

/// Parameters of the Bessel potential of (-Laplace + gamma) on R^n.
#[derive(Debug, Clone, Copy)]
pub struct BesselParams {
    pub gamma: f64,
    pub dim: usize,
    /// Quadrature node cap for the s-integral (doubling stops here).
    pub max_nodes: usize,
}

impl BesselParams {
    pub fn new(gamma: f64, dim: usize) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidInput(format!("gamma {gamma} must be positive")));
        }
        if !(2..=3).contains(&dim) {
            return Err(Error::InvalidInput(format!(
                "Bessel potential needs dimension 2 or 3, got {dim}"
            )));
        }
        Ok(BesselParams {
            gamma,
            dim,
            max_nodes: 1 << 14,
        })
    }
}

/// G(x) = gamma^{n/2-1} a_n e^{-sqrt(gamma)|x|}
///        * int_0^inf e^{-sqrt(gamma)|x| s} (s + s^2/2)^{(n-3)/2} ds
/// with a_n = (2 (2 pi)^{(n-1)/2} Gamma((n-1)/2))^{-1}.
///
/// The s-integral is evaluated by exp-sinh quadrature with node doubling
/// to 1e-10 relative self-agreement (see quad::laplace_half_line); the
/// substitution absorbs the exponential tail. Refuses |x| = 0: the kernel
/// is singular there and cell-averaged handling belongs to the caller.
pub fn bessel_kernel(radius: f64, params: &BesselParams) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::InvalidInput(format!(
            "Bessel kernel is singular at |x| = 0 (got radius {radius})"
        )));
    }
    Ok(bessel_kernel_unchecked(radius, params))
}

pub(crate) fn bessel_kernel_unchecked(radius: f64, params: &BesselParams) -> f64 {
    let n = params.dim as f64;
    let z = params.gamma.sqrt() * radius;
    let a_n = 1.0
        / (2.0 * std::f64::consts::TAU.powf((n - 1.0) / 2.0) * ln_gamma((n - 1.0) / 2.0).exp());
    let cap = params.max_nodes;
    let integral = match params.dim {
        3 => laplace_half_line_capped(z, |_| 1.0, 1e-10, cap),
        2 => laplace_half_line_capped(z, |s| 1.0 / (s + 0.5 * s * s).sqrt(), 1e-10, cap),
        _ => laplace_half_line_capped(z, |s| (s + 0.5 * s * s).powf((n - 3.0) / 2.0), 1e-10, cap),
    };
    params.gamma.powf(n / 2.0 - 1.0) * a_n * (-z).exp() * integral
}

/// Heat kernel (4 pi t)^{-n/2} e^{-|x|^2 / 4t}; rejects t <= 0.
pub fn heat_kernel(radius: f64, t: f64, n: usize) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!("heat kernel requires t > 0, got {t}")));
    }
    let nn = n as f64;
    Ok((4.0 * std::f64::consts::PI * t).powf(-nn / 2.0) * (-radius * radius / (4.0 * t)).exp())
}
