//! Concentration solvers: v from u in the elliptic regime (delta = 0) by
//! spectral diagonalization or Bessel-kernel convolution, and the damped
//! heat evolution (delta = 1) by an exact-linear-part Duhamel step.

use crate::diagnostics::lp_norm;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};
use crate::kernels::{bessel_kernel_unchecked, BesselParams};
use crate::quad::gamma_fn;
use crate::spectral::SpectralGrid;
use rustfft::num_complex::Complex64;
use std::collections::HashMap;

/// Which elliptic route produces v.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChemoMethod {
    Spectral,
    Convolution,
}

#[derive(Debug, Clone, Copy)]
pub struct ChemoConfig {
    pub gamma: f64,
    /// 0 = elliptic (v slaved to u), 1 = parabolic.
    pub delta: u8,
    pub method: ChemoMethod,
    /// Residual tolerance used by audits of the spectral path.
    pub residual_tol: f64,
}

impl ChemoConfig {
    pub fn new(gamma: f64, delta: u8) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidInput(format!("gamma {gamma} must be positive")));
        }
        if delta > 1 {
            return Err(Error::InvalidInput(format!("delta {delta} must be 0 or 1")));
        }
        Ok(ChemoConfig {
            gamma,
            delta,
            method: ChemoMethod::Spectral,
            residual_tol: 1e-10,
        })
    }

    /// Elliptic solve dispatching on the configured method. The spectral
    /// path verifies its discrete residual against `residual_tol`; the
    /// convolution path needs a prebuilt kernel table.
    pub fn solve_elliptic(
        &self,
        u: &ScalarField,
        table: Option<&BesselKernelTable>,
    ) -> Result<ScalarField> {
        match self.method {
            ChemoMethod::Spectral => {
                let v = solve_elliptic_spectral(u, self.gamma);
                let lap = crate::grid::laplacian(&v);
                let mut res = 0.0f64;
                for i in 0..u.grid.cell_count() {
                    res = res.max((-lap.values[i] + self.gamma * v.values[i] - u.values[i]).abs());
                }
                if res > self.residual_tol * u.max_abs().max(f64::MIN_POSITIVE) {
                    return Err(Error::NonFinite(format!(
                        "spectral residual {res} exceeds tolerance"
                    )));
                }
                Ok(v)
            }
            ChemoMethod::Convolution => {
                let table = table.ok_or_else(|| {
                    Error::InvalidInput("convolution method needs a kernel table".into())
                })?;
                let (v, _) = solve_elliptic_convolution(u, table)?;
                Ok(v)
            }
        }
    }
}

/// Solves -lap_h v + gamma v = u by dividing each Fourier mode by
/// sigma(k) + gamma (strictly positive since gamma > 0). The result
/// satisfies the discrete equation to round-off.
pub fn solve_elliptic_spectral_with(
    sp: &mut SpectralGrid,
    u: &ScalarField,
    gamma: f64,
) -> ScalarField {
    let mut hat = sp.forward(u);
    for (c, s) in hat.iter_mut().zip(sp.symbol().to_vec()) {
        *c /= s + gamma;
    }
    let values = sp.inverse(hat);
    ScalarField {
        grid: u.grid,
        values,
        time: u.time,
    }
}

/// One-shot spectral solve (plans built per call; use
/// [`solve_elliptic_spectral_with`] inside time loops).
pub fn solve_elliptic_spectral(u: &ScalarField, gamma: f64) -> ScalarField {
    let mut sp = SpectralGrid::new(u.grid);
    solve_elliptic_spectral_with(&mut sp, u, gamma)
}

/// Periodized cell-averaged tabulation of the Bessel potential on a grid,
/// with its DFT precomputed for circular convolution.
///
/// Tabulation: the value for a cell offset is summed over the 3^n periodic
/// images within the decay cutoff. The singular cell uses a 32^n midpoint
/// sub-quadrature of the cell average; cells within four spacings use a
/// tensor Gauss-Legendre cell average; beyond that the cell average equals
/// G(r) (1 + gamma h^2 / 24) + O(h^4) by the kernel identity lap G = gamma G.
pub struct BesselKernelTable {
    pub grid: GridSpec,
    pub params: BesselParams,
    kernel_hat: Vec<Complex64>,
}

const GL4: [(f64, f64); 4] = [
    (-0.8611363115940526, 0.34785484513745385),
    (-0.3399810435848563, 0.6521451548625461),
    (0.3399810435848563, 0.6521451548625461),
    (0.8611363115940526, 0.34785484513745385),
];

impl BesselKernelTable {
    pub fn build(grid: GridSpec, params: BesselParams) -> Result<Self> {
        if grid.n != params.dim {
            return Err(Error::InvalidInput(format!(
                "kernel dimension {} does not match grid dimension {}",
                params.dim, grid.n
            )));
        }
        let h = grid.h();
        let l = grid.l;
        let n = grid.n;
        let r_cut = 40.0 / params.gamma.sqrt();
        let near_radius = 4.0 * h;
        let curvature = 1.0 + params.gamma * h * h / 24.0;
        let mut cache: HashMap<u64, f64> = HashMap::new();
        let mut eval = |r: f64| -> f64 {
            *cache
                .entry(r.to_bits())
                .or_insert_with(|| bessel_kernel_unchecked(r, &params))
        };

        let mut kernel = vec![0.0f64; grid.cell_count()];
        let images: Vec<[f64; 3]> = {
            let mut v = Vec::new();
            let range = |dim_active: bool| if dim_active { -1i32..=1 } else { 0..=0 };
            for mi in range(n >= 1) {
                for mj in range(n >= 2) {
                    for mk in range(n >= 3) {
                        v.push([
                            2.0 * l * mi as f64,
                            2.0 * l * mj as f64,
                            2.0 * l * mk as f64,
                        ]);
                    }
                }
            }
            v
        };

        for (flat, slot) in kernel.iter_mut().enumerate() {
            let idx = grid.unravel(flat);
            let mut off = [0.0f64; 3];
            for d in 0..n {
                let v = idx[d] as f64 * h;
                off[d] = if v >= l { v - 2.0 * l } else { v };
            }
            let mut total = 0.0;
            for img in &images {
                let p = [off[0] + img[0], off[1] + img[1], off[2] + img[2]];
                let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                if r > r_cut {
                    continue;
                }
                if r == 0.0 {
                    total += singular_cell_average(h, n, &params);
                } else if r <= near_radius {
                    total += gl_cell_average(&p, h, n, &params);
                } else {
                    total += eval(r) * curvature;
                }
            }
            *slot = total;
        }

        let mut sp = SpectralGrid::new(grid);
        let as_field = ScalarField {
            grid,
            values: kernel,
            time: 0.0,
        };
        let kernel_hat = sp.forward(&as_field);
        Ok(BesselKernelTable {
            grid,
            params,
            kernel_hat,
        })
    }
}

/// 32^n midpoint sub-quadrature of the kernel average over the cell at the
/// origin. Sub-cell centers never coincide with the singular point.
fn singular_cell_average(h: f64, n: usize, params: &BesselParams) -> f64 {
    let m = 32usize;
    let sh = h / m as f64;
    let coord = |a: usize| -> f64 { -h / 2.0 + (a as f64 + 0.5) * sh };
    let mut acc = 0.0;
    match n {
        2 => {
            for a in 0..m {
                for b in 0..m {
                    let r = (coord(a).powi(2) + coord(b).powi(2)).sqrt();
                    acc += bessel_kernel_unchecked(r, params);
                }
            }
            acc / (m * m) as f64
        }
        _ => {
            for a in 0..m {
                for b in 0..m {
                    for c in 0..m {
                        let r = (coord(a).powi(2) + coord(b).powi(2) + coord(c).powi(2)).sqrt();
                        acc += bessel_kernel_unchecked(r, params);
                    }
                }
            }
            acc / (m * m * m) as f64
        }
    }
}

/// Tensor 4-point Gauss-Legendre average of the kernel over the cell
/// centered at p.
fn gl_cell_average(p: &[f64; 3], h: f64, n: usize, params: &BesselParams) -> f64 {
    let mut acc = 0.0;
    match n {
        2 => {
            for &(ga, wa) in &GL4 {
                for &(gb, wb) in &GL4 {
                    let x = p[0] + 0.5 * h * ga;
                    let y = p[1] + 0.5 * h * gb;
                    acc += wa * wb * bessel_kernel_unchecked((x * x + y * y).sqrt(), params);
                }
            }
            acc / 4.0
        }
        _ => {
            for &(ga, wa) in &GL4 {
                for &(gb, wb) in &GL4 {
                    for &(gc, wc) in &GL4 {
                        let x = p[0] + 0.5 * h * ga;
                        let y = p[1] + 0.5 * h * gb;
                        let z = p[2] + 0.5 * h * gc;
                        acc += wa
                            * wb
                            * wc
                            * bessel_kernel_unchecked((x * x + y * y + z * z).sqrt(), params);
                    }
                }
            }
            acc / 8.0
        }
    }
}

/// Discrete convolution v = h^n sum_j K(x - y_j) u(y_j) evaluated as a
/// circular convolution. Returns the solution and a flag set when the
/// support of u approaches the box boundary (beyond 3/4 of the half-width).
pub fn solve_elliptic_convolution(
    u: &ScalarField,
    table: &BesselKernelTable,
) -> Result<(ScalarField, bool)> {
    if u.grid != table.grid {
        return Err(Error::GridMismatch);
    }
    let grid = u.grid;
    let threshold = 1e-12 * u.max_abs();
    let mut warn = false;
    if threshold > 0.0 {
        let edge = 0.75 * grid.l;
        for (i, &v) in u.values.iter().enumerate() {
            if v.abs() > threshold {
                let x = grid.position(i);
                if (0..grid.n).any(|d| x[d].abs() > edge) {
                    warn = true;
                    break;
                }
            }
        }
    }
    let mut sp = SpectralGrid::new(grid);
    let mut hat = sp.forward(u);
    let hn = grid.cell_volume();
    for (c, k) in hat.iter_mut().zip(&table.kernel_hat) {
        *c *= k * hn;
    }
    let values = sp.inverse(hat);
    Ok((
        ScalarField {
            grid,
            values,
            time: u.time,
        },
        warn,
    ))
}

/// One Duhamel step for delta v_t = lap v - gamma v + u over dt:
/// each mode is propagated exactly by exp(-(sigma + gamma) dt) and the
/// source is integrated by the trapezoidal rule in the integrating-factor
/// frame (needs u at both step endpoints). Unconditionally stable,
/// second order in dt.
pub fn step_v_parabolic_with(
    sp: &mut SpectralGrid,
    v: &ScalarField,
    u_old: &ScalarField,
    u_new: &ScalarField,
    dt: f64,
    gamma: f64,
) -> Result<ScalarField> {
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("parabolic step needs dt > 0, got {dt}")));
    }
    let mut v_hat = sp.forward(v);
    let u_old_hat = sp.forward(u_old);
    let u_new_hat = sp.forward(u_new);
    let symbol = sp.symbol().to_vec();
    for i in 0..v_hat.len() {
        let lam = symbol[i] + gamma;
        let e = (-lam * dt).exp();
        v_hat[i] = v_hat[i] * e + 0.5 * dt * (u_old_hat[i] * e + u_new_hat[i]);
    }
    let values = sp.inverse(v_hat);
    Ok(ScalarField {
        grid: v.grid,
        values,
        time: v.time + dt,
    })
}

/// One-shot wrapper building the plans per call.
pub fn step_v_parabolic(
    v: &ScalarField,
    u_old: &ScalarField,
    u_new: &ScalarField,
    dt: f64,
    gamma: f64,
) -> Result<ScalarField> {
    let mut sp = SpectralGrid::new(v.grid);
    step_v_parabolic_with(&mut sp, v, u_old, u_new, dt, gamma)
}

/// Empirical audit of the semigroup estimates
/// ||v(t)||_p <= ||v0||_p + C Gamma(a) sup_s ||u(s)||_{p'} and the
/// gradient analogue with Gamma(a~), where a = 1 - (1/p' - 1/p) n/2 and
/// a~ = 1/2 - (1/p' - 1/p) n/2. Report-only: emits the empirical ratio
/// playing the role of C, never asserts a magnitude.
#[derive(Debug, Clone)]
pub struct SemigroupReport {
    pub p: f64,
    pub p_prime: f64,
    pub a: f64,
    pub a_tilde: f64,
    pub gamma_a: f64,
    pub gamma_a_tilde: f64,
    pub times: Vec<f64>,
    /// (||v(t)||_p - ||v0||_p)_+ / (Gamma(a) sup_{s<=t} ||u(s)||_{p'})
    pub c_emp: Vec<f64>,
    pub c_emp_grad: Vec<f64>,
    pub flags: Vec<String>,
}

pub fn audit_semigroup_bounds(
    snaps: &[(f64, &ScalarField, &ScalarField)],
    p: f64,
    p_prime: f64,
) -> Result<SemigroupReport> {
    if snaps.is_empty() {
        return Err(Error::InvalidInput("audit needs at least one snapshot".into()));
    }
    let n = snaps[0].1.grid.n as f64;
    if !(1.0 <= p_prime && p_prime <= p) {
        return Err(Error::InvalidInput(format!(
            "exponents must satisfy 1 <= p' <= p <= inf, got p'={p_prime}, p={p}"
        )));
    }
    let inv = |x: f64| if x.is_infinite() { 0.0 } else { 1.0 / x };
    let gap = inv(p_prime) - inv(p);
    if !(gap < 1.0 / n) {
        return Err(Error::InvalidInput(format!(
            "1/p' - 1/p = {gap} violates the hypothesis < 1/n = {}",
            1.0 / n
        )));
    }
    let a = 1.0 - gap * n / 2.0;
    let a_tilde = 0.5 - gap * n / 2.0;
    let mut flags = Vec::new();
    if a <= 0.0 {
        flags.push("a_nonpositive".into());
    }
    if a_tilde <= 0.0 {
        flags.push("a_tilde_nonpositive_outside_hypotheses".into());
    }
    let gamma_a = gamma_fn(a);
    let gamma_a_tilde = gamma_fn(a_tilde);

    let v0_p = lp_norm(snaps[0].2, p)?;
    let grad_mag = |f: &ScalarField| -> ScalarField {
        let g = crate::grid::gradient(f);
        let m = f.grid.cell_count();
        let mut out = ScalarField::zeros(f.grid);
        for cell in 0..m {
            let mut s = 0.0;
            for d in 0..f.grid.n {
                let v = g.component(d)[cell];
                s += v * v;
            }
            out.values[cell] = s.sqrt();
        }
        out
    };
    let grad_v0_p = lp_norm(&grad_mag(snaps[0].2), p)?;

    let mut times = Vec::new();
    let mut c_emp = Vec::new();
    let mut c_emp_grad = Vec::new();
    let mut sup_u = 0.0f64;
    let mut empty = false;
    for &(t, u, v) in snaps {
        sup_u = sup_u.max(lp_norm(u, p_prime)?);
        let denom = gamma_a * sup_u;
        let denom_grad = gamma_a_tilde * sup_u;
        times.push(t);
        if denom > 0.0 {
            c_emp.push((lp_norm(v, p)? - v0_p).max(0.0) / denom);
        } else {
            c_emp.push(0.0);
            empty = true;
        }
        if denom_grad > 0.0 {
            c_emp_grad.push((lp_norm(&grad_mag(v), p)? - grad_v0_p).max(0.0) / denom_grad);
        } else {
            c_emp_grad.push(0.0);
        }
    }
    if empty {
        flags.push("zero_source_ratio_undefined".into());
    }
    Ok(SemigroupReport {
        p,
        p_prime,
        a,
        a_tilde,
        gamma_a,
        gamma_a_tilde,
        times,
        c_emp,
        c_emp_grad,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{integrate, laplacian, GridSpec};

    #[test]
    fn spectral_constant_input() {
        let g = GridSpec::new(2, 1.0, 16).unwrap();
        let u = ScalarField::constant(g, 3.0);
        let v = solve_elliptic_spectral(&u, 1.5);
        for &x in &v.values {
            assert!((x - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn spectral_residual_to_roundoff() {
        let g = GridSpec::new(2, 2.0, 64).unwrap();
        let u = ScalarField::from_fn(g, |x| (-(x[0] * x[0] + x[1] * x[1])).exp());
        let gamma = 0.7;
        let v = solve_elliptic_spectral(&u, gamma);
        let lap = laplacian(&v);
        let mut res = 0.0f64;
        for i in 0..g.cell_count() {
            res = res.max((-lap.values[i] + gamma * v.values[i] - u.values[i]).abs());
        }
        assert!(res <= 1e-10 * u.max_abs(), "residual {res}");
    }

    #[test]
    fn spectral_eigenfunction_1d() {
        // u = A cos(2 pi x / L): eigenfunction of the discrete symbol
        let l = 2.0;
        let g = GridSpec::new(1, l, 64).unwrap();
        let amp = 1.7;
        let gamma = 0.9;
        let u = ScalarField::from_fn(g, |x| amp * (std::f64::consts::TAU * x[0] / (2.0 * l)).cos());
        let v = solve_elliptic_spectral(&u, gamma);
        // discrete symbol at k = 1: (2 - 2cos(2 pi / N)) / h^2
        let h = g.h();
        let sym = (2.0 - 2.0 * (std::f64::consts::TAU / 64.0).cos()) / (h * h);
        for i in 0..g.cell_count() {
            let expect = u.values[i] / (sym + gamma);
            assert!((v.values[i] - expect).abs() < 1e-12);
        }
        // continuous symbol agrees to O(h^2)
        let k = std::f64::consts::TAU / (2.0 * l);
        assert!((sym - k * k).abs() < k.powi(4) * h * h / 12.0 * 1.01);
    }

    #[test]
    fn spectral_mean_identity() {
        let g = GridSpec::new(1, 1.0, 32).unwrap();
        let u = ScalarField::from_fn(g, |x| 1.0 + (5.0 * x[0]).sin().abs());
        let gamma = 2.3;
        let v = solve_elliptic_spectral(&u, gamma);
        let ratio = integrate(&v) / (integrate(&u) / gamma);
        assert!((ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_positivity_small_undershoot() {
        let g = GridSpec::new(2, 2.0, 64).unwrap();
        let u = ScalarField::from_fn(g, |x| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            if r2 < 0.25 {
                1.0
            } else {
                0.0
            }
        });
        let v = solve_elliptic_spectral(&u, 1.0);
        assert!(v.min() >= -1e-12 * u.max_abs());
    }

    #[test]
    fn convolution_zero_input() {
        let g = GridSpec::new(2, 2.0, 16).unwrap();
        let table = BesselKernelTable::build(g, BesselParams::new(1.0, 2).unwrap()).unwrap();
        let u = ScalarField::zeros(g);
        let (v, warn) = solve_elliptic_convolution(&u, &table).unwrap();
        assert!(!warn);
        assert!(v.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn convolution_linfty_bound() {
        // ||v||_inf <= ||u||_inf / gamma since ||G||_L1 = 1/gamma
        let g = GridSpec::new(2, 3.0, 48).unwrap();
        let gamma = 1.3;
        let table = BesselKernelTable::build(g, BesselParams::new(gamma, 2).unwrap()).unwrap();
        let u = ScalarField::from_fn(g, |x| (-(x[0] * x[0] + x[1] * x[1]) * 2.0).exp());
        let (v, _) = solve_elliptic_convolution(&u, &table).unwrap();
        assert!(v.max_abs() <= u.max_abs() / gamma * (1.0 + 1e-9));
        // kernel positivity -> v >= 0 for u >= 0
        assert!(v.min() >= 0.0);
    }

    #[test]
    fn convolution_support_warning() {
        let g = GridSpec::new(2, 2.0, 16).unwrap();
        let table = BesselKernelTable::build(g, BesselParams::new(1.0, 2).unwrap()).unwrap();
        let u = ScalarField::from_fn(g, |x| if x[0] > 1.8 { 1.0 } else { 0.0 });
        let (_, warn) = solve_elliptic_convolution(&u, &table).unwrap();
        assert!(warn);
    }

    #[test]
    fn convolution_cross_validates_spectral() {
        // the acceptance preset at reduced resolution; tolerance scaled by
        // the second-order error growth (h at N=64 is 4x the N=256 preset)
        let g = GridSpec::new(2, 4.0, 64).unwrap();
        let gamma = 1.0;
        let u = ScalarField::from_fn(g, |x| {
            (-(x[0] * x[0] + x[1] * x[1]) / (2.0 * 1.25 * 1.25)).exp()
        });
        let table = BesselKernelTable::build(g, BesselParams::new(gamma, 2).unwrap()).unwrap();
        let (vc, _) = solve_elliptic_convolution(&u, &table).unwrap();
        let vs = solve_elliptic_spectral(&u, gamma);
        let mut diff = 0.0f64;
        for i in 0..g.cell_count() {
            diff = diff.max((vc.values[i] - vs.values[i]).abs());
        }
        assert!(diff / vs.max_abs() <= 16.0 * 1.0e-4, "rel diff {}", diff / vs.max_abs());
    }

    #[test]
    fn parabolic_constant_decay_exact() {
        let g = GridSpec::new(1, 1.0, 16).unwrap();
        let gamma = 2.0;
        let c = 3.0;
        let mut v = ScalarField::constant(g, c);
        let zero = ScalarField::zeros(g);
        let dt = 0.05;
        for _ in 0..40 {
            v = step_v_parabolic(&v, &zero, &zero, dt, gamma).unwrap();
        }
        let expect = c * (-gamma * 2.0f64).exp();
        for &x in &v.values {
            assert!((x - expect).abs() < 1e-10 * c, "{} vs {}", x, expect);
        }
    }

    #[test]
    fn parabolic_constant_source_matches_ode() {
        // v' = -gamma v + c from v0 = 0: v(t) = (c/gamma)(1 - e^{-gamma t})
        let g = GridSpec::new(1, 1.0, 16).unwrap();
        let gamma = 1.5;
        let c = 2.0;
        let src = ScalarField::constant(g, c);
        for &dt in &[0.02f64, 0.01] {
            let mut v = ScalarField::zeros(g);
            let steps = (1.0 / dt).round() as usize;
            for _ in 0..steps {
                v = step_v_parabolic(&v, &src, &src, dt, gamma).unwrap();
            }
            let expect = c / gamma * (1.0 - (-gamma * 1.0f64).exp());
            let err = (v.values[0] - expect).abs();
            assert!(err < 1.2 * dt * dt, "dt={dt}: err {err}");
        }
    }

    #[test]
    fn parabolic_reaches_elliptic_limit() {
        let g = GridSpec::new(1, 1.0, 32).unwrap();
        let gamma = 2.0;
        let u = ScalarField::from_fn(g, |x| 1.0 + (std::f64::consts::PI * x[0]).sin());
        let target = solve_elliptic_spectral(&u, gamma);
        let mut sp = SpectralGrid::new(g);
        let mut v = ScalarField::zeros(g);
        let dt = 2e-5;
        // transient decays like e^{-gamma t}; t = 11 kills it below 1e-9,
        // and the ETD bias (lambda dt)^2/12 stays under 5e-9
        let steps = (22.0 / gamma / dt).round() as usize;
        for _ in 0..steps {
            v = step_v_parabolic_with(&mut sp, &v, &u, &u, dt, gamma).unwrap();
        }
        let mut worst = 0.0f64;
        for i in 0..g.cell_count() {
            worst = worst.max((v.values[i] - target.values[i]).abs());
        }
        assert!(worst / target.max_abs() < 1e-8, "gap {worst}");
    }

    #[test]
    fn parabolic_unconditionally_stable() {
        // ||v'||_2 <= ||v||_2 + dt ||u||_2 for any dt
        let g = GridSpec::new(1, 1.0, 64).unwrap();
        let u = ScalarField::from_fn(g, |x| (20.0 * x[0]).sin());
        let v = ScalarField::from_fn(g, |x| (35.0 * x[0]).cos());
        for &dt in &[1e-4, 0.1, 10.0, 1e4] {
            let v2 = step_v_parabolic(&v, &u, &u, dt, 1.0).unwrap();
            let n2 = |f: &ScalarField| lp_norm(f, 2.0).unwrap();
            assert!(
                n2(&v2) <= n2(&v) + dt * n2(&u) + 1e-12,
                "dt={dt}"
            );
        }
    }

    #[test]
    fn parabolic_rejects_bad_dt() {
        let g = GridSpec::new(1, 1.0, 16).unwrap();
        let v = ScalarField::zeros(g);
        assert!(step_v_parabolic(&v, &v, &v, 0.0, 1.0).is_err());
        assert!(step_v_parabolic(&v, &v, &v, -0.1, 1.0).is_err());
    }

    #[test]
    fn semigroup_audit_zero_source() {
        let g = GridSpec::new(2, 1.0, 16).unwrap();
        let z = ScalarField::zeros(g);
        let v = ScalarField::constant(g, 1.0);
        let snaps = vec![(0.0, &z, &v), (1.0, &z, &v)];
        let rep = audit_semigroup_bounds(&snaps, f64::INFINITY, f64::INFINITY).unwrap();
        assert!(rep.c_emp.iter().all(|&c| c == 0.0));
        assert!(rep.flags.iter().any(|f| f == "zero_source_ratio_undefined"));
    }

    #[test]
    fn semigroup_audit_rejects_bad_exponents() {
        let g = GridSpec::new(2, 1.0, 16).unwrap();
        let z = ScalarField::zeros(g);
        let snaps = vec![(0.0, &z, &z)];
        // 1/1 - 1/inf = 1 >= 1/2
        assert!(audit_semigroup_bounds(&snaps, f64::INFINITY, 1.0).is_err());
        // p < p'
        assert!(audit_semigroup_bounds(&snaps, 1.0, 2.0).is_err());
    }

    #[test]
    fn chemo_config_dispatch() {
        let g = GridSpec::new(2, 2.0, 32).unwrap();
        let u = ScalarField::from_fn(g, |x| (-(x[0] * x[0] + x[1] * x[1])).exp());
        let mut cfg = ChemoConfig::new(1.0, 0).unwrap();
        let v_spec = cfg.solve_elliptic(&u, None).unwrap();
        cfg.method = ChemoMethod::Convolution;
        assert!(cfg.solve_elliptic(&u, None).is_err());
        let table = BesselKernelTable::build(g, BesselParams::new(1.0, 2).unwrap()).unwrap();
        let v_conv = cfg.solve_elliptic(&u, Some(&table)).unwrap();
        let mut diff = 0.0f64;
        for i in 0..g.cell_count() {
            diff = diff.max((v_spec.values[i] - v_conv.values[i]).abs());
        }
        assert!(diff / v_spec.max_abs() < 0.05);
    }

    #[test]
    fn semigroup_ratio_nonincreasing_under_dt_refinement() {
        // the empirical constant at fixed data decreases (within 5%) when
        // the step is halved: the scheme converges from above here
        let g = GridSpec::new(1, 1.0, 32).unwrap();
        let gamma = 1.0;
        let u = ScalarField::from_fn(g, |x| 1.0 + 0.5 * (std::f64::consts::PI * x[0]).sin());
        let final_ratio = |dt: f64| -> f64 {
            let steps = (0.5 / dt).round() as usize;
            let mut v = ScalarField::zeros(g);
            let mut owned: Vec<(f64, ScalarField, ScalarField)> =
                vec![(0.0, u.clone(), v.clone())];
            for i in 0..steps {
                v = step_v_parabolic(&v, &u, &u, dt, gamma).unwrap();
                owned.push(((i + 1) as f64 * dt, u.clone(), v.clone()));
            }
            let snaps: Vec<(f64, &ScalarField, &ScalarField)> =
                owned.iter().map(|(t, a, b)| (*t, a, b)).collect();
            let rep = audit_semigroup_bounds(&snaps, f64::INFINITY, f64::INFINITY).unwrap();
            *rep.c_emp.last().unwrap()
        };
        let coarse = final_ratio(0.05);
        let fine = final_ratio(0.025);
        assert!(
            fine <= coarse * 1.05,
            "ratio grew under refinement: {coarse} -> {fine}"
        );
    }

    #[test]
    fn semigroup_audit_bounded_ratio_constant_source() {
        // p = p' = inf, v0 = 0, constant u: ||v(t)||_inf <= ||u||_inf/gamma
        let g = GridSpec::new(1, 1.0, 32).unwrap();
        let gamma = 1.0;
        let u = ScalarField::constant(g, 2.0);
        let mut v = ScalarField::zeros(g);
        let dt = 0.01;
        let mut owned: Vec<(f64, ScalarField, ScalarField)> = vec![(0.0, u.clone(), v.clone())];
        for i in 0..100 {
            v = step_v_parabolic(&v, &u, &u, dt, gamma).unwrap();
            owned.push(((i + 1) as f64 * dt, u.clone(), v.clone()));
        }
        let snaps: Vec<(f64, &ScalarField, &ScalarField)> =
            owned.iter().map(|(t, u, v)| (*t, u, v)).collect();
        let rep = audit_semigroup_bounds(&snaps, f64::INFINITY, f64::INFINITY).unwrap();
        // a = 1, Gamma(1) = 1; the ratio is bounded by 1/gamma
        assert!((rep.gamma_a - 1.0).abs() < 1e-12);
        assert!(rep.c_emp.iter().all(|&c| c.is_finite() && c <= 1.0 / gamma + 1e-9));
        assert!(*rep.c_emp.last().unwrap() > 0.1);
    }
}
