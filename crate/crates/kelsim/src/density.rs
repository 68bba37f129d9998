//! Conservative finite-volume update for
//! u_t = div(grad(u^m) - chi u^{q-1} grad v)
//! with degenerate diffusion handled through differences of u^m (no
//! regularization), donor-cell upwinding of the chemotactic drift, and an
//! explicit CFL-controlled step.

use crate::error::{Error, Result};
use crate::grid::{Orientation, ScalarField, VectorField};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Porous-medium exponent, m > 1.
    pub m: f64,
    /// Chemotactic flux exponent, q >= 2.
    pub q: f64,
    /// Decay rate of the concentration equation, gamma > 0.
    pub gamma: f64,
    /// 0 = parabolic-elliptic, 1 = parabolic-parabolic.
    pub delta: u8,
    /// Coupling switch: 1 is the full system, 0 is pure porous-medium mode.
    pub chi: u8,
}

impl ModelParams {
    pub fn new(m: f64, q: f64, gamma: f64, delta: u8, chi: u8) -> Result<Self> {
        if !(m > 1.0) {
            return Err(Error::InvalidInput(format!("m = {m} must be > 1 (degenerate case)")));
        }
        if !(q >= 2.0) {
            return Err(Error::InvalidInput(format!("q = {q} must be >= 2")));
        }
        if !(gamma > 0.0) {
            return Err(Error::InvalidInput(format!("gamma = {gamma} must be > 0")));
        }
        if delta > 1 || chi > 1 {
            return Err(Error::InvalidInput("delta and chi must be 0 or 1".into()));
        }
        Ok(ModelParams { m, q, gamma, delta, chi })
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CflConfig {
    /// Safety factor in (0, 1].
    pub safety: f64,
}

impl Default for CflConfig {
    fn default() -> Self {
        CflConfig { safety: 0.4 }
    }
}

impl CflConfig {
    pub fn new(safety: f64) -> Result<Self> {
        if !(safety > 0.0 && safety <= 1.0) {
            return Err(Error::InvalidInput(format!("CFL safety {safety} not in (0, 1]")));
        }
        Ok(CflConfig { safety })
    }
}

/// x^e with fast paths for the exponents that dominate the presets.
#[inline]
pub fn fpow(x: f64, e: f64) -> f64 {
    if e == 1.0 {
        x
    } else if e == 2.0 {
        x * x
    } else if e == 0.0 {
        1.0
    } else {
        x.powf(e)
    }
}

fn check_nonnegative(u: &ScalarField) -> Result<()> {
    if u.values.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidInput("density field has negative entries".into()));
    }
    Ok(())
}

/// Face flux of the diffusion term: (u^m at +1 neighbor - u^m at cell) / h.
/// Vanishes identically where both cells are at u = 0.
pub fn diffusive_flux(u: &ScalarField, params: &ModelParams) -> Result<VectorField> {
    check_nonnegative(u)?;
    let grid = u.grid;
    let m_cells = grid.cell_count();
    let w: Vec<f64> = u.values.iter().map(|&v| fpow(v, params.m)).collect();
    let invh = 1.0 / grid.h();
    let mut out = VectorField::zeros(grid, Orientation::Face);
    for d in 0..grid.n {
        let comp = out.component_mut(d);
        for cell in 0..m_cells {
            comp[cell] = (w[grid.neighbor(cell, d, 1)] - w[cell]) * invh;
        }
    }
    Ok(out)
}

/// Face flux of the chemotactic drift: (donor u)^{q-1} times the
/// face-centered difference of v. The donor cell is selected by the sign of
/// the face gradient (mass drifts toward higher v); first-order upwind.
pub fn chemo_flux(u: &ScalarField, v: &ScalarField, params: &ModelParams) -> Result<VectorField> {
    check_nonnegative(u)?;
    crate::grid::same_grid(u, v)?;
    let grid = u.grid;
    let m_cells = grid.cell_count();
    let invh = 1.0 / grid.h();
    let qm1 = params.q - 1.0;
    let mut out = VectorField::zeros(grid, Orientation::Face);
    for d in 0..grid.n {
        let comp = out.component_mut(d);
        for cell in 0..m_cells {
            let up = grid.neighbor(cell, d, 1);
            let g = (v.values[up] - v.values[cell]) * invh;
            let donor = if g > 0.0 { u.values[cell] } else { u.values[up] };
            comp[cell] = fpow(donor, qm1) * g;
        }
    }
    Ok(out)
}

/// Stability bound
/// dt = safety * min( h^2 / (2 n m (max u)^{m-1} + eps),
///                    h / (max |grad v| (max u)^{q-2} + eps) )
/// with eps = machine epsilon so the degenerate state u = 0 yields a large
/// finite step. The drift bound applies only when chi = 1.
pub fn cfl_dt(
    u: &ScalarField,
    v: Option<&ScalarField>,
    params: &ModelParams,
    cfl: &CflConfig,
) -> f64 {
    cfl.safety * cfl_hard_bound(u, v, params)
}

fn cfl_hard_bound(u: &ScalarField, v: Option<&ScalarField>, params: &ModelParams) -> f64 {
    let grid = u.grid;
    let h = grid.h();
    let umax = u.max().max(0.0);
    let n = grid.n as f64;
    let diff = h * h / (2.0 * n * params.m * fpow(umax, params.m - 1.0) + f64::EPSILON);
    let mut bound = diff;
    if params.chi == 1 {
        if let Some(v) = v {
            let invh = 1.0 / h;
            let mut gmax = 0.0f64;
            for d in 0..grid.n {
                for cell in 0..grid.cell_count() {
                    let g = (v.values[grid.neighbor(cell, d, 1)] - v.values[cell]) * invh;
                    gmax = gmax.max(g.abs());
                }
            }
            let drift = h / (gmax * fpow(umax, params.q - 2.0) + f64::EPSILON);
            bound = bound.min(drift);
        }
    }
    bound
}

/// Explicit conservative update u' = u + dt div(diffusive - chi * chemo).
/// Rejects dt above the hard stability bound, negative inputs, and signals
/// blow-up when the update produces non-finite values. Mass telescopes to
/// round-off; positivity holds under the CFL bound.
pub fn step_u(
    u: &ScalarField,
    v: Option<&ScalarField>,
    dt: f64,
    params: &ModelParams,
) -> Result<ScalarField> {
    check_nonnegative(u)?;
    if !u.is_finite() {
        return Err(Error::NonFinite("density field".into()));
    }
    let hard = cfl_hard_bound(u, v, params);
    if dt > hard * (1.0 + 1e-9) {
        return Err(Error::CflViolation { dt, bound: hard });
    }
    let grid = u.grid;
    let m_cells = grid.cell_count();
    let h = grid.h();
    let invh = 1.0 / h;

    // assemble net face flux = diffusive - chi * chemo, then telescope
    let w: Vec<f64> = u.values.iter().map(|&x| fpow(x, params.m)).collect();
    let qm1 = params.q - 1.0;
    let mut out = ScalarField {
        grid,
        values: u.values.clone(),
        time: u.time + dt,
    };
    let mut flux = vec![0.0f64; m_cells];
    for d in 0..grid.n {
        for cell in 0..m_cells {
            let up = grid.neighbor(cell, d, 1);
            let mut f = (w[up] - w[cell]) * invh;
            if params.chi == 1 {
                if let Some(v) = v {
                    let g = (v.values[up] - v.values[cell]) * invh;
                    let donor = if g > 0.0 { u.values[cell] } else { u.values[up] };
                    f -= fpow(donor, qm1) * g;
                }
            }
            flux[cell] = f;
        }
        for cell in 0..m_cells {
            let prev = grid.neighbor(cell, d, -1);
            out.values[cell] += dt * (flux[cell] - flux[prev]) * invh;
        }
    }
    if !out.is_finite() {
        return Err(Error::NonFinite("density update blew up".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{divergence, integrate, GridSpec};
    use crate::oracles::BarenblattSpec;
    use crate::rng::XorShift64Star;

    fn params_pme() -> ModelParams {
        ModelParams::new(2.0, 2.0, 1.0, 0, 0).unwrap()
    }

    #[test]
    fn model_params_validation() {
        assert!(ModelParams::new(1.0, 2.0, 1.0, 0, 0).is_err());
        assert!(ModelParams::new(2.0, 1.5, 1.0, 0, 0).is_err());
        assert!(ModelParams::new(2.0, 2.0, 0.0, 0, 0).is_err());
        assert!(ModelParams::new(2.0, 2.0, 1.0, 2, 0).is_err());
        assert!(CflConfig::new(0.0).is_err());
        assert!(CflConfig::new(1.5).is_err());
    }

    #[test]
    fn diffusive_flux_constant_zero() {
        let g = GridSpec::new(2, 1.0, 16).unwrap();
        let u = ScalarField::constant(g, 2.0);
        let f = diffusive_flux(&u, &params_pme()).unwrap();
        assert!(f.components.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn diffusive_flux_rejects_negative() {
        let g = GridSpec::new(1, 1.0, 8).unwrap();
        let mut u = ScalarField::zeros(g);
        u.values[3] = -0.1;
        assert!(diffusive_flux(&u, &params_pme()).is_err());
    }

    #[test]
    fn diffusive_flux_zero_region_exact() {
        let g = GridSpec::new(1, 1.0, 32).unwrap();
        let u = ScalarField::from_fn(g, |x| if x[0] > 0.5 { 1.0 } else { 0.0 });
        let f = diffusive_flux(&u, &params_pme()).unwrap();
        // faces strictly inside the zero region carry exactly zero flux
        for i in 0..g.cell_count() {
            let x = g.coord(i);
            if x < 0.3 && g.coord(i + 1) < 0.3 {
                assert_eq!(f.component(0)[i], 0.0);
            }
        }
    }

    #[test]
    fn diffusive_flux_matches_barenblatt_gradient() {
        let b = BarenblattSpec::new(2.0, 1, 1.0, 0.5).unwrap();
        let g = GridSpec::new(1, 4.0, 512).unwrap();
        let t = 0.25;
        let u = ScalarField::from_fn(g, |x| b.eval(x[0].abs(), t));
        let f = diffusive_flux(&u, &params_pme()).unwrap();
        let h = g.h();
        let mut worst = 0.0f64;
        for i in 0..g.cell_count() {
            let xf = g.coord(i) + 0.5 * h; // face position
            if xf.abs() > 0.7 * b.support_radius(t) {
                continue; // skip the free boundary
            }
            // analytic d/dx U^2 at the face
            let eps = 1e-6;
            let exact = (b.eval((xf + eps).abs(), t).powi(2) - b.eval((xf - eps).abs(), t).powi(2))
                / (2.0 * eps);
            worst = worst.max((f.component(0)[i] - exact).abs());
        }
        assert!(worst < 2.0 * h * h, "flux error {worst}");
    }

    #[test]
    fn chemo_flux_trivial_cases() {
        let g = GridSpec::new(2, 1.0, 16).unwrap();
        let p = ModelParams::new(2.0, 2.0, 1.0, 0, 1).unwrap();
        let u = ScalarField::constant(g, 1.0);
        let v = ScalarField::constant(g, 0.7);
        let f = chemo_flux(&u, &v, &p).unwrap();
        assert!(f.components.iter().all(|&x| x == 0.0));
        let u0 = ScalarField::zeros(g);
        let v2 = ScalarField::from_fn(g, |x| x[0]);
        let f2 = chemo_flux(&u0, &v2, &p).unwrap();
        assert!(f2.components.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn chemo_flux_linear_v_hand_stencil() {
        // n=1, u = 1, v = x away from the wrap: flux = dv/dx = 1 and the
        // interior divergence vanishes
        let g = GridSpec::new(1, 1.0, 32).unwrap();
        let p = ModelParams::new(2.0, 2.0, 1.0, 0, 1).unwrap();
        let u = ScalarField::constant(g, 1.0);
        let v = ScalarField::from_fn(g, |x| x[0]);
        let f = chemo_flux(&u, &v, &p).unwrap();
        let div = divergence(&f).unwrap();
        for i in 4..28 {
            assert!((f.component(0)[i] - 1.0).abs() < 1e-12, "face {i}");
            assert!(div.values[i].abs() < 1e-10, "cell {i}");
        }
    }

    #[test]
    fn cfl_formula_arithmetic() {
        // m=2, max u=1, chi=0, n=1, h=0.1, safety 0.4 -> dt = 0.4*0.01/4 = 1e-3
        let g = GridSpec::new(1, 0.5, 10).unwrap();
        assert!((g.h() - 0.1).abs() < 1e-15);
        let u = ScalarField::constant(g, 1.0);
        let p = params_pme();
        let dt = cfl_dt(&u, None, &p, &CflConfig::default());
        assert!((dt - 1e-3).abs() < 1e-12, "dt {dt}");
    }

    #[test]
    fn cfl_degenerate_state_large_step() {
        let g = GridSpec::new(1, 1.0, 16).unwrap();
        let u = ScalarField::zeros(g);
        let dt = cfl_dt(&u, None, &params_pme(), &CflConfig::default());
        assert!(dt.is_finite());
        assert!(dt > 1.0, "degenerate state should allow a huge step, dt = {dt}");
    }

    #[test]
    fn cfl_scaling_with_umax() {
        let g = GridSpec::new(1, 1.0, 16).unwrap();
        let p = params_pme();
        let u1 = ScalarField::constant(g, 1.0);
        let u2 = ScalarField::constant(g, 2.0);
        let d1 = cfl_dt(&u1, None, &p, &CflConfig::default());
        let d2 = cfl_dt(&u2, None, &p, &CflConfig::default());
        assert!((d1 / d2 - 2.0).abs() < 1e-9, "m=2 doubles the bound ratio");
    }

    #[test]
    fn step_constant_steady_state() {
        let g = GridSpec::new(2, 1.0, 16).unwrap();
        let u = ScalarField::constant(g, 1.3);
        let p = params_pme();
        let dt = cfl_dt(&u, None, &p, &CflConfig::default());
        let u2 = step_u(&u, None, dt, &p).unwrap();
        for i in 0..g.cell_count() {
            assert!((u2.values[i] - 1.3).abs() < 1e-14);
        }
    }

    #[test]
    fn step_rejects_cfl_violation() {
        let g = GridSpec::new(1, 1.0, 16).unwrap();
        let u = ScalarField::constant(g, 1.0);
        let p = params_pme();
        let hard = cfl_dt(&u, None, &p, &CflConfig::new(1.0).unwrap());
        assert!(matches!(
            step_u(&u, None, hard * 1.1, &p),
            Err(Error::CflViolation { .. })
        ));
    }

    #[test]
    fn step_conserves_mass_and_positivity() {
        let g = GridSpec::new(1, 2.0, 64).unwrap();
        let p = params_pme();
        let mut rng = XorShift64Star::new(11);
        let mut u = ScalarField::from_fn(g, |x| {
            if x[0].abs() < 1.0 {
                (1.0 - x[0] * x[0]).max(0.0)
            } else {
                0.0
            }
        });
        // add deterministic jitter
        for v in u.values.iter_mut() {
            *v *= 1.0 + 0.3 * rng.next_f64();
        }
        let mass0 = integrate(&u);
        for _ in 0..200 {
            let dt = cfl_dt(&u, None, &p, &CflConfig::default());
            u = step_u(&u, None, dt, &p).unwrap();
            assert!(u.min() >= 0.0, "positivity violated: {}", u.min());
        }
        let drift = (integrate(&u) - mass0).abs() / mass0;
        assert!(drift <= 1e-12, "mass drift {drift}");
    }

    #[test]
    fn decoupled_comparison_principle() {
        // u0 <= w0 pointwise implies u(t) <= w(t) under a shared dt schedule
        let g = GridSpec::new(1, 2.0, 64).unwrap();
        let p = params_pme();
        let mut u = ScalarField::from_fn(g, |x| (1.0 - x[0] * x[0]).max(0.0));
        let mut wfield = u.map(|v| v * 1.1);
        for _ in 0..150 {
            let dt = cfl_dt(&u, None, &p, &CflConfig::default())
                .min(cfl_dt(&wfield, None, &p, &CflConfig::default()));
            u = step_u(&u, None, dt, &p).unwrap();
            wfield = step_u(&wfield, None, dt, &p).unwrap();
            for i in 0..g.cell_count() {
                assert!(
                    u.values[i] <= wfield.values[i] + 1e-12,
                    "comparison violated at {i}"
                );
            }
        }
    }

    #[test]
    fn decoupled_l1_contraction() {
        let g = GridSpec::new(1, 2.0, 64).unwrap();
        let p = params_pme();
        let mut u = ScalarField::from_fn(g, |x| (1.0 - x[0] * x[0]).max(0.0));
        let mut w = ScalarField::from_fn(g, |x| {
            (0.8 - (x[0] - 0.3) * (x[0] - 0.3) * 2.0).max(0.0)
        });
        let l1 = |a: &ScalarField, b: &ScalarField| -> f64 {
            a.grid.cell_volume()
                * a.values
                    .iter()
                    .zip(&b.values)
                    .map(|(x, y)| (x - y).abs())
                    .sum::<f64>()
        };
        let d0 = l1(&u, &w);
        let mass0 = integrate(&u);
        let mut prev = d0;
        for _ in 0..200 {
            let dt = cfl_dt(&u, None, &p, &CflConfig::default())
                .min(cfl_dt(&w, None, &p, &CflConfig::default()));
            u = step_u(&u, None, dt, &p).unwrap();
            w = step_u(&w, None, dt, &p).unwrap();
            let d = l1(&u, &w);
            assert!(d <= prev + 1e-10 * mass0, "contraction violated: {d} > {prev}");
            prev = d;
        }
        assert!(prev <= d0 + 1e-10 * mass0);
    }

    #[test]
    fn finite_propagation_barenblatt_rate() {
        // support radius grows no faster than the Barenblatt rate within 1.5x
        let b = BarenblattSpec::new(2.0, 1, 1.0, 0.1).unwrap();
        let g = GridSpec::new(1, 4.0, 256).unwrap();
        let p = params_pme();
        let mut u = ScalarField::from_fn(g, |x| b.eval(x[0].abs(), 0.0));
        let mut t = 0.0;
        let support = |f: &ScalarField| -> f64 {
            let mut r = 0.0f64;
            for i in 0..f.grid.cell_count() {
                if f.values[i] > 0.0 {
                    r = r.max(f.grid.coord(i).abs());
                }
            }
            r
        };
        while t < 1.0 {
            let dt = cfl_dt(&u, None, &p, &CflConfig::default()).min(1.0 - t);
            u = step_u(&u, None, dt, &p).unwrap();
            t += dt;
            let rate = support(&u) / b.support_radius(t);
            assert!(rate <= 1.5, "support grew too fast: {rate} at t={t}");
        }
    }

    #[test]
    fn blow_up_signalled_as_nonfinite() {
        // force an unstable state by bypassing CFL via direct flux math is
        // not possible through the API; instead check that huge fields stay
        // finite for admissible dt and the error path triggers on NaN input
        let g = GridSpec::new(1, 1.0, 16).unwrap();
        let mut u = ScalarField::constant(g, 1.0);
        u.values[3] = f64::NAN;
        assert!(matches!(
            step_u(&u, None, 1e-9, &params_pme()),
            Err(Error::InvalidInput(_)) | Err(Error::NonFinite(_))
        ));
    }
}
