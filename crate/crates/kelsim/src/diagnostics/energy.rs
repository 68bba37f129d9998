//! Term-by-term evaluation of the local energy estimate on a trajectory:
//! weighted time-slice integrals of int_0^{(u^m-k)_pm} (k +- xi)^{1/m-1} xi dxi,
//! the gradient energy of eta (u^m - k)_pm, and the right-hand side terms
//! including the chemotaxis integral u^{2(q-1)} eta^2 |grad v|^2. Emits the
//! empirical constant LHS / sum(RHS); asserts nothing.

use super::{ball_cells, LevelSign};
use crate::density::fpow;
use crate::error::{Error, Result};
use crate::grid::{gradient, ScalarField};
use crate::kernels::{psi_l, CutoffSpec};
use crate::quad::{adaptive_gauss, trapezoid};
use crate::system::Trajectory;
use serde::Serialize;

/// Cutoff eta(x, t) = psi(2 |x - center| / radius) * ramp(t): supported in
/// B_radius, equal to 1 on the half-radius ball, with a linear time ramp
/// over the leading `ramp_fraction` of (t1, t2). ramp_fraction = 0 means
/// eta is constant in time.
#[derive(Debug, Clone, Copy)]
pub struct EnergyCutoff {
    pub center: [f64; 3],
    pub radius: f64,
    pub ramp_fraction: f64,
}

impl EnergyCutoff {
    fn spatial(&self, grid_n: usize, x: &[f64]) -> (f64, [f64; 3]) {
        let spec = CutoffSpec {
            scale: self.radius / 2.0,
            center: self.center,
        };
        let (v, g, _) = psi_l(&x[..grid_n], &spec);
        (v, g)
    }

    fn ramp(&self, t: f64, t1: f64, t2: f64) -> (f64, f64) {
        if self.ramp_fraction <= 0.0 {
            return (1.0, 0.0);
        }
        let width = self.ramp_fraction * (t2 - t1);
        if t <= t1 {
            (0.0, 0.0)
        } else if t < t1 + width {
            ((t - t1) / width, 1.0 / width)
        } else {
            (1.0, 0.0)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    /// eta^2-weighted slice integral of the xi-integral at t2.
    pub lhs_slice: f64,
    /// Space-time integral of |grad(eta (u^m - k)_pm)|^2.
    pub lhs_gradient: f64,
    /// (u^m - k)_pm^2 |grad eta|^2 term.
    pub rhs_grad_eta: f64,
    /// xi-integral weighted by |eta eta_t|.
    pub rhs_eta_time: f64,
    /// eta^2-weighted slice integral at t1.
    pub rhs_initial_slice: f64,
    /// Chemotaxis term over the level set: u^{2(q-1)} eta^2 |grad v|^2.
    pub rhs_chemotaxis: f64,
    /// LHS / sum(RHS); None when the right-hand side vanishes.
    pub c_emp: Option<f64>,
    /// All terms zero: nothing to audit at this level.
    pub empty: bool,
    /// Level-set form of the chemotaxis bound,
    /// (int |A_k(t)|^{r~/q~} dt)^{(2/r~)(1+kappa)}, from the exponents
    /// induced by (a1, a2); None when a1 <= 1 leaves them undefined.
    pub level_set_term: Option<f64>,
    pub q_tilde: Option<f64>,
    pub r_tilde: Option<f64>,
    pub kappa: Option<f64>,
    pub flags: Vec<String>,
}

/// Inner integral int_0^W (k +- xi)^{1/m - 1} xi dxi with W = (w - k)_pm.
/// For the minus sign the integrand is unbounded as xi -> k but integrable;
/// adaptive Gauss handles the endpoint.
fn xi_integral(w: f64, k: f64, m: f64, sign: LevelSign, tol: f64) -> f64 {
    let p = 1.0 / m - 1.0;
    let cap = match sign {
        LevelSign::Plus => (w - k).max(0.0),
        LevelSign::Minus => (k - w).max(0.0),
    };
    if cap == 0.0 {
        return 0.0;
    }
    match sign {
        LevelSign::Plus => adaptive_gauss(|xi| (k + xi).powf(p) * xi, 0.0, cap, tol),
        LevelSign::Minus => adaptive_gauss(|xi| (k - xi).powf(p) * xi, 0.0, cap, tol),
    }
}

pub struct EnergyAuditInput<'a> {
    pub traj: &'a Trajectory,
    pub cutoff: EnergyCutoff,
    pub t1: f64,
    pub t2: f64,
    pub level: f64,
    pub sign: LevelSign,
    /// Holder-pair inputs for the reported level-set exponents (default (n, 2)).
    pub a1: Option<f64>,
    pub a2: Option<f64>,
    /// Relative tolerance of the inner xi-quadrature.
    pub xi_tol: f64,
}

pub fn energy_audit(input: &EnergyAuditInput) -> Result<EnergyReport> {
    let traj = input.traj;
    let grid = traj.grid;
    let k = input.level;
    let m = traj.params.m;
    let q = traj.params.q;
    if matches!(input.sign, LevelSign::Minus) && !(k > 0.0) {
        return Err(Error::InvalidInput(
            "minus-sign energy audit needs k > 0".into(),
        ));
    }
    if !(input.t1 < input.t2) {
        return Err(Error::InvalidInput("energy audit needs t1 < t2".into()));
    }
    let tol_t = 1e-9 * (1.0 + traj.t_end().abs());
    let snaps: Vec<usize> = traj
        .snapshots
        .iter()
        .enumerate()
        .filter(|(_, s)| s.t >= input.t1 - tol_t && s.t <= input.t2 + tol_t)
        .map(|(i, _)| i)
        .collect();
    if snaps.len() < 8 {
        return Err(Error::InvalidInput(format!(
            "energy audit needs >= 8 snapshots in the window, found {}",
            snaps.len()
        )));
    }
    let first = &traj.snapshots[snaps[0]];
    let last = &traj.snapshots[*snaps.last().unwrap()];
    if (first.t - input.t1).abs() > tol_t || (last.t - input.t2).abs() > tol_t {
        return Err(Error::InvalidInput(
            "t1 and t2 must be snapshot-aligned".into(),
        ));
    }
    let cells = ball_cells(&grid, &input.cutoff.center, input.cutoff.radius)?;
    let hn = grid.cell_volume();

    // spatial cutoff values/gradients per ball cell (time-independent part)
    let mut eta_x = vec![0.0; cells.len()];
    let mut geta_x = vec![[0.0; 3]; cells.len()];
    for (j, &i) in cells.iter().enumerate() {
        let pos = grid.position(i);
        let (v, g) = input.cutoff.spatial(grid.n, &pos[..grid.n]);
        eta_x[j] = v;
        geta_x[j] = g;
    }

    let wfield = |idx: usize| -> ScalarField {
        traj.snapshots[idx].u.map(|x| fpow(x, m))
    };

    // slice terms at t2 and t1
    let slice_term = |idx: usize, ramp: f64| -> f64 {
        let w = wfield(idx);
        let mut acc = 0.0;
        for (j, &i) in cells.iter().enumerate() {
            let eta = eta_x[j] * ramp;
            if eta == 0.0 {
                continue;
            }
            acc += eta * eta * xi_integral(w.values[i], k, m, input.sign, input.xi_tol);
        }
        hn * acc
    };
    let (ramp_t2, _) = input.cutoff.ramp(input.t2, input.t1, input.t2);
    let (ramp_t1, _) = input.cutoff.ramp(input.t1, input.t1, input.t2);
    let lhs_slice = slice_term(*snaps.last().unwrap(), ramp_t2);
    let rhs_initial_slice = slice_term(snaps[0], ramp_t1);

    // space-time terms by trapezoid over the window snapshots
    let times: Vec<f64> = snaps.iter().map(|&i| traj.snapshots[i].t).collect();
    let mut grad_energy = Vec::with_capacity(snaps.len());
    let mut grad_eta_term = Vec::with_capacity(snaps.len());
    let mut eta_time_term = Vec::with_capacity(snaps.len());
    let mut chemo_term = Vec::with_capacity(snaps.len());
    let mut level_meas = Vec::with_capacity(snaps.len());
    for &idx in &snaps {
        let snap = &traj.snapshots[idx];
        let w = wfield(idx);
        let (ramp, dramp) = input.cutoff.ramp(snap.t, input.t1, input.t2);
        // grad(eta p) by the product rule: p grad(eta) analytic, eta grad(p)
        // discrete. Time-constant states then reproduce the (u^m-k)^2
        // |grad eta|^2 term exactly.
        let pfield = w.map(|x| match input.sign {
            LevelSign::Plus => (x - k).max(0.0),
            LevelSign::Minus => (k - x).max(0.0),
        });
        let gp = gradient(&pfield);
        let mut acc_grad = 0.0;
        for (j, &i) in cells.iter().enumerate() {
            let p = pfield.values[i];
            let eta = eta_x[j] * ramp;
            for d in 0..grid.n {
                let g = p * geta_x[j][d] * ramp + eta * gp.component(d)[i];
                acc_grad += g * g;
            }
        }
        grad_energy.push(hn * acc_grad);

        let gv = gradient(&snap.v);
        let mut acc_ge = 0.0;
        let mut acc_et = 0.0;
        let mut acc_ch = 0.0;
        let mut count_level = 0usize;
        for (j, &i) in cells.iter().enumerate() {
            let pm = pfield.values[i];
            let eta = eta_x[j] * ramp;
            let mut geta2 = 0.0;
            for d in 0..grid.n {
                let g = geta_x[j][d] * ramp;
                geta2 += g * g;
            }
            acc_ge += pm * pm * geta2;
            if dramp != 0.0 {
                let eta_t = eta_x[j] * dramp;
                acc_et += xi_integral(w.values[i], k, m, input.sign, input.xi_tol)
                    * (eta * eta_t).abs();
            }
            if pm > 0.0 {
                count_level += 1;
                let mut gv2 = 0.0;
                for d in 0..grid.n {
                    let g = gv.component(d)[i];
                    gv2 += g * g;
                }
                acc_ch += fpow(snap.u.values[i], 2.0 * (q - 1.0)) * eta * eta * gv2;
            }
        }
        grad_eta_term.push(hn * acc_ge);
        eta_time_term.push(hn * acc_et);
        chemo_term.push(hn * acc_ch);
        level_meas.push(hn * count_level as f64);
    }
    let lhs_gradient = trapezoid(&times, &grad_energy);
    let rhs_grad_eta = trapezoid(&times, &grad_eta_term);
    let rhs_eta_time = trapezoid(&times, &eta_time_term);
    let rhs_chemotaxis = trapezoid(&times, &chemo_term);

    let mut flags = Vec::new();
    if grid.n == 1 {
        flags.push("extrapolation_regime_n1".into());
    }
    // induced level-set exponents from (a1, a2); defaults (n, 2)
    let a1 = input.a1.unwrap_or(grid.n as f64);
    let a2 = input.a2.unwrap_or(2.0);
    let n = grid.n as f64;
    let (q_tilde, r_tilde, kappa, level_set_term) = if a1 > 1.0 && a2 > 1.0 {
        let kappa1 = 1.0 - 1.0 / a2 - n / (2.0 * a1);
        if kappa1 == 0.0 {
            flags.push("kappa1_boundary_zero".into());
        } else if kappa1 < 0.0 {
            flags.push("kappa1_negative_outside_hypotheses".into());
        }
        let kappa = 2.0 / n * kappa1;
        let q_t = 2.0 * a1 * (1.0 + kappa) / (a1 - 1.0);
        let r_t = 2.0 * a2 * (1.0 + kappa) / (a2 - 1.0);
        let integrand: Vec<f64> = level_meas.iter().map(|&a| a.powf(r_t / q_t)).collect();
        let term = trapezoid(&times, &integrand).powf(2.0 / r_t * (1.0 + kappa));
        (Some(q_t), Some(r_t), Some(kappa), Some(term))
    } else {
        flags.push("exponents_undefined_a1_or_a2_le_1".into());
        (None, None, None, None)
    };

    let lhs = lhs_slice + lhs_gradient;
    let rhs = rhs_grad_eta + rhs_eta_time + rhs_initial_slice + rhs_chemotaxis;
    let empty = lhs == 0.0 && rhs == 0.0;
    if empty {
        flags.push("all_terms_zero".into());
    }
    let c_emp = if rhs > 0.0 { Some(lhs / rhs) } else { None };
    Ok(EnergyReport {
        lhs_slice,
        lhs_gradient,
        rhs_grad_eta,
        rhs_eta_time,
        rhs_initial_slice,
        rhs_chemotaxis,
        c_emp,
        empty,
        level_set_term,
        q_tilde,
        r_tilde,
        kappa,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::ModelParams;
    use crate::grid::{GridSpec, ScalarField};
    use crate::system::{Snapshot, TerminationStatus, Trajectory};

    fn uniform_traj(c: f64, nt: usize) -> Trajectory {
        let g = GridSpec::new(1, 2.0, 64).unwrap();
        let p = ModelParams::new(2.0, 2.0, 1.0, 0, 0).unwrap();
        let u = ScalarField::constant(g, c);
        let v = ScalarField::constant(g, c);
        Trajectory {
            grid: g,
            params: p,
            snapshots: (0..nt)
                .map(|i| Snapshot {
                    t: i as f64 * 0.1,
                    u: u.clone(),
                    v: v.clone(),
                })
                .collect(),
            status: TerminationStatus::Completed,
            mass_series: vec![],
            warnings: vec![],
            steps: 0,
        }
    }

    fn base_input(traj: &Trajectory) -> EnergyAuditInput<'_> {
        EnergyAuditInput {
            traj,
            cutoff: EnergyCutoff {
                center: [0.0; 3],
                radius: 1.0,
                ramp_fraction: 0.0,
            },
            t1: 0.0,
            t2: 0.9,
            level: 2.0,
            sign: LevelSign::Minus,
            a1: None,
            a2: None,
            xi_tol: 1e-10,
        }
    }

    #[test]
    fn uniform_constant_state_cemp_one() {
        // k > u^m, minus sign, constant trajectory, no time ramp: the field
        // gradient vanishes, so grad(eta p) = p grad(eta) and the two
        // gradient terms agree exactly; the slice terms match -> C_emp = 1
        let traj = uniform_traj(1.0, 10);
        let input = base_input(&traj);
        let rep = energy_audit(&input).unwrap();
        assert!(
            (rep.lhs_gradient - rep.rhs_grad_eta).abs() <= 1e-12 * rep.rhs_grad_eta.max(1.0),
            "gradient terms differ: {} vs {}",
            rep.lhs_gradient,
            rep.rhs_grad_eta
        );
        assert_eq!(rep.rhs_eta_time, 0.0);
        assert_eq!(rep.rhs_chemotaxis, 0.0);
        assert!(rep.lhs_slice > 0.0);
        let c = rep.c_emp.unwrap();
        assert!((c - 1.0).abs() < 1e-12, "C_emp = {c}");
    }

    #[test]
    fn plus_sign_above_max_is_empty() {
        let traj = uniform_traj(1.0, 10);
        let mut input = base_input(&traj);
        input.sign = LevelSign::Plus;
        input.level = 5.0; // above max u^m = 1
        let rep = energy_audit(&input).unwrap();
        assert!(rep.empty);
        assert!(rep.c_emp.is_none());
        assert!(rep.flags.iter().any(|f| f == "all_terms_zero"));
    }

    #[test]
    fn minus_sign_needs_positive_level() {
        let traj = uniform_traj(1.0, 10);
        let mut input = base_input(&traj);
        input.level = 0.0;
        assert!(energy_audit(&input).is_err());
    }

    #[test]
    fn needs_eight_snapshots() {
        let traj = uniform_traj(1.0, 5);
        let mut input = base_input(&traj);
        input.t2 = 0.4;
        assert!(energy_audit(&input).is_err());
    }

    #[test]
    fn xi_quadrature_tolerance_stable() {
        // halving the tolerance moves terms by less than the tolerance
        let traj = uniform_traj(1.0, 10);
        let mut input = base_input(&traj);
        input.xi_tol = 1e-8;
        let a = energy_audit(&input).unwrap();
        input.xi_tol = 5e-9;
        let b = energy_audit(&input).unwrap();
        let rel = (a.lhs_slice - b.lhs_slice).abs() / b.lhs_slice;
        assert!(rel < 1e-8, "xi quadrature unstable: {rel}");
    }

    #[test]
    fn xi_integral_closed_form_m2() {
        // m = 2: int_0^W (k - xi)^{-1/2} xi dxi has the closed form
        // 2k(sqrt k - sqrt(k-W)) - (2/3)(k^{3/2} - (k-W)^{3/2})
        let (k, w_val) = (2.0, 1.5f64);
        let got = xi_integral(k - w_val, k, 2.0, LevelSign::Minus, 1e-12);
        let kw = k - (k - w_val); // W = k - w
        let a: f64 = k - kw;
        let exact = 2.0 * k * (k.sqrt() - a.sqrt()) - 2.0 / 3.0 * (k.powf(1.5) - a.powf(1.5));
        assert!((got - exact).abs() < 1e-10, "{got} vs {exact}");
    }

    #[test]
    fn all_terms_nonnegative_on_dynamic_state() {
        let g = GridSpec::new(1, 2.0, 64).unwrap();
        let p = ModelParams::new(2.0, 2.0, 1.0, 0, 1).unwrap();
        let snapshots: Vec<Snapshot> = (0..12)
            .map(|i| {
                let t = i as f64 * 0.05;
                Snapshot {
                    t,
                    u: ScalarField::from_fn(g, move |x| {
                        (1.0 - x[0] * x[0]).max(0.0) * (1.0 + 0.1 * (t * 5.0).sin())
                    }),
                    v: ScalarField::from_fn(g, move |x| 0.5 * (x[0] + t).cos()),
                }
            })
            .collect();
        let traj = Trajectory {
            grid: g,
            params: p,
            snapshots,
            status: TerminationStatus::Completed,
            mass_series: vec![],
            warnings: vec![],
            steps: 0,
        };
        let input = EnergyAuditInput {
            traj: &traj,
            cutoff: EnergyCutoff {
                center: [0.0; 3],
                radius: 1.2,
                ramp_fraction: 0.25,
            },
            t1: 0.0,
            t2: 0.55,
            level: 0.3,
            sign: LevelSign::Plus,
            a1: Some(2.0),
            a2: None,
            xi_tol: 1e-10,
        };
        let rep = energy_audit(&input).unwrap();
        for (name, v) in [
            ("lhs_slice", rep.lhs_slice),
            ("lhs_gradient", rep.lhs_gradient),
            ("rhs_grad_eta", rep.rhs_grad_eta),
            ("rhs_eta_time", rep.rhs_eta_time),
            ("rhs_initial_slice", rep.rhs_initial_slice),
            ("rhs_chemotaxis", rep.rhs_chemotaxis),
        ] {
            assert!(v >= 0.0, "{name} negative: {v}");
        }
        // ramped cutoff kills the initial slice
        assert_eq!(rep.rhs_initial_slice, 0.0);
        assert!(rep.c_emp.unwrap().is_finite());
        // a1 = 2 at n = 1: kappa1 = 1 - 1/2 - 1/4 = 1/4, exponents defined
        assert!((rep.kappa.unwrap() - 0.5).abs() < 1e-12);
        assert!(rep.level_set_term.unwrap() >= 0.0);
    }
}
