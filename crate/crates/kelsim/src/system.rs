//! Coupled evolution of (u, v) in both regimes, snapshot management, the
//! blow-up and boundary-proximity guards, and the weak-form residual audit.

use crate::chemo::{solve_elliptic_spectral_with, step_v_parabolic_with};
use crate::density::{cfl_dt, step_u, CflConfig, ModelParams};
use crate::error::{Error, Result};
use crate::grid::{gradient, integrate, GridSpec, ScalarField};
use crate::quad::trapezoid;
use crate::rng::XorShift64Star;
use crate::spectral::SpectralGrid;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TerminationStatus {
    #[serde(rename = "completed")]
    Completed,
    #[serde(rename = "blowup")]
    Blowup,
    #[serde(rename = "boundary-contact")]
    BoundaryContact,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub u: ScalarField,
    pub v: ScalarField,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: GridSpec,
    pub params: ModelParams,
    pub snapshots: Vec<Snapshot>,
    pub status: TerminationStatus,
    /// (t, mass of u) at every recorded snapshot.
    pub mass_series: Vec<(f64, f64)>,
    pub warnings: Vec<String>,
    pub steps: u64,
}

impl Trajectory {
    pub fn t_start(&self) -> f64 {
        self.snapshots.first().map(|s| s.t).unwrap_or(0.0)
    }

    pub fn t_end(&self) -> f64 {
        self.snapshots.last().map(|s| s.t).unwrap_or(0.0)
    }

    /// Index of the snapshot nearest to t, if within tol.
    pub fn snapshot_at(&self, t: f64, tol: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, s) in self.snapshots.iter().enumerate() {
            let d = (s.t - t).abs();
            if best.map(|(_, bd)| d < bd).unwrap_or(true) {
                best = Some((i, d));
            }
        }
        best.filter(|&(_, d)| d <= tol).map(|(i, _)| i)
    }
}

#[derive(Debug, Clone)]
pub struct InitialData {
    pub u0: ScalarField,
    /// Required for delta = 1; ignored (with a warning) for delta = 0.
    pub v0: Option<ScalarField>,
}

impl InitialData {
    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        if !self.u0.is_finite() {
            return Err(Error::NonFinite("initial density".into()));
        }
        if self.u0.values.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidInput("initial density has negative values".into()));
        }
        if let Some(v0) = &self.v0 {
            if !v0.is_finite() {
                return Err(Error::NonFinite("initial concentration".into()));
            }
            crate::grid::same_grid(&self.u0, v0)?;
        }
        if params.delta == 1 && self.v0.is_none() {
            return Err(Error::InvalidInput(
                "parabolic-parabolic regime requires initial v".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelParams,
    pub cfl: CflConfig,
    pub t_end: f64,
    /// Requested snapshot times within [0, t_end]. The final state is always
    /// recorded. Step sizes are subdivided to land exactly on these times.
    pub snapshot_times: Vec<f64>,
    /// Snapshot storage budget in bytes (default 4 GiB).
    pub memory_budget: u64,
    pub max_steps: u64,
}

impl RunConfig {
    pub fn new(model: ModelParams, t_end: f64, snapshot_times: Vec<f64>) -> Self {
        RunConfig {
            model,
            cfl: CflConfig::default(),
            t_end,
            snapshot_times,
            memory_budget: 4 << 30,
            max_steps: 200_000_000,
        }
    }
}

/// Flags a blown-up state: any non-finite value, or sup-norm at least
/// 1e6 times the initial sup-norm (skipped for identically zero data).
pub fn detect_blowup(u: &ScalarField, initial_max: f64) -> bool {
    if !u.is_finite() {
        return true;
    }
    initial_max > 0.0 && u.max() >= 1e6 * initial_max
}

pub(crate) struct CoupledState {
    pub u: ScalarField,
    pub v: ScalarField,
    pub sp: SpectralGrid,
    pub params: ModelParams,
}

impl CoupledState {
    pub fn init(init: &InitialData, params: ModelParams) -> Result<(Self, Vec<String>)> {
        init.validate(&params)?;
        let mut warnings = Vec::new();
        let mut sp = SpectralGrid::new(init.u0.grid);
        let v = if params.delta == 0 {
            if init.v0.is_some() {
                warnings.push("initial v ignored: delta = 0 slaves v to u".into());
            }
            solve_elliptic_spectral_with(&mut sp, &init.u0, params.gamma)
        } else {
            init.v0.clone().unwrap()
        };
        Ok((
            CoupledState {
                u: init.u0.clone(),
                v,
                sp,
                params,
            },
            warnings,
        ))
    }

    /// One coupled step of size dt.
    ///
    /// delta = 0: advance u with the current v, then re-slave v.
    /// delta = 1: predictor u-step with frozen v, Duhamel v-step fed by
    /// (u_old, u_pred), corrector u-step with the averaged v.
    pub fn advance(&mut self, dt: f64) -> Result<()> {
        let params = self.params;
        let v_arg = |v: &ScalarField| -> Option<ScalarField> {
            if params.chi == 1 {
                Some(v.clone())
            } else {
                None
            }
        };
        if params.delta == 0 {
            let vref = v_arg(&self.v);
            self.u = step_u(&self.u, vref.as_ref(), dt, &params)?;
            self.v = solve_elliptic_spectral_with(&mut self.sp, &self.u, params.gamma);
            self.v.time = self.u.time;
        } else {
            let vref = v_arg(&self.v);
            let u_pred = step_u(&self.u, vref.as_ref(), dt, &params)?;
            let v_new =
                step_v_parabolic_with(&mut self.sp, &self.v, &self.u, &u_pred, dt, params.gamma)?;
            let mut v_avg = self.v.clone();
            for (a, b) in v_avg.values.iter_mut().zip(&v_new.values) {
                *a = 0.5 * (*a + b);
            }
            let vref_avg = v_arg(&v_avg);
            self.u = step_u(&self.u, vref_avg.as_ref(), dt, &params)?;
            self.v = v_new;
        }
        Ok(())
    }

    pub fn cfl(&self, cfl: &CflConfig) -> f64 {
        let v = if self.params.chi == 1 { Some(&self.v) } else { None };
        cfl_dt(&self.u, v, &self.params, cfl)
    }
}

/// Runs the coupled system to t_end, recording snapshots and enforcing the
/// blow-up and boundary-contact guards.
pub fn run(cfg: &RunConfig, init: &InitialData) -> Result<Trajectory> {
    if !(cfg.t_end > 0.0) {
        return Err(Error::InvalidInput(format!("t_end {} must be positive", cfg.t_end)));
    }
    let grid = init.u0.grid;

    // event times: requested snapshots (deduplicated, sorted) plus t_end
    let mut events: Vec<f64> = cfg.snapshot_times.clone();
    for &t in &events {
        if !(0.0..=cfg.t_end * (1.0 + 1e-12)).contains(&t) {
            return Err(Error::InvalidInput(format!(
                "snapshot time {t} outside [0, {}]",
                cfg.t_end
            )));
        }
    }
    events.push(cfg.t_end);
    events.sort_by(|a, b| a.partial_cmp(b).unwrap());
    events.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * cfg.t_end);

    let snapshot_count = events.len() + 1;
    let required = snapshot_count as u64 * 2 * grid.cell_count() as u64 * 8;
    if required > cfg.memory_budget {
        return Err(Error::MemoryBudget {
            required,
            budget: cfg.memory_budget,
        });
    }

    let (mut state, mut warnings) = CoupledState::init(init, cfg.model)?;
    if grid.n == 1 {
        warnings.push("n=1 run: extrapolation regime (outside the n >= 2 theory)".into());
    }
    let u0_max = state.u.max();

    // outer 10% shell cell indices (checked for support contact); the guard
    // only arms when the initial support stays clear of the shell, so
    // box-filling states (e.g. uniform data) run without tripping it.
    // Support means values above 1e-14 of the current sup norm: the
    // degenerate front carries a repeated-squaring tail of sub-physical
    // amplitudes one cell per step that would otherwise trip the guard.
    let shell: Vec<usize> = (0..grid.cell_count())
        .filter(|&i| {
            let x = grid.position(i);
            (0..grid.n).any(|d| x[d].abs() > 0.9 * grid.l)
        })
        .collect();
    let in_shell = |u: &ScalarField| {
        let floor = 1e-14 * u.max();
        floor > 0.0 && shell.iter().any(|&i| u.values[i] > floor)
    };
    let guard_armed = !in_shell(&state.u);
    if !guard_armed {
        warnings.push("boundary guard disabled: initial support already in the outer shell".into());
    }

    let mut traj = Trajectory {
        grid,
        params: cfg.model,
        snapshots: Vec::new(),
        status: TerminationStatus::Completed,
        mass_series: Vec::new(),
        warnings: Vec::new(),
        steps: 0,
    };
    let record = |traj: &mut Trajectory, t: f64, state: &CoupledState| {
        let mut u = state.u.clone();
        u.time = t;
        let mut v = state.v.clone();
        v.time = t;
        traj.mass_series.push((t, integrate(&u)));
        traj.snapshots.push(Snapshot { t, u, v });
    };

    let mut t = 0.0;
    if events.first().map(|&e| e <= 1e-12 * cfg.t_end).unwrap_or(false) {
        record(&mut traj, 0.0, &state);
        events.remove(0);
    }

    'events: for &ev in &events {
        while t < ev {
            if traj.steps >= cfg.max_steps {
                return Err(Error::InvalidInput(format!(
                    "exceeded max_steps = {} before reaching t_end",
                    cfg.max_steps
                )));
            }
            let dt = state.cfl(&cfg.cfl).min(ev - t);
            if !(dt > 0.0) {
                return Err(Error::InvalidInput("time step collapsed to zero".into()));
            }
            match state.advance(dt) {
                Ok(()) => {}
                Err(Error::NonFinite(_)) => {
                    traj.status = TerminationStatus::Blowup;
                    break 'events;
                }
                Err(e) => return Err(e),
            }
            t += dt;
            traj.steps += 1;
            if detect_blowup(&state.u, u0_max) {
                traj.status = TerminationStatus::Blowup;
                break 'events;
            }
            if guard_armed && in_shell(&state.u) {
                traj.status = TerminationStatus::BoundaryContact;
                break 'events;
            }
        }
        // landed on the event (within round-off accumulation)
        t = ev;
        record(&mut traj, ev, &state);
    }
    traj.warnings = warnings;
    Ok(traj)
}

/// C-infinity bump profile b(s) = exp(1 - 1/(1 - s^2)) on |s| < 1, else 0.
/// Normalized to 1 at the center.
fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

fn bump_prime(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        let d = 1.0 - s * s;
        bump(s) * (-2.0 * s / (d * d))
    }
}

/// Tensor-product space-time test function for the weak-form audit.
#[derive(Debug, Clone)]
pub struct SpaceTimeBump {
    pub center: [f64; 3],
    pub sigma: [f64; 3],
    pub t_center: f64,
    pub t_sigma: f64,
}

impl SpaceTimeBump {
    pub fn time_factor(&self, t: f64) -> f64 {
        bump((t - self.t_center) / self.t_sigma)
    }

    fn check_inside(&self, grid: &GridSpec) -> Result<()> {
        for d in 0..grid.n {
            if self.center[d].abs() + self.sigma[d] >= grid.l {
                return Err(Error::RegionOutOfRange(
                    "test function support touches the box boundary".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TestFunctionBank {
    pub functions: Vec<SpaceTimeBump>,
}

impl TestFunctionBank {
    /// Seeded bank of `count` tensor-product bumps with admissible supports:
    /// centers in [-0.45L, 0.45L]^n, spatial widths in [0.15L, 0.25L],
    /// time support strictly inside (t_lo, t_hi).
    pub fn seeded(grid: &GridSpec, t_lo: f64, t_hi: f64, count: usize, seed: u64) -> Self {
        let mut rng = XorShift64Star::new(seed);
        let span = t_hi - t_lo;
        let mut functions = Vec::with_capacity(count);
        for _ in 0..count {
            let mut center = [0.0; 3];
            let mut sigma = [0.0; 3];
            for d in 0..grid.n {
                center[d] = rng.uniform(-0.45 * grid.l, 0.45 * grid.l);
                sigma[d] = rng.uniform(0.15 * grid.l, 0.25 * grid.l);
            }
            let t_center = t_lo + rng.uniform(0.3, 0.7) * span;
            let t_sigma = rng.uniform(0.12, 0.2) * span;
            functions.push(SpaceTimeBump {
                center,
                sigma,
                t_center,
                t_sigma,
            });
        }
        TestFunctionBank { functions }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WeakFormReport {
    /// Normalized residual of the density identity, per test function.
    pub residual_u: Vec<f64>,
    /// Normalized residual of the concentration identity, per test function.
    pub residual_v: Vec<f64>,
    pub max_residual_u: f64,
    pub max_residual_v: f64,
    pub flags: Vec<String>,
}

/// Evaluates both distributional identities on a trajectory against a bank
/// of smooth space-time-compact test functions.
///
/// Quadrature: trapezoid across snapshot times, h^n cell sums in space.
/// phi_t is taken as the centered difference quotient on the snapshot grid,
/// so the time term telescopes exactly for time-constant states. Residuals
/// are normalized by the integral of the absolute values of the individual
/// terms.
pub fn weak_form_residual(traj: &Trajectory, bank: &TestFunctionBank) -> Result<WeakFormReport> {
    if traj.snapshots.len() < 3 {
        return Err(Error::InvalidInput(
            "weak-form audit needs at least 3 snapshots".into(),
        ));
    }
    let grid = traj.grid;
    for f in &bank.functions {
        f.check_inside(&grid)?;
    }
    let params = &traj.params;
    let nsnap = traj.snapshots.len();
    let hn = grid.cell_volume();
    let m_cells = grid.cell_count();

    // per-snapshot discrete gradients of u^m and v
    let times: Vec<f64> = traj.snapshots.iter().map(|s| s.t).collect();
    let w_fields: Vec<ScalarField> = traj
        .snapshots
        .iter()
        .map(|s| s.u.map(|x| crate::density::fpow(x, params.m)))
        .collect();
    let grad_w: Vec<_> = w_fields.iter().map(gradient).collect();
    let grad_v: Vec<_> = traj.snapshots.iter().map(|s| gradient(&s.v)).collect();

    let mut residual_u = Vec::new();
    let mut residual_v = Vec::new();
    let mut flags = Vec::new();
    if grid.n == 1 {
        flags.push("extrapolation_regime_n1".into());
    }

    for f in &bank.functions {
        // per-axis spatial profiles (snapshot independent)
        let mut profile = vec![vec![0.0; grid.cells]; grid.n];
        let mut dprofile = vec![vec![0.0; grid.cells]; grid.n];
        for d in 0..grid.n {
            for i in 0..grid.cells {
                let s = (grid.coord(i) - f.center[d]) / f.sigma[d];
                profile[d][i] = bump(s);
                dprofile[d][i] = bump_prime(s) / f.sigma[d];
            }
        }
        let bt: Vec<f64> = times.iter().map(|&t| f.time_factor(t)).collect();
        // centered difference quotients of the time factor on the snapshot grid
        let mut btp = vec![0.0; nsnap];
        for k in 0..nsnap {
            let (k0, k1) = if k == 0 {
                (0, 1)
            } else if k == nsnap - 1 {
                (nsnap - 2, nsnap - 1)
            } else {
                (k - 1, k + 1)
            };
            btp[k] = (bt[k1] - bt[k0]) / (times[k1] - times[k0]);
        }

        let mut i1 = vec![0.0; nsnap];
        let mut d1 = vec![0.0; nsnap];
        let mut i2 = vec![0.0; nsnap];
        let mut d2 = vec![0.0; nsnap];
        for k in 0..nsnap {
            let snap = &traj.snapshots[k];
            let mut acc1 = 0.0;
            let mut accd1 = 0.0;
            let mut acc2 = 0.0;
            let mut accd2 = 0.0;
            for cell in 0..m_cells {
                let idx = grid.unravel(cell);
                let mut phi_x = 1.0;
                for d in 0..grid.n {
                    phi_x *= profile[d][idx[d]];
                }
                let phi = phi_x * bt[k];
                let phi_t = phi_x * btp[k];
                if phi_x == 0.0 {
                    continue;
                }
                // grad phi
                let mut gphi = [0.0; 3];
                for d in 0..grid.n {
                    let mut g = dprofile[d][idx[d]];
                    for e in 0..grid.n {
                        if e != d {
                            g *= profile[e][idx[e]];
                        }
                    }
                    gphi[d] = g * bt[k];
                }
                let u = snap.u.values[cell];
                let v = snap.v.values[cell];
                let mut gw_dot = 0.0;
                let mut gv_dot = 0.0;
                for d in 0..grid.n {
                    gw_dot += grad_w[k].component(d)[cell] * gphi[d];
                    gv_dot += grad_v[k].component(d)[cell] * gphi[d];
                }
                let drift = if params.chi == 1 {
                    crate::density::fpow(u, params.q - 1.0) * gv_dot
                } else {
                    0.0
                };
                acc1 += gw_dot - drift - u * phi_t;
                accd1 += gw_dot.abs() + drift.abs() + (u * phi_t).abs();
                let dvdt = if params.delta == 1 { v * phi_t } else { 0.0 };
                acc2 += gv_dot + params.gamma * v * phi - u * phi - dvdt;
                accd2 += gv_dot.abs()
                    + (params.gamma * v * phi).abs()
                    + (u * phi).abs()
                    + dvdt.abs();
            }
            i1[k] = hn * acc1;
            d1[k] = hn * accd1;
            i2[k] = hn * acc2;
            d2[k] = hn * accd2;
        }
        let lhs1 = trapezoid(&times, &i1).abs();
        let den1 = trapezoid(&times, &d1);
        let lhs2 = trapezoid(&times, &i2).abs();
        let den2 = trapezoid(&times, &d2);
        residual_u.push(if den1 > 0.0 { lhs1 / den1 } else { 0.0 });
        residual_v.push(if den2 > 0.0 { lhs2 / den2 } else { 0.0 });
        if den1 == 0.0 && den2 == 0.0 {
            flags.push("zero_normalization_trivial_state".into());
        }
    }
    let max_u = residual_u.iter().cloned().fold(0.0, f64::max);
    let max_v = residual_v.iter().cloned().fold(0.0, f64::max);
    Ok(WeakFormReport {
        residual_u,
        residual_v,
        max_residual_u: max_u,
        max_residual_v: max_v,
        flags,
    })
}
