//! The validation suite behind `kelsim validate`: oracle-backed checks of
//! every numerical path at fixed presets and tolerances. Each criterion
//! reports pass/fail with its measured numbers; the suite report is fully
//! deterministic (no timings, no environment state), so repeated runs are
//! byte-identical.

use crate::chemo::{solve_elliptic_spectral, solve_elliptic_convolution, BesselKernelTable};
use crate::density::{CflConfig, ModelParams};
use crate::diagnostics::contraction::{l1_contraction_experiment, ContractionInput};
use crate::diagnostics::energy::{energy_audit, EnergyAuditInput, EnergyCutoff};
use crate::diagnostics::holder::estimate_holder_exponent;
use crate::diagnostics::{make_intrinsic_cylinder, LevelSign};
use crate::grid::{laplacian, GridSpec, ScalarField};
use crate::kernels::{
    bessel_kernel, psi_l, BesselParams, CutoffSpec, PSI_GRAD_BOUND_C1,
    psi_laplacian_bound_c2,
};
use crate::oracles::{bessel_closed_form_3d, BarenblattSpec};
use crate::system::{run, InitialData, RunConfig, TestFunctionBank,
    weak_form_residual, Trajectory};
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub details: BTreeMap<String, serde_json::Value>,
}

impl CriterionOutcome {
    fn new(id: u32, name: &str) -> Self {
        CriterionOutcome {
            id,
            name: name.into(),
            passed: false,
            details: BTreeMap::new(),
        }
    }

    fn detail(&mut self, key: &str, value: impl Serialize) {
        self.details
            .insert(key.into(), serde_json::to_value(value).unwrap());
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub version: u32,
    pub criteria: Vec<CriterionOutcome>,
    pub all_passed: bool,
}

impl SuiteReport {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("suite report serialization")
    }
}

/// Relative mass drift over a trajectory.
fn mass_drift(traj: &Trajectory) -> f64 {
    let m0 = traj.mass_series.first().map(|&(_, m)| m).unwrap_or(0.0);
    let mut worst = 0.0f64;
    for &(_, m) in &traj.mass_series {
        let d = if m0.abs() > 0.0 {
            ((m - m0) / m0).abs()
        } else {
            m.abs()
        };
        worst = worst.max(d);
    }
    worst
}

struct SuiteContext {
    /// (trajectory label, relative mass drift) from every run in the suite.
    drifts: Vec<(String, f64)>,
}

fn l1_error_vs_barenblatt(traj: &Trajectory, b: &BarenblattSpec, t: f64) -> f64 {
    let snap = &traj.snapshots[traj.snapshot_at(t, 1e-9).expect("snapshot at t")];
    let g = traj.grid;
    let mut acc = 0.0;
    for i in 0..g.cell_count() {
        let x = g.position(i);
        let r = x[..g.n].iter().map(|v| v * v).sum::<f64>().sqrt();
        acc += (snap.u.values[i] - b.eval(r, t)).abs();
    }
    acc * g.cell_volume()
}

fn barenblatt_run(n_cells: usize, t_end: f64, snapshots: Vec<f64>) -> (Trajectory, BarenblattSpec) {
    let b = BarenblattSpec::new(2.0, 1, 1.0, 0.1).unwrap();
    let grid = GridSpec::new(1, 4.0, n_cells).unwrap();
    let u0 = ScalarField::from_fn(grid, |x| b.eval(x[0].abs(), 0.0));
    let params = ModelParams::new(2.0, 2.0, 1.0, 0, 0).unwrap();
    let cfg = RunConfig::new(params, t_end, snapshots);
    let traj = run(&cfg, &InitialData { u0, v0: None }).expect("barenblatt run");
    (traj, b)
}

/// Criterion 1: Barenblatt convergence (chi = 0, m = 2, n = 1, mass 1,
/// t0 = 0.1, t = 1): L1 error <= 0.02 at N = 512 and empirical order >= 0.8
/// across N in {128, 256, 512}.
fn criterion_barenblatt(ctx: &mut SuiteContext) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(1, "barenblatt_convergence");
    let mut errors = Vec::new();
    for &n in &[128usize, 256, 512] {
        let (traj, b) = barenblatt_run(n, 1.0, vec![1.0]);
        ctx.drifts.push((format!("barenblatt_n{n}"), mass_drift(&traj)));
        errors.push(l1_error_vs_barenblatt(&traj, &b, 1.0));
    }
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let min_order = orders.iter().cloned().fold(f64::INFINITY, f64::min);
    out.detail("l1_errors", &errors);
    out.detail("orders", &orders);
    out.passed = errors[2] <= 0.02 && min_order >= 0.8;
    out
}

/// Criterion 3: spectral vs Bessel-convolution cross-validation on a smooth
/// bump (n = 2, gamma = 1, N = 256) to 1e-4 relative L-infinity, with the
/// spectral residual at 1e-10.
fn criterion_elliptic_cross(_ctx: &mut SuiteContext) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(3, "elliptic_cross_validation");
    let grid = GridSpec::new(2, 4.0, 256).unwrap();
    let gamma = 1.0;
    let sigma = 1.25f64;
    let u = ScalarField::from_fn(grid, |x| {
        (-(x[0] * x[0] + x[1] * x[1]) / (2.0 * sigma * sigma)).exp()
    });
    let vs = solve_elliptic_spectral(&u, gamma);
    let table = BesselKernelTable::build(grid, BesselParams::new(gamma, 2).unwrap()).unwrap();
    let (vc, warn) = solve_elliptic_convolution(&u, &table).unwrap();
    let mut diff = 0.0f64;
    for i in 0..grid.cell_count() {
        diff = diff.max((vs.values[i] - vc.values[i]).abs());
    }
    let rel = diff / vs.max_abs();
    let lap = laplacian(&vs);
    let mut res = 0.0f64;
    for i in 0..grid.cell_count() {
        res = res.max((-lap.values[i] + gamma * vs.values[i] - u.values[i]).abs());
    }
    let res_rel = res / u.max_abs();
    out.detail("rel_linf_disagreement", rel);
    out.detail("spectral_residual_rel", res_rel);
    out.detail("support_warning", warn);
    out.passed = rel <= 1e-4 && res_rel <= 1e-10;
    out
}

/// Criterion 4: quadrature Bessel kernel against the closed form in 3-D to
/// 1e-8 relative over |x| sqrt(gamma) in [0.01, 20]; 2-D lattice sum of G
/// equals 1/gamma to 1e-4.
fn criterion_bessel(_ctx: &mut SuiteContext) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(4, "bessel_closed_form_and_mass");
    let p3 = BesselParams::new(1.0, 3).unwrap();
    let mut worst = 0.0f64;
    for i in 0..200 {
        let z = 0.01 * (20.0f64 / 0.01).powf(i as f64 / 199.0);
        let got = bessel_kernel(z, &p3).unwrap();
        let exact = bessel_closed_form_3d(z, 1.0).unwrap();
        worst = worst.max((got - exact).abs() / exact);
    }
    out.detail("closed_form_rel_err", worst);

    // lattice sum for n = 2, gamma = 2 over a box of radius 30/sqrt(gamma):
    // singular cell replaced by its 32^2 sub-quadrature average
    let gamma = 2.0f64;
    let p2 = BesselParams::new(gamma, 2).unwrap();
    let h = 0.025f64;
    let radius = 30.0 / gamma.sqrt();
    let m = (radius / h).ceil() as i64;
    let mut cache: std::collections::HashMap<i64, f64> = std::collections::HashMap::new();
    let mut total = 0.0;
    for i in 0..=m {
        for j in 0..=m {
            let mult = (if i > 0 { 2.0 } else { 1.0 }) * (if j > 0 { 2.0 } else { 1.0 });
            if i == 0 && j == 0 {
                // cell average over the singular cell
                let sub = 32;
                let sh = h / sub as f64;
                let mut acc = 0.0;
                for a in 0..sub {
                    for b in 0..sub {
                        let x = -h / 2.0 + (a as f64 + 0.5) * sh;
                        let y = -h / 2.0 + (b as f64 + 0.5) * sh;
                        acc += bessel_kernel((x * x + y * y).sqrt(), &p2).unwrap();
                    }
                }
                total += acc / (sub * sub) as f64;
                continue;
            }
            let key = i * i + j * j;
            let r = h * (key as f64).sqrt();
            if r > radius {
                continue;
            }
            let val = *cache
                .entry(key)
                .or_insert_with(|| bessel_kernel(r, &p2).unwrap());
            total += mult * val;
        }
    }
    let lattice = total * h * h;
    let target = 1.0 / gamma;
    let rel = (lattice - target).abs() / target;
    out.detail("lattice_integral", lattice);
    out.detail("lattice_rel_err", rel);
    out.passed = worst <= 1e-8 && rel <= 1e-4;
    out
}

/// Criterion 5: the weight-function bounds |grad psi_l| <= (2 sqrt 2 / l)
/// sqrt(psi_l) and |lap psi_l| <= (4 + 4(n-1))/l^2 on 1e4 radial samples for
/// l in {1, 2, 4}, n in {1, 2, 3}; zero violations.
fn criterion_psi_bounds(_ctx: &mut SuiteContext) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(5, "psi_weight_bounds");
    let mut violations = 0u64;
    let mut max_grad_ratio = 0.0f64;
    let mut max_lap_ratio = 0.0f64;
    for n in 1..=3usize {
        for &l in &[1.0f64, 2.0, 4.0] {
            let spec = CutoffSpec::origin(l).unwrap();
            let c2 = psi_laplacian_bound_c2(n);
            for i in 0..10_000 {
                let r = 2.5 * l * (i as f64 + 0.5) / 10_000.0;
                let mut x = [0.0f64; 3];
                x[0] = r / (n as f64).sqrt();
                for d in 1..n {
                    x[d] = x[0];
                }
                let (v, g, lap) = psi_l(&x[..n], &spec);
                let gnorm = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
                let gbound = PSI_GRAD_BOUND_C1 / l * v.sqrt();
                let lbound = c2 / (l * l);
                if gnorm > gbound * (1.0 + 1e-12) + 1e-300 {
                    violations += 1;
                }
                if lap.abs() > lbound * (1.0 + 1e-12) {
                    violations += 1;
                }
                if gbound > 0.0 {
                    max_grad_ratio = max_grad_ratio.max(gnorm / gbound);
                }
                max_lap_ratio = max_lap_ratio.max(lap.abs() / lbound);
            }
        }
    }
    out.detail("violations", violations);
    out.detail("max_grad_ratio", max_grad_ratio);
    out.detail("max_lap_ratio", max_lap_ratio);
    out.passed = violations == 0;
    out
}

/// Criterion 6: decoupled L1 contraction. Ordered Barenblatts with masses
/// 1 and 1.1 keep D(t) = 0.1 within 1e-3, and D is nonincreasing within
/// 1e-10 ||u0||_1 for every chi = 0 pair.
fn criterion_decoupled_contraction(ctx: &mut SuiteContext) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(6, "decoupled_l1_contraction");
    let grid = GridSpec::new(1, 4.0, 256).unwrap();
    let params = ModelParams::new(2.0, 2.0, 1.0, 0, 0).unwrap();
    let input = ContractionInput {
        params,
        cfl: CflConfig::default(),
        t_end: 0.4,
        sample_times: (1..8).map(|i| i as f64 * 0.05).collect(),
        epsilon: 1.0,
        c_const: 1.0,
    };

    // ordered Barenblatt pair
    let b1 = BarenblattSpec::new(2.0, 1, 1.0, 0.1).unwrap();
    let b2 = BarenblattSpec::new(2.0, 1, 1.1, 0.1).unwrap();
    let init1 = InitialData {
        u0: ScalarField::from_fn(grid, |x| b1.eval(x[0].abs(), 0.0)),
        v0: None,
    };
    let init2 = InitialData {
        u0: ScalarField::from_fn(grid, |x| b2.eval(x[0].abs(), 0.0)),
        v0: None,
    };
    let series = l1_contraction_experiment(&input, &init1, &init2).unwrap();
    let mass0 = crate::grid::integrate(&init1.u0);
    let d_gap_worst = series
        .d
        .iter()
        .map(|&d| (d - 0.1).abs())
        .fold(0.0f64, f64::max);
    let mut monotone_violation = 0.0f64;
    for w in series.d.windows(2) {
        monotone_violation = monotone_violation.max(w[1] - w[0]);
    }

    // a second, unordered pair
    let init3 = InitialData {
        u0: ScalarField::from_fn(grid, |x| (1.0 - x[0] * x[0]).max(0.0)),
        v0: None,
    };
    let init4 = InitialData {
        u0: ScalarField::from_fn(grid, |x| (0.8 - 1.5 * (x[0] - 0.4).powi(2)).max(0.0)),
        v0: None,
    };
    let series2 = l1_contraction_experiment(&input, &init3, &init4).unwrap();
    let mut monotone_violation2 = 0.0f64;
    for w in series2.d.windows(2) {
        monotone_violation2 = monotone_violation2.max(w[1] - w[0]);
    }
    let mass0_b = crate::grid::integrate(&init3.u0);

    let series_drift = |m: &[f64]| -> f64 {
        let m0 = m[0];
        m.iter().map(|&v| ((v - m0) / m0).abs()).fold(0.0, f64::max)
    };
    ctx.drifts
        .push(("contraction_barenblatt_u".into(), series_drift(&series.mass)));
    ctx.drifts
        .push(("contraction_barenblatt_uhat".into(), series_drift(&series.mass_hat)));
    out.detail("barenblatt_gap_worst", d_gap_worst);
    out.detail("monotone_violation_barenblatt", monotone_violation);
    out.detail("monotone_violation_second_pair", monotone_violation2);
    out.passed = d_gap_worst <= 1e-3
        && monotone_violation <= 1e-10 * mass0
        && monotone_violation2 <= 1e-10 * mass0_b;
    out
}

fn gaussian_bump(grid: GridSpec, amp: f64, sigma: f64, center: [f64; 2]) -> ScalarField {
    ScalarField::from_fn(grid, move |x| {
        let dx = x[0] - center[0];
        let dy = if x.len() > 1 { x[1] - center[1] } else { 0.0 };
        amp * (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
    })
}

/// Criterion 7: coupled contraction stability (chi = 1, delta = 0, m = 2,
/// q = 2, n = 2): the fitted rate is finite and agrees within 30% between
/// N = 128 and N = 256, and D(T)/D(0) <= e^{lambda T} * 1.05.
fn criterion_coupled_contraction(ctx: &mut SuiteContext) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(7, "coupled_contraction_stability");
    let params = ModelParams::new(2.0, 2.0, 1.0, 0, 1).unwrap();
    let t_end = 0.1;
    let mut lambdas = Vec::new();
    let mut envelope_ok = true;
    for &n in &[128usize, 256] {
        let grid = GridSpec::new(2, 4.0, n).unwrap();
        let u0 = gaussian_bump(grid, 1.0, 1.0, [0.0, 0.0]);
        // positive perturbation, L1-normalized to 1e-3 on this grid
        let mut pert = gaussian_bump(grid, 1.0, 0.6, [0.5, 0.0]);
        let pmass = crate::grid::integrate(&pert);
        for v in pert.values.iter_mut() {
            *v *= 1e-3 / pmass;
        }
        let mut u0_hat = u0.clone();
        for (a, b) in u0_hat.values.iter_mut().zip(&pert.values) {
            *a += b;
        }
        let input = ContractionInput {
            params,
            cfl: CflConfig::default(),
            t_end,
            sample_times: (1..10).map(|i| i as f64 * 0.01).collect(),
            epsilon: 1.0,
            c_const: 1.0,
        };
        let series = l1_contraction_experiment(
            &input,
            &InitialData { u0, v0: None },
            &InitialData { u0: u0_hat, v0: None },
        )
        .unwrap();
        let series_drift = |m: &[f64]| -> f64 {
            let m0 = m[0];
            m.iter().map(|&v| ((v - m0) / m0).abs()).fold(0.0, f64::max)
        };
        ctx.drifts
            .push((format!("coupled_contraction_u_n{n}"), series_drift(&series.mass)));
        ctx.drifts.push((
            format!("coupled_contraction_uhat_n{n}"),
            series_drift(&series.mass_hat),
        ));
        let lambda = series.lambda_fit.unwrap_or(f64::INFINITY);
        let growth = series.d.last().unwrap() / series.d[0];
        let bound = (lambda * t_end).exp() * 1.05;
        if !(growth <= bound) {
            envelope_ok = false;
        }
        out.detail(&format!("lambda_n{n}"), lambda);
        out.detail(&format!("growth_n{n}"), growth);
        out.detail(&format!("growth_bound_n{n}"), bound);
        lambdas.push(lambda);
    }
    let finite = lambdas.iter().all(|l| l.is_finite());
    let scale = lambdas.iter().map(|l| l.abs()).fold(0.0f64, f64::max);
    let stable = finite && (lambdas[0] - lambdas[1]).abs() <= 0.3 * scale;
    out.detail("lambda_gap_rel", if scale > 0.0 { (lambdas[0] - lambdas[1]).abs() / scale } else { 0.0 });
    out.passed = finite && stable && envelope_ok;
    out
}

/// Criterion 8: Holder oscillation decay on a computed Barenblatt
/// trajectory: interior fit beta >= 0.95 with R^2 >= 0.99; free-boundary fit
/// beta in [1.5, 2.1]; zero nested-oscillation monotonicity violations.
fn criterion_holder(ctx: &mut SuiteContext) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(8, "holder_oscillation_decay");
    let t_end = 1.5;
    // a few early snapshots so the full intrinsic depth stays inside the
    // recorded range, then dense snapshots toward the anchor time so every
    // nested window holds a few slices
    let mut snaps: Vec<f64> = vec![0.02, 0.05, 0.1, 0.2, 0.3];
    let mut t = 0.4;
    while t < 0.8 {
        snaps.push(t);
        t += 0.01;
    }
    let mut t = 0.8;
    while t < t_end - 1e-9 {
        snaps.push(t);
        t += 0.002;
    }
    snaps.push(t_end);
    let b = BarenblattSpec::new(2.0, 1, 1.0, 0.25).unwrap();
    let grid = GridSpec::new(1, 4.0, 512).unwrap();
    let u0 = ScalarField::from_fn(grid, |x| b.eval(x[0].abs(), 0.0));
    let params = ModelParams::new(2.0, 2.0, 1.0, 0, 0).unwrap();
    let cfg = RunConfig::new(params, t_end, snaps);
    let traj = run(&cfg, &InitialData { u0, v0: None }).expect("holder trajectory");
    ctx.drifts.push(("holder_barenblatt".into(), mass_drift(&traj)));

    // interior smooth point
    let interior = make_intrinsic_cylinder(&traj, &[0.8, 0.0, 0.0], t_end, 1.0, 0.25, 0.1)
        .and_then(|cyl| estimate_holder_exponent(&traj, &cyl, 5));
    // free-boundary point: effective support edge of the final snapshot
    // (u above 1e-3 of its max, past the low-amplitude numerical toe)
    let last = traj.snapshots.last().unwrap();
    let threshold = 1e-3 * last.u.max();
    let mut edge = 0.0f64;
    for i in 0..grid.cell_count() {
        if last.u.values[i] > threshold {
            edge = edge.max(grid.coord(i).abs());
        }
    }
    let boundary = make_intrinsic_cylinder(&traj, &[edge, 0.0, 0.0], t_end, 0.5, 1.0, 0.1)
        .and_then(|cyl| estimate_holder_exponent(&traj, &cyl, 4));

    match (&interior, &boundary) {
        (Ok(fit_i), Ok(fit_b)) => {
            let mono_violations = fit_i
                .oscillations
                .windows(2)
                .chain(fit_b.oscillations.windows(2))
                .filter(|w| w[1] > w[0])
                .count();
            out.detail("interior_beta", fit_i.beta);
            out.detail("interior_r2", fit_i.r_squared);
            out.detail("boundary_beta", fit_b.beta);
            out.detail("boundary_r2", fit_b.r_squared);
            out.detail("support_edge", edge);
            out.detail("monotonicity_violations", mono_violations);
            out.passed = fit_i.beta >= 0.95
                && fit_i.r_squared >= 0.99
                && fit_b.beta >= 1.5
                && fit_b.beta <= 2.1
                && mono_violations == 0;
        }
        (i, b) => {
            if let Err(e) = i {
                out.detail("interior_error", e.to_string());
            }
            if let Err(e) = b {
                out.detail("boundary_error", e.to_string());
            }
        }
    }
    out
}

fn coupled_preset_run(n_cells: usize, ctx: &mut SuiteContext) -> Trajectory {
    let grid = GridSpec::new(2, 4.0, n_cells).unwrap();
    let params = ModelParams::new(2.0, 2.0, 1.0, 0, 1).unwrap();
    let u0 = gaussian_bump(grid, 1.0, 1.0, [0.0, 0.0]);
    let snaps: Vec<f64> = (0..=16).map(|i| i as f64 * 0.025).collect();
    let cfg = RunConfig::new(params, 0.4, snaps);
    let traj = run(&cfg, &InitialData { u0, v0: None }).expect("coupled preset run");
    ctx.drifts
        .push((format!("coupled_preset_n{n_cells}"), mass_drift(&traj)));
    traj
}

/// Criteria 9 and 10 share the standard coupled preset at N = 64 and 128.
fn criteria_energy_and_weakform(ctx: &mut SuiteContext) -> (CriterionOutcome, CriterionOutcome) {
    let mut out9 = CriterionOutcome::new(9, "energy_audit_stability");
    let mut out10 = CriterionOutcome::new(10, "weak_form_refinement");
    let coarse = coupled_preset_run(64, ctx);
    let fine = coupled_preset_run(128, ctx);

    let audit = |traj: &Trajectory| {
        energy_audit(&EnergyAuditInput {
            traj,
            cutoff: EnergyCutoff {
                center: [0.0; 3],
                radius: 1.5,
                ramp_fraction: 0.25,
            },
            t1: 0.1,
            t2: 0.35,
            level: 0.3,
            sign: LevelSign::Plus,
            a1: None,
            a2: None,
            xi_tol: 1e-10,
        })
    };
    match (audit(&coarse), audit(&fine)) {
        (Ok(a), Ok(b)) => {
            let (ca, cb) = (a.c_emp.unwrap_or(f64::NAN), b.c_emp.unwrap_or(f64::NAN));
            let change = ((ca - cb) / cb).abs();
            let nonneg = [
                a.lhs_slice,
                a.lhs_gradient,
                a.rhs_grad_eta,
                a.rhs_eta_time,
                a.rhs_initial_slice,
                a.rhs_chemotaxis,
                b.lhs_slice,
                b.lhs_gradient,
                b.rhs_grad_eta,
                b.rhs_eta_time,
                b.rhs_initial_slice,
                b.rhs_chemotaxis,
            ]
            .iter()
            .all(|&t| t >= 0.0);
            out9.detail("c_emp_coarse", ca);
            out9.detail("c_emp_fine", cb);
            out9.detail("relative_change", change);
            out9.detail("all_terms_nonnegative", nonneg);
            out9.passed = ca.is_finite() && cb.is_finite() && change < 0.2 && nonneg;
        }
        (a, b) => {
            if let Err(e) = a {
                out9.detail("coarse_error", e.to_string());
            }
            if let Err(e) = b {
                out9.detail("fine_error", e.to_string());
            }
        }
    }

    let bank_for = |traj: &Trajectory| {
        TestFunctionBank::seeded(&traj.grid, traj.t_start(), traj.t_end(), 8, 2025)
    };
    match (
        weak_form_residual(&coarse, &bank_for(&coarse)),
        weak_form_residual(&fine, &bank_for(&fine)),
    ) {
        (Ok(rc), Ok(rf)) => {
            let res_c = rc.max_residual_u.max(rc.max_residual_v);
            let res_f = rf.max_residual_u.max(rf.max_residual_v);
            let factor = res_c / res_f;
            out10.detail("residual_coarse", res_c);
            out10.detail("residual_fine", res_f);
            out10.detail("reduction_factor", factor);
            out10.passed = factor >= 1.8;
        }
        (a, b) => {
            if let Err(e) = a {
                out10.detail("coarse_error", e.to_string());
            }
            if let Err(e) = b {
                out10.detail("fine_error", e.to_string());
            }
        }
    }
    (out9, out10)
}

/// Runs criteria 1 and 3-10; criterion 2 (mass conservation) aggregates the
/// drifts of every trajectory the suite produced, and criterion 11
/// (determinism) is established by re-serializing the report (the CLI and
/// the acceptance test compare bytes across runs).
pub fn run_suite() -> SuiteReport {
    run_suite_with_timings().0
}

/// Like [`run_suite`], additionally returning wall-clock seconds per
/// criterion id. Timings stay out of the report so that repeated runs
/// remain byte-identical.
pub fn run_suite_with_timings() -> (SuiteReport, Vec<(u32, f64)>) {
    let mut ctx = SuiteContext { drifts: Vec::new() };
    let mut timings = Vec::new();
    let mut timed = |id: u32, f: &mut dyn FnMut(&mut SuiteContext) -> CriterionOutcome,
                     ctx: &mut SuiteContext| {
        let start = std::time::Instant::now();
        let out = f(ctx);
        timings.push((id, start.elapsed().as_secs_f64()));
        out
    };
    let c1 = timed(1, &mut criterion_barenblatt, &mut ctx);
    let c3 = timed(3, &mut criterion_elliptic_cross, &mut ctx);
    let c4 = timed(4, &mut criterion_bessel, &mut ctx);
    let c5 = timed(5, &mut criterion_psi_bounds, &mut ctx);
    let c6 = timed(6, &mut criterion_decoupled_contraction, &mut ctx);
    let c7 = timed(7, &mut criterion_coupled_contraction, &mut ctx);
    let c8 = timed(8, &mut criterion_holder, &mut ctx);
    let start = std::time::Instant::now();
    let (c9, c10) = criteria_energy_and_weakform(&mut ctx);
    timings.push((9, start.elapsed().as_secs_f64()));

    let mut c2 = CriterionOutcome::new(2, "mass_conservation");
    let worst = ctx
        .drifts
        .iter()
        .map(|&(_, d)| d)
        .fold(0.0f64, f64::max);
    c2.detail("trajectories", ctx.drifts.len());
    c2.detail("worst_relative_drift", worst);
    for (name, d) in &ctx.drifts {
        c2.detail(&format!("drift_{name}"), *d);
    }
    c2.passed = worst <= 1e-10;

    let mut c11 = CriterionOutcome::new(11, "determinism");
    // the report carries no timings or environment state; byte-identity
    // across repeated runs is checked by the callers (CLI test and
    // acceptance suite), which rerun the suite and compare serializations
    c11.detail("report_is_environment_free", true);
    c11.passed = true;

    let mut criteria = vec![c1, c2, c3, c4, c5, c6, c7, c8, c9, c10, c11];
    criteria.sort_by_key(|c| c.id);
    let all_passed = criteria.iter().all(|c| c.passed);
    (
        SuiteReport {
            version: 1,
            criteria,
            all_passed,
        },
        timings,
    )
}
