//! Paired-run L1-contraction experiment and the Gronwall envelope
//! C eps e^{int g2} int g1 e^{-int g2} from the uniqueness argument.

use super::grad_l2_norm;
use crate::density::{fpow, CflConfig, ModelParams};
use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::quad::{cumulative_trapezoid, linear_fit};
use crate::system::{CoupledState, InitialData, TerminationStatus};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct ContractionSeries {
    pub times: Vec<f64>,
    /// D(t) = ||u - u_hat||_1.
    pub d: Vec<f64>,
    /// ||(u - u_hat)_+||_1.
    pub d_plus: Vec<f64>,
    /// ||(u_hat - u)_+||_1.
    pub d_minus: Vec<f64>,
    /// Fitted exponential rate of log D(t); None when D has < 2 positive
    /// samples.
    pub lambda_fit: Option<f64>,
    pub lambda_r2: Option<f64>,
    /// g1(t) = ||u_hat||_inf^{q-m-1} ||grad u_hat^m||_2^2.
    pub g1: Vec<f64>,
    /// g2 with the indicator chi_{m,q} = 1 (sup-norm powers only).
    pub g2_case1: Vec<f64>,
    /// g2 with chi_{m,q} = 0 (adds the 2q-m-1 sup-norm powers).
    pub g2_case2: Vec<f64>,
    /// Gronwall envelopes for both indicator conventions.
    pub envelope_case1: Vec<f64>,
    pub envelope_case2: Vec<f64>,
    /// Mass of each run at the sample times (telescoping conservation).
    pub mass: Vec<f64>,
    pub mass_hat: Vec<f64>,
    pub status: TerminationStatus,
    pub flags: Vec<String>,
}

pub struct ContractionInput {
    pub params: ModelParams,
    pub cfl: CflConfig,
    pub t_end: f64,
    pub sample_times: Vec<f64>,
    /// Epsilon of the Young-inequality split in the bound (default 1).
    pub epsilon: f64,
    /// Constant prefactor C of the envelope (default 1).
    pub c_const: f64,
}

fn l1_diff(a: &ScalarField, b: &ScalarField) -> (f64, f64, f64) {
    let hn = a.grid.cell_volume();
    let mut plus = 0.0;
    let mut minus = 0.0;
    for (x, y) in a.values.iter().zip(&b.values) {
        let d = x - y;
        if d > 0.0 {
            plus += d;
        } else {
            minus -= d;
        }
    }
    (hn * (plus + minus), hn * plus, hn * minus)
}

/// Guarded power for the sup-norm factors: 0^negative is taken as 0 (the
/// factor always multiplies a quantity that vanishes with the norm).
fn norm_pow(norm: f64, e: f64, flags: &mut Vec<String>) -> f64 {
    if norm == 0.0 && e < 0.0 {
        if !flags.iter().any(|f| f == "zero_norm_negative_exponent") {
            flags.push("zero_norm_negative_exponent".into());
        }
        return 0.0;
    }
    fpow(norm, e)
}

/// Runs the two trajectories in lockstep (shared dt = min of both CFL
/// bounds, subdivided to land on the sample times), recording the L1
/// difference, its one-sided parts, a fitted exponential rate, the g1/g2
/// integrands of the uniqueness bound and both Gronwall envelopes.
pub fn l1_contraction_experiment(
    input: &ContractionInput,
    init: &InitialData,
    init_hat: &InitialData,
) -> Result<ContractionSeries> {
    if init.u0.grid != init_hat.u0.grid {
        return Err(Error::GridMismatch);
    }
    if !(input.t_end > 0.0) {
        return Err(Error::InvalidInput("t_end must be positive".into()));
    }
    let params = input.params;
    let (mut state, _) = CoupledState::init(init, params)?;
    let (mut state_hat, _) = CoupledState::init(init_hat, params)?;

    let mut events: Vec<f64> = input
        .sample_times
        .iter()
        .cloned()
        .filter(|&t| t > 0.0 && t <= input.t_end * (1.0 + 1e-12))
        .collect();
    events.push(input.t_end);
    events.sort_by(|a, b| a.partial_cmp(b).unwrap());
    events.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * input.t_end);

    let mut flags = Vec::new();
    let q = params.q;
    let m = params.m;
    let mut times = vec![0.0];
    let mut d_series = Vec::new();
    let mut d_plus = Vec::new();
    let mut d_minus = Vec::new();
    let mut g1 = Vec::new();
    let mut g2_case1 = Vec::new();
    let mut g2_case2 = Vec::new();
    let mut mass = Vec::new();
    let mut mass_hat = Vec::new();

    // sup norms of the initial concentrations for the case-2 factor
    let v0_inf = state.v.max_abs();
    let v0_hat_inf = state_hat.v.max_abs();

    let mut record = |state: &CoupledState, state_hat: &CoupledState, flags: &mut Vec<String>| {
        let (d, dp, dm) = l1_diff(&state.u, &state_hat.u);
        d_series.push(d);
        d_plus.push(dp);
        d_minus.push(dm);
        mass.push(crate::grid::integrate(&state.u));
        mass_hat.push(crate::grid::integrate(&state_hat.u));
        let u_inf = state.u.max_abs();
        let uh_inf = state_hat.u.max_abs();
        let w_hat = state_hat.u.map(|x| fpow(x, m));
        let grad_sq = grad_l2_norm(&w_hat).powi(2);
        g1.push(norm_pow(uh_inf, q - m - 1.0, flags) * grad_sq);
        let base = norm_pow(u_inf, q - 1.0, flags)
            + norm_pow(uh_inf, q - 1.0, flags)
            + (norm_pow(u_inf, q - m, flags) + norm_pow(uh_inf, q - m, flags)) / input.epsilon;
        g2_case1.push(base);
        g2_case2.push(
            base + norm_pow(v0_inf, 2.0 * q - m - 1.0, flags)
                + norm_pow(v0_hat_inf, 2.0 * q - m - 1.0, flags)
                + norm_pow(u_inf, 2.0 * q - m - 1.0, flags)
                + norm_pow(uh_inf, 2.0 * q - m - 1.0, flags),
        );
    };
    record(&state, &state_hat, &mut flags);

    let mut status = TerminationStatus::Completed;
    let u0_max = state.u.max().max(state_hat.u.max());
    let mut t = 0.0;
    'outer: for &ev in &events {
        while t < ev {
            let dt = state
                .cfl(&input.cfl)
                .min(state_hat.cfl(&input.cfl))
                .min(ev - t);
            if !(dt > 0.0) {
                return Err(Error::InvalidInput("time step collapsed to zero".into()));
            }
            let res = state.advance(dt).and_then(|_| state_hat.advance(dt));
            match res {
                Ok(()) => {}
                Err(Error::NonFinite(_)) => {
                    status = TerminationStatus::Blowup;
                    break 'outer;
                }
                Err(e) => return Err(e),
            }
            t += dt;
            if crate::system::detect_blowup(&state.u, u0_max)
                || crate::system::detect_blowup(&state_hat.u, u0_max)
            {
                status = TerminationStatus::Blowup;
                break 'outer;
            }
        }
        t = ev;
        times.push(ev);
        record(&state, &state_hat, &mut flags);
    }
    if status != TerminationStatus::Completed {
        flags.push("terminated_early".into());
        times.truncate(d_series.len());
    }

    // exponential fit on the positive samples of D
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, &d) in d_series.iter().enumerate() {
        if d > 0.0 {
            xs.push(times[i]);
            ys.push(d.ln());
        }
    }
    let (lambda_fit, lambda_r2) = if xs.len() >= 2 {
        let (_, slope, r2) = linear_fit(&xs, &ys);
        (Some(slope), Some(r2))
    } else {
        flags.push("d_identically_zero_no_rate".into());
        (None, None)
    };

    let envelope_case1 = gronwall_envelope(&times, &g1, &g2_case1, input.epsilon, input.c_const)?;
    let envelope_case2 = gronwall_envelope(&times, &g1, &g2_case2, input.epsilon, input.c_const)?;

    Ok(ContractionSeries {
        times,
        d: d_series,
        d_plus,
        d_minus,
        lambda_fit,
        lambda_r2,
        g1,
        g2_case1,
        g2_case2,
        envelope_case1,
        envelope_case2,
        mass,
        mass_hat,
        status,
        flags,
    })
}

/// Trapezoidal evaluation of C eps e^{int_0^t g2} int_0^t g1 e^{-int_0^tau g2} dtau
/// at every grid time. Series must share one time grid.
pub fn gronwall_envelope(
    times: &[f64],
    g1: &[f64],
    g2: &[f64],
    epsilon: f64,
    c_const: f64,
) -> Result<Vec<f64>> {
    if times.len() != g1.len() || times.len() != g2.len() {
        return Err(Error::InvalidInput(
            "gronwall series must share one time grid".into(),
        ));
    }
    if epsilon < 0.0 || c_const < 0.0 {
        return Err(Error::InvalidInput("epsilon and C must be nonnegative".into()));
    }
    let big_g2 = cumulative_trapezoid(times, g2);
    let inner: Vec<f64> = g1
        .iter()
        .zip(&big_g2)
        .map(|(&a, &g)| a * (-g).exp())
        .collect();
    let inner_int = cumulative_trapezoid(times, &inner);
    Ok(big_g2
        .iter()
        .zip(&inner_int)
        .map(|(&g, &i)| c_const * epsilon * g.exp() * i)
        .collect())
}

/// Single-point form: the envelope at the grid time nearest to t.
pub fn gronwall_bound(
    times: &[f64],
    g1: &[f64],
    g2: &[f64],
    epsilon: f64,
    c_const: f64,
    t: f64,
) -> Result<f64> {
    let series = gronwall_envelope(times, g1, g2, epsilon, c_const)?;
    let tol = 1e-9 * (1.0 + t.abs());
    for (i, &ti) in times.iter().enumerate() {
        if (ti - t).abs() <= tol {
            return Ok(series[i]);
        }
    }
    Err(Error::InvalidInput(format!(
        "t = {t} is not a grid time of the series"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::oracles::BarenblattSpec;

    fn pme_params() -> ModelParams {
        ModelParams::new(2.0, 2.0, 1.0, 0, 0).unwrap()
    }

    #[test]
    fn identical_runs_zero_difference() {
        let g = GridSpec::new(1, 2.0, 64).unwrap();
        let u0 = ScalarField::from_fn(g, |x| (1.0 - x[0] * x[0]).max(0.0));
        let init = InitialData { u0, v0: None };
        let input = ContractionInput {
            params: pme_params(),
            cfl: CflConfig::default(),
            t_end: 0.2,
            sample_times: vec![0.05, 0.1, 0.15],
            epsilon: 1.0,
            c_const: 1.0,
        };
        let series = l1_contraction_experiment(&input, &init, &init).unwrap();
        assert!(series.d.iter().all(|&d| d == 0.0));
        assert!(series.lambda_fit.is_none());
        assert!(series.flags.iter().any(|f| f == "d_identically_zero_no_rate"));
    }

    #[test]
    fn ordered_barenblatt_difference_is_mass_gap() {
        // masses 1 and 1.1, same center: ordered data, D(t) = 0.1 for all t
        let g = GridSpec::new(1, 4.0, 256).unwrap();
        let b1 = BarenblattSpec::new(2.0, 1, 1.0, 0.1).unwrap();
        let b2 = BarenblattSpec::new(2.0, 1, 1.1, 0.1).unwrap();
        let u0 = ScalarField::from_fn(g, |x| b1.eval(x[0].abs(), 0.0));
        let u0_hat = ScalarField::from_fn(g, |x| b2.eval(x[0].abs(), 0.0));
        let input = ContractionInput {
            params: pme_params(),
            cfl: CflConfig::default(),
            t_end: 0.4,
            sample_times: vec![0.1, 0.2, 0.3],
            epsilon: 1.0,
            c_const: 1.0,
        };
        let series = l1_contraction_experiment(
            &input,
            &InitialData { u0, v0: None },
            &InitialData { u0: u0_hat, v0: None },
        )
        .unwrap();
        for &d in &series.d {
            assert!((d - 0.1).abs() <= 1e-3, "D = {d}");
        }
        // ordered data: the one-sided part in the u direction stays zero
        for &dp in &series.d_plus {
            assert!(dp <= 1e-12);
        }
    }

    #[test]
    fn decoupled_difference_nonincreasing() {
        let g = GridSpec::new(1, 2.0, 64).unwrap();
        let u0 = ScalarField::from_fn(g, |x| (1.0 - x[0] * x[0]).max(0.0));
        let u0_hat = ScalarField::from_fn(g, |x| (0.9 - 2.0 * (x[0] - 0.2).powi(2)).max(0.0));
        let mass0 = crate::grid::integrate(&u0);
        let input = ContractionInput {
            params: pme_params(),
            cfl: CflConfig::default(),
            t_end: 0.3,
            sample_times: (1..10).map(|i| i as f64 * 0.03).collect(),
            epsilon: 1.0,
            c_const: 1.0,
        };
        let series = l1_contraction_experiment(
            &input,
            &InitialData { u0, v0: None },
            &InitialData { u0: u0_hat, v0: None },
        )
        .unwrap();
        for w in series.d.windows(2) {
            assert!(w[1] <= w[0] + 1e-10 * mass0, "D increased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn gronwall_trivial_cases() {
        let times: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let zeros = vec![0.0; times.len()];
        let ones = vec![1.0; times.len()];
        // g1 = 0 -> 0
        let out = gronwall_envelope(&times, &zeros, &ones, 1.0, 1.0).unwrap();
        assert!(out.iter().all(|&x| x == 0.0));
        // g2 = 0 -> C eps int g1
        let out = gronwall_envelope(&times, &ones, &zeros, 2.0, 3.0).unwrap();
        for (i, &t) in times.iter().enumerate() {
            assert!((out[i] - 6.0 * t).abs() < 1e-12);
        }
    }

    #[test]
    fn gronwall_constant_coefficients_closed_form() {
        // g1 = a, g2 = b: C eps (a/b)(e^{bt} - 1)
        let (a, b) = (0.7, 2.0);
        let times: Vec<f64> = (0..=2000).map(|i| i as f64 * 5e-4).collect();
        let g1 = vec![a; times.len()];
        let g2 = vec![b; times.len()];
        let got = gronwall_bound(&times, &g1, &g2, 1.0, 1.0, 1.0).unwrap();
        let exact = a / b * ((b * 1.0f64).exp() - 1.0);
        assert!((got - exact).abs() / exact < 1e-6, "{got} vs {exact}");
    }

    #[test]
    fn gronwall_monotone_in_t_and_epsilon() {
        let times: Vec<f64> = (0..=50).map(|i| i as f64 * 0.02).collect();
        let g1: Vec<f64> = times.iter().map(|t| 0.5 + t.sin().abs()).collect();
        let g2: Vec<f64> = times.iter().map(|t| 0.3 + t.cos().abs()).collect();
        let e1 = gronwall_envelope(&times, &g1, &g2, 1.0, 1.0).unwrap();
        for w in e1.windows(2) {
            assert!(w[1] >= w[0] - 1e-15);
        }
        let e2 = gronwall_envelope(&times, &g1, &g2, 2.0, 1.0).unwrap();
        for (a, b) in e1.iter().zip(&e2) {
            assert!(b >= a);
        }
    }

    #[test]
    fn gronwall_rejects_mismatched_grids() {
        assert!(gronwall_envelope(&[0.0, 1.0], &[0.0], &[0.0, 0.0], 1.0, 1.0).is_err());
        assert!(gronwall_bound(&[0.0, 1.0], &[0.0, 0.0], &[0.0, 0.0], 1.0, 1.0, 0.5).is_err());
    }
}
