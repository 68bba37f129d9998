//! Quadrature and special-function helpers shared by the kernel and
//! diagnostics modules.

use std::sync::OnceLock;

/// Node tables for exp-sinh quadrature on (0, inf) with the substitution
/// `s = s0 * exp(pi/2 * sinh t)`. With `s0 = 1/z` the damping factor
/// `exp(-z s) = exp(-E_i)` is independent of `z`, so it is folded into the
/// precomputed weights. Level `k` holds the new midpoint nodes for trapezoid
/// spacing `0.5 / 2^k`.
struct ExpSinhTables {
    /// per level: (E_i, exp(-E_i) * E_i * (pi/2) cosh t_i)
    levels: Vec<Vec<(f64, f64)>>,
}

static TABLES: OnceLock<ExpSinhTables> = OnceLock::new();

const EXP_SINH_TMAX: f64 = 4.0;
// level 10 uses 16 * 2^10 + 1 nodes, the 2^14 doubling cap
const EXP_SINH_LEVELS: usize = 11;

fn tables() -> &'static ExpSinhTables {
    TABLES.get_or_init(|| {
        let mut levels = Vec::with_capacity(EXP_SINH_LEVELS);
        for lev in 0..EXP_SINH_LEVELS {
            let h = 0.5 / (1u64 << lev) as f64;
            let step = if lev == 0 { h } else { 2.0 * h };
            let start = if lev == 0 { -EXP_SINH_TMAX } else { -EXP_SINH_TMAX + h };
            let mut nodes = Vec::new();
            let count = ((2.0 * EXP_SINH_TMAX) / step).round() as usize + 1;
            for i in 0..count {
                let t = start + step * i as f64;
                if t > EXP_SINH_TMAX + 1e-12 {
                    break;
                }
                let sh = std::f64::consts::FRAC_PI_2 * t.sinh();
                if sh >= 690.0 {
                    continue;
                }
                let e = sh.exp();
                let w = (-e).exp() * e * std::f64::consts::FRAC_PI_2 * t.cosh();
                if w > 0.0 && w.is_finite() {
                    nodes.push((e, w));
                }
            }
            levels.push(nodes);
        }
        ExpSinhTables { levels }
    })
}

/// Evaluates `int_0^inf exp(-z s) g(s) ds` for `z > 0` by exp-sinh trapezoid
/// doubling. Levels are doubled until two successive estimates agree to
/// `rel_tol` or the node budget is exhausted (hard cap 2^14).
pub fn laplace_half_line_capped<F: Fn(f64) -> f64>(
    z: f64,
    g: F,
    rel_tol: f64,
    max_nodes: usize,
) -> f64 {
    let tab = tables();
    let s0 = 1.0 / z;
    let mut h = 0.5;
    let mut nodes_used = tab.levels[0].len();
    let mut est = h * s0
        * tab.levels[0]
            .iter()
            .map(|&(e, w)| w * g(s0 * e))
            .sum::<f64>();
    for lev in 1..tab.levels.len() {
        if nodes_used + tab.levels[lev].len() > max_nodes {
            break;
        }
        nodes_used += tab.levels[lev].len();
        let h2 = h / 2.0;
        let mid: f64 = tab.levels[lev].iter().map(|&(e, w)| w * g(s0 * e)).sum();
        let next = est / 2.0 + h2 * s0 * mid;
        if (next - est).abs() <= rel_tol * next.abs().max(f64::MIN_POSITIVE) {
            return next;
        }
        est = next;
        h = h2;
    }
    est
}

/// `laplace_half_line_capped` at the full 2^14 node budget.
pub fn laplace_half_line<F: Fn(f64) -> f64>(z: f64, g: F, rel_tol: f64) -> f64 {
    laplace_half_line_capped(z, g, rel_tol, 1 << 14)
}

/// 15-point Gauss-Legendre nodes/weights on [-1, 1].
const GL15: [(f64, f64); 15] = [
    (-0.9879925180204854, 0.030753241996117268),
    (-0.937273392400706, 0.07036604748810812),
    (-0.8482065834104272, 0.10715922046717194),
    (-0.724417731360170, 0.13957067792615432),
    (-0.5709721726085388, 0.16626920581699392),
    (-0.3941513470775634, 0.18616100001556221),
    (-0.20119409399743451, 0.19843148532711158),
    (0.0, 0.20257824192556127),
    (0.20119409399743451, 0.19843148532711158),
    (0.3941513470775634, 0.18616100001556221),
    (0.5709721726085388, 0.16626920581699392),
    (0.724417731360170, 0.13957067792615432),
    (0.8482065834104272, 0.10715922046717194),
    (0.937273392400706, 0.07036604748810812),
    (0.9879925180204854, 0.030753241996117268),
];

fn gl15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    GL15.iter().map(|&(x, w)| w * f(c + r * x)).sum::<f64>() * r
}

/// Adaptive Gauss-Legendre on [a, b] by interval bisection. Handles
/// integrable endpoint singularities (the Gauss nodes never touch the
/// endpoints). Tolerance is relative to the accumulated integral.
pub fn adaptive_gauss<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let left = gl15(f, a, m);
        let right = gl15(f, m, b);
        let delta = left + right - whole;
        if depth >= 52 || delta.abs() <= tol {
            return left + right;
        }
        recurse(f, a, m, left, tol / 2.0, depth + 1) + recurse(f, m, b, right, tol / 2.0, depth + 1)
    }
    if a == b {
        return 0.0;
    }
    let whole = gl15(&f, a, b);
    let tol = rel_tol * whole.abs().max(f64::MIN_POSITIVE);
    recurse(&f, a, b, whole, tol, 0)
}

/// Lanczos approximation of ln Gamma (g = 7, 9 terms), ~1e-13 relative.
pub fn ln_gamma(x: f64) -> f64 {
    const C: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = 0.99999999999980993;
    let t = x + 7.5;
    for (i, &c) in C.iter().enumerate() {
        a += c / (x + i as f64 + 1.0);
    }
    0.5 * std::f64::consts::TAU.ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Gamma function via the Lanczos lngamma.
pub fn gamma_fn(x: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        return f64::NAN;
    }
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        pi / ((pi * x).sin() * gamma_fn(1.0 - x))
    } else {
        ln_gamma(x).exp()
    }
}

/// Trapezoid integral of samples (t_i, y_i) with strictly increasing t.
pub fn trapezoid(ts: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(ts.len(), ys.len());
    let mut acc = 0.0;
    for i in 1..ts.len() {
        acc += 0.5 * (ys[i] + ys[i - 1]) * (ts[i] - ts[i - 1]);
    }
    acc
}

/// Cumulative trapezoid: out[i] = integral of y from t[0] to t[i].
pub fn cumulative_trapezoid(ts: &[f64], ys: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; ts.len()];
    for i in 1..ts.len() {
        out[i] = out[i - 1] + 0.5 * (ys[i] + ys[i - 1]) * (ts[i] - ts[i - 1]);
    }
    out
}

/// Ordinary least squares fit y = a + b x. Returns (intercept, slope, r_squared).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    let slope = if denom.abs() < 1e-300 {
        0.0
    } else {
        (n * sxy - sx * sy) / denom
    };
    let intercept = (sy - slope * sx) / n;
    let ymean = sy / n;
    let ss_tot: f64 = ys.iter().map(|y| (y - ymean).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - (intercept + slope * x)).powi(2))
        .sum();
    let r2 = if ss_tot < 1e-300 { 1.0 } else { 1.0 - ss_res / ss_tot };
    (intercept, slope, r2)
}
