//! Numerical audits of the analytical machinery: norms, level-set
//! measures, intrinsic cylinders, energy estimates, oscillation decay,
//! Sobolev inequalities and L1 contraction.

pub mod contraction;
pub mod energy;
pub mod holder;
pub mod sobolev;

use crate::error::{Error, Result};
use crate::grid::{ScalarField};
use crate::system::Trajectory;
use serde::{Deserialize, Serialize};

/// h^n-weighted L^p norm; p = inf is max |f|. Rejects p < 1.
pub fn lp_norm(f: &ScalarField, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidInput(format!("L^p norm needs p >= 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(f.max_abs());
    }
    let hn = f.grid.cell_volume();
    if p == 1.0 {
        return Ok(hn * f.values.iter().map(|v| v.abs()).sum::<f64>());
    }
    if p == 2.0 {
        return Ok((hn * f.values.iter().map(|v| v * v).sum::<f64>()).sqrt());
    }
    Ok((hn * f.values.iter().map(|v| v.abs().powf(p)).sum::<f64>()).powf(1.0 / p))
}

/// Total mass, h^n sum of values.
pub fn mass(f: &ScalarField) -> f64 {
    crate::grid::integrate(f)
}

/// h^n-weighted L2 norm of the magnitude of the centered gradient.
pub fn grad_l2_norm(f: &ScalarField) -> f64 {
    let g = crate::grid::gradient(f);
    let m = f.grid.cell_count();
    let mut acc = 0.0;
    for cell in 0..m {
        for d in 0..f.grid.n {
            let v = g.component(d)[cell];
            acc += v * v;
        }
    }
    (acc * f.grid.cell_volume()).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LevelSign {
    #[serde(rename = "plus")]
    Plus,
    #[serde(rename = "minus")]
    Minus,
}

#[derive(Debug, Clone, Copy)]
pub struct LevelSetQuery {
    pub level: f64,
    pub radius: f64,
    pub sign: LevelSign,
    pub time: f64,
}

/// Cells of B_r(center) whose centers sit inside the (non-wrapped) ball.
fn ball_cells(grid: &crate::grid::GridSpec, center: &[f64; 3], radius: f64) -> Result<Vec<usize>> {
    for d in 0..grid.n {
        if center[d].abs() + radius > grid.l {
            return Err(Error::RegionOutOfRange(format!(
                "ball of radius {radius} at {:?} exits the box (L = {})",
                &center[..grid.n],
                grid.l
            )));
        }
    }
    let mut cells = Vec::new();
    for i in 0..grid.cell_count() {
        let x = grid.position(i);
        let mut r2 = 0.0;
        for d in 0..grid.n {
            let dx = x[d] - center[d];
            r2 += dx * dx;
        }
        if r2 <= radius * radius {
            cells.push(i);
        }
    }
    Ok(cells)
}

/// h^n times the count of cells in B_r(center) where (u^m - k)_pm > 0.
pub fn level_set_measure(
    u_snapshot: &ScalarField,
    m_exponent: f64,
    query: &LevelSetQuery,
    center: &[f64; 3],
) -> Result<f64> {
    if !(query.radius > 0.0) {
        return Err(Error::InvalidInput("level-set radius must be positive".into()));
    }
    let grid = u_snapshot.grid;
    let cells = ball_cells(&grid, center, query.radius)?;
    let hn = grid.cell_volume();
    let count = cells
        .iter()
        .filter(|&&i| {
            let w = crate::density::fpow(u_snapshot.values[i], m_exponent);
            match query.sign {
                LevelSign::Plus => w - query.level > 0.0,
                LevelSign::Minus => query.level - w > 0.0,
            }
        })
        .count();
    Ok(hn * count as f64)
}

/// Space-time cylinder B_R(x0) x (t0 - a0^{-alpha} R^2, t0] with intrinsic
/// time depth computed from the oscillation over the parent cylinder
/// Q(2R, R^{2-eps}).
#[derive(Debug, Clone, Serialize)]
pub struct IntrinsicCylinder {
    pub center: [f64; 3],
    pub t0: f64,
    pub radius: f64,
    pub mu_plus: f64,
    pub mu_minus: f64,
    /// Oscillation of u^m over the parent cylinder.
    pub omega: f64,
    /// Amplitude divisor A in a0 = omega / A.
    pub amplitude_divisor: f64,
    /// alpha = 1 - 1/m.
    pub alpha: f64,
    pub a0: f64,
    /// Time depth a0^{-alpha} R^2 (trajectory-truncated when degenerate).
    pub depth: f64,
    /// Set when omega = 0: the intrinsic depth is infinite and has been
    /// truncated to the trajectory range.
    pub degenerate: bool,
    /// Whether (omega/A)^alpha > R^eps held (reported, never enforced).
    pub admissible: bool,
    pub parent_epsilon: f64,
}

/// min/max of u^m over cells of B_radius(center) and snapshots with
/// t in (t_lo, t_hi]; also returns how many snapshots contributed.
pub(crate) fn extrema_over_cylinder(
    traj: &Trajectory,
    center: &[f64; 3],
    radius: f64,
    t_lo: f64,
    t_hi: f64,
) -> Result<(f64, f64, usize)> {
    let cells = ball_cells(&traj.grid, center, radius)?;
    let m_exp = traj.params.m;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut used = 0;
    let tol = 1e-12 * (1.0 + t_hi.abs());
    for s in &traj.snapshots {
        if s.t > t_lo + tol && s.t <= t_hi + tol {
            used += 1;
            for &i in &cells {
                let w = crate::density::fpow(s.u.values[i], m_exp);
                lo = lo.min(w);
                hi = hi.max(w);
            }
        }
    }
    if used == 0 {
        return Err(Error::RegionOutOfRange(
            "cylinder time window contains no snapshot".into(),
        ));
    }
    Ok((lo, hi, used))
}

/// Builds the intrinsic cylinder at (center, t0) from the oscillation of
/// u^m over the parent cylinder Q(2R, R^{2-eps}).
pub fn make_intrinsic_cylinder(
    traj: &Trajectory,
    center: &[f64; 3],
    t0: f64,
    radius: f64,
    amplitude_divisor: f64,
    parent_epsilon: f64,
) -> Result<IntrinsicCylinder> {
    if !(radius > 0.0) || !(amplitude_divisor > 0.0) {
        return Err(Error::InvalidInput(
            "cylinder needs positive radius and amplitude divisor".into(),
        ));
    }
    let m = traj.params.m;
    let parent_depth = radius.powf(2.0 - parent_epsilon);
    let t_lo = t0 - parent_depth;
    let tol = 1e-9 * (1.0 + traj.t_end().abs());
    if t0 > traj.t_end() + tol || t_lo < traj.t_start() - tol {
        return Err(Error::RegionOutOfRange(format!(
            "parent cylinder window ({t_lo}, {t0}] outside trajectory [{}, {}]",
            traj.t_start(),
            traj.t_end()
        )));
    }
    let (mu_minus, mu_plus, _) =
        extrema_over_cylinder(traj, center, 2.0 * radius, t_lo, t0)?;
    let omega = mu_plus - mu_minus;
    let alpha = 1.0 - 1.0 / m;
    let degenerate = omega == 0.0;
    let a0 = omega / amplitude_divisor;
    let (depth, admissible) = if degenerate {
        (t0 - traj.t_start(), false)
    } else {
        let depth = a0.powf(-alpha) * radius * radius;
        if t0 - depth < traj.t_start() - tol {
            return Err(Error::RegionOutOfRange(format!(
                "intrinsic depth {depth} exits the trajectory time range"
            )));
        }
        (depth, a0.powf(alpha) > radius.powf(parent_epsilon))
    };
    Ok(IntrinsicCylinder {
        center: *center,
        t0,
        radius,
        mu_plus,
        mu_minus,
        omega,
        amplitude_divisor,
        alpha,
        a0,
        depth,
        degenerate,
        admissible,
        parent_epsilon,
    })
}

/// Fraction of the cylinder's discrete space-time measure where
/// u^m < mu_minus + omega / 2^{s0}. Snapshots are weighted by their
/// trapezoid share of the time window.
pub fn alternative_fraction(traj: &Trajectory, cyl: &IntrinsicCylinder, s0: u32) -> Result<f64> {
    if cyl.degenerate {
        return Err(Error::Degenerate("cylinder has zero oscillation".into()));
    }
    if s0 < 1 {
        return Err(Error::InvalidInput("s0 must be >= 1".into()));
    }
    let threshold = cyl.mu_minus + cyl.omega / (1u64 << s0) as f64;
    let cells = ball_cells(&traj.grid, &cyl.center, cyl.radius)?;
    let t_lo = cyl.t0 - cyl.depth;
    let tol = 1e-12 * (1.0 + cyl.t0.abs());
    let snaps: Vec<&crate::system::Snapshot> = traj
        .snapshots
        .iter()
        .filter(|s| s.t > t_lo + tol && s.t <= cyl.t0 + tol)
        .collect();
    if snaps.is_empty() {
        return Err(Error::RegionOutOfRange(
            "cylinder time window contains no snapshot".into(),
        ));
    }
    // trapezoid weights on the in-window snapshot times
    let n = snaps.len();
    let mut weights = vec![1.0; n];
    if n > 1 {
        for (k, w) in weights.iter_mut().enumerate() {
            let left = if k == 0 { snaps[0].t } else { snaps[k - 1].t };
            let right = if k == n - 1 { snaps[n - 1].t } else { snaps[k + 1].t };
            *w = 0.5 * (right - left);
        }
    }
    let m_exp = traj.params.m;
    let mut below = 0.0;
    let mut total = 0.0;
    for (snap, &w) in snaps.iter().zip(&weights) {
        for &i in &cells {
            let val = crate::density::fpow(snap.u.values[i], m_exp);
            total += w;
            if val < threshold {
                below += w;
            }
        }
    }
    Ok(below / total)
}
