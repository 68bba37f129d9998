//! Finite-volume simulator for the degenerate Keller-Segel system
//!
//!   u_t = div(grad u^m - chi u^{q-1} grad v)
//!   delta v_t = lap v - gamma v + u
//!
//! on a large periodic box, together with a diagnostics harness that audits
//! the analytical machinery behind its regularity and uniqueness theory on
//! computed solutions: localized weight functions, Bessel and heat kernels,
//! local energy estimates, intrinsic-cylinder oscillation decay, Sobolev
//! inequalities and L1 contraction.

pub mod chemo;
pub mod density;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod io;
pub mod kernels;
pub mod oracles;
pub mod quad;
pub mod rng;
pub mod spectral;
pub mod system;
pub mod validate;

pub use error::{Error, Result};
