//! Threshold machinery for monotone functions `f: [q]^n -> [q]`.
//!
//! The crate evaluates `Pr_{x ~ mu^n}[f(x) = a]` for points `mu` of the
//! probability simplex, computes per-coordinate influences, checks the
//! generalized Russo-Margulis derivative identity, and measures how wide the
//! window `{mu : eps <= Pr[f = a] <= 1 - eps}` is along lines, cross sections
//! and the whole simplex. The tribes variant gives the `Theta(1 / ln n)`
//! example.
//!
//! Module map:
//!
//! - [`measures`]: simplex points, the `mu_t` line and `mu_{s,t}` cross
//!   sections, region classification and uniform sampling.
//! - [`functions`]: explicit tables, the tribes family, the `<=_a` order,
//!   monotonicity and symmetry checks.
//! - [`evaluate`]: exact enumeration, tribes closed form, Monte Carlo and the
//!   quantile encoding.
//! - [`influence`]: fibres, BKKKL / variance / h-influences, `Ent`, `Phi_k`.
//! - [`threshold`]: derivative identity, line widths, cross-section scans,
//!   region measures and the tribes scaling sweep.
//! - [`verify`]: the runtime invariant suites behind `qtl verify`.
//! - [`cli`]: the command-line harness.

pub mod cli;
pub mod error;
pub mod evaluate;
pub mod functions;
pub mod influence;
pub mod measures;
pub mod threshold;
pub mod verify;

pub use error::{Error, Result};
pub use evaluate::{Estimate, Evaluator, Method};
pub use functions::{FunctionSpec, Point};
pub use measures::SimplexMeasure;

/// Default bound on `q^n` for anything that enumerates the whole cube.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1 << 24;
