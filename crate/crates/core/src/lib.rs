//! Multi-marginal optimal transport and matching with hedonic surplus.
//!
//! Marginals are finitely supported measures on `Rⁿ`. A [`SurplusOracle`]
//! evaluates `b(x₁,…,x_m) = max_z Σ f_i(x_i, z)` together with its
//! derivatives, and the solvers in [`mmot`] and [`matching`] work on the
//! resulting discrete problems.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod linalg;
pub mod lp;
pub mod manifest;
pub mod matching;
pub mod measures;
pub mod mmot;
pub mod newton;
pub mod plot;
pub mod repro;
pub mod surplus;

/// Crate version, recorded in run outputs.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Error, ErrorKind, Result};
pub use linalg::{Matrix, Vector};
pub use measures::{BoxDomain, DiscreteMeasure, Problem};
pub use manifest::RunManifest;
pub use mmot::{Coupling, SolverSettings};
pub use surplus::{PreferenceFunction, Surplus, SurplusOracle};
