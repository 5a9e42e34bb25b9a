//! Numerics for the exponential family `E(z) = λ e^z`, `0 < λ < 1/e`.
//!
//! The crate covers the real Schröder conjugacy at the repelling fixed point
//! and the fractional iterates it induces, overflow-proof tower arithmetic,
//! tracing of hairs (dynamic rays) by inverse-branch composition, gauge
//! functions with the predicates that control Hausdorff measure, the
//! nested-cell measure construction, and an escape-time renderer.

// `!(x > y)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod gauge;
pub mod hairs;
pub mod measure;
pub mod par;
pub mod render;
pub mod schroeder;
pub mod tower;

pub use dynamics::{find_fixed_points, Params};
pub use error::{Error, Result};
pub use tower::{RealDominantComplex, TowerReal};

/// Library version string written next to every CLI output.
pub const VERSION: &str = concat!("hairlab ", env!("CARGO_PKG_VERSION"));
