//! Extended COM-Poisson count distributions.
//!
//! The family is indexed by a load `ρ > 0` and a rate function `φ` drawn from
//! Bernstein functions, their compositional inverses, or a handful of other
//! closed forms. The crate provides:
//!
//! - [`phi`]: the `φ` catalog, numeric inversion and high-order inverse derivatives,
//! - [`gamma`]: Bernstein-gamma values `W_φ` on integers and reals,
//! - [`ecom`]: the distribution itself with exact moment machinery,
//! - [`extended`]: the `(α, β, γ)` generalization,
//! - [`dispersion`]: structural over/under-dispersion verdicts,
//! - [`queue`]: a birth-death queue simulator whose stationary law is the distribution.

// `!(x <= tol)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dispersion;
pub mod ecom;
pub mod error;
pub mod extended;
pub mod gamma;
pub mod phi;
pub mod queue;
pub mod special;
pub mod stirling;

pub use error::{Error, Result};
pub use phi::{ClassFlags, PhiFunction, PhiKind};
