//! Tightest Chernoff-Cramér tail bounds for sums of independent variables on
//! heterogeneous intervals, and sign-disagreement based assessment and
//! control of sign (type S) errors.
//!
//! The crate is organised bottom-up:
//!
//! - [`tail_bounds`]: the worst-case exponent `phi*` and the Hoeffding baseline.
//! - [`study`]: proposed/validation sign data, agreement summaries and the
//!   disagreement-to-error bound.
//! - [`confidence`]: one- and two-sided intervals for the sign disagreement rate.
//! - [`simultaneous`]: confidence regions holding jointly over nested subsets.
//! - [`control`]: discovery-set selection at a target type S error level.
//! - [`simulation`] and [`bh`]: the replicate simulation and the
//!   Benjamini-Hochberg directional baseline.
//!
//! All bounds are carried on the natural-log scale.

pub mod bh;
pub mod confidence;
pub mod control;
mod error;
mod optimize;
pub mod simulation;
pub mod simultaneous;
pub mod study;
pub mod tail_bounds;

pub use error::{Error, Result};
