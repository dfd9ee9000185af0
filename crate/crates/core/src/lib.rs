//! Energy efficiency of MIMO broadcast channels.
//!
//! The crate computes the normalized energy efficiency
//! `xi = max_Q C(Q) / (Q + alpha)` of a multi-user MIMO downlink from exact
//! sum-capacity solvers, Lambert-W closed forms and analytic bounds, and
//! runs Monte Carlo experiments on how `E[xi]` grows with the number of
//! users.

// `!(x > 0.0)` is used throughout to reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod capacity;
pub mod ee;
pub mod error;
pub mod harness;
pub mod matrix_kernel;
pub mod scaling;
pub mod special_math;
pub mod system_model;

pub use error::{Error, Result};
