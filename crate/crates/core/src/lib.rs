//! Monotone finite-difference schemes for degenerate parabolic and elliptic
//! equations on the periodic torus, with structural checkers, Richardson
//! extrapolation and convergence studies.

#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::manual_is_multiple_of
)]

pub mod analysis;
pub mod cli;
pub mod elliptic;
pub mod error;
pub mod fields;
pub mod linalg;
pub mod operator;
pub mod parabolic;
pub mod richardson;
pub mod stencil;
pub mod validate;

pub use error::{Error, Result};
