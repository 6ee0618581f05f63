//! Exact and approximate statistics of the mutual information of Jacobi MIMO
//! channels with arbitrary per-mode power allocation.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod ddouble;
pub mod distributions;
pub mod error;
pub mod linalg;
pub mod mgf;
pub mod montecarlo;
pub mod quadrature;
pub mod specfun;

pub use error::{Error, Result};
