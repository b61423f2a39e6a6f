//! Almost-multisecant quasi-Newton methods.
//!
//! Multisecant Hessian and inverse-Hessian updates, a low-rank certificate for
//! the diagonal shift that makes a symmetrized update positive semidefinite,
//! and the optimizers built on top of them.

// `!(x > 0.0)` is how parameter checks reject NaN along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod limited;
pub mod linalg;
pub mod optimizer;
pub mod problems;
pub mod secant;
pub mod shift;
pub mod updates;

pub use error::{Error, Result};
