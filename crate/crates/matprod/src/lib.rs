//! Asymptotics of right products `A_1⋯A_n` of nonnegative matrices.

pub mod bernoulli;
pub mod coefficients;
pub mod error;
pub mod experiments;
pub mod limit;
pub mod linalg;
pub mod spec;
pub mod multifractal;
pub mod support;
pub mod triangular;

pub use error::{Error, Result};
