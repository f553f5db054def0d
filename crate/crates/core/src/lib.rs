//! Non-intrusive spectral submanifold (SSM) reduction of nonlinear mechanical
//! systems `M ẍ + C ẋ + K x + f(x, ẋ) = ε f^ext(Ωt)`.
//!
//! The nonlinearity is treated as a black box: polynomial coefficients of the
//! SSM parameterization and its reduced dynamics are computed from
//! evaluations of `f` alone.

pub mod error;
pub mod linalg;
pub mod model;
pub mod models;
pub mod multiindex;
pub mod cli;
pub mod protocol;
pub mod rom;
pub mod spectral;
pub mod ssm;
pub mod step;

pub use error::{Result, SsmError};
