//! Heat-flow monotonicity toolkit: closed-form Gaussian flows, exponent and
//! diffusion-rate bookkeeping, periodic grid numerics, and the functionals
//! whose time monotonicity encodes sharp convolution inequalities.

pub mod config;
pub mod error;
pub mod exponents;
pub mod functionals;
pub mod gaussian;
pub mod grid;
pub mod monotonicity;
pub mod runner;
pub mod verify;

pub use error::{Error, Result};
