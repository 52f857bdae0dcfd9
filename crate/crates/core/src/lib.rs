//! Numerical laboratory for scalar variational problems whose minimizers
//! concentrate on a fractal contact set.
//!
//! The crate builds generalized Cantor geometries, evaluates the competitor
//! fields and Orlicz-type integrand families attached to them, certifies the
//! energy assumptions behind the construction, runs trace/chain diagnostics,
//! and reproduces the conforming-vs-nonconforming finite element gap
//! experiments. The `fracmin` binary drives all of it from an INI-style
//! instance config.

pub mod cantor;
pub mod energy;
pub mod fields;
pub mod models;
pub mod quad;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Scalar field evaluated pointwise on the closed box domain.
///
/// Implemented by the analytic competitors and by finite element solutions,
/// so the trace and chain diagnostics run on either.
pub trait ScalarField: Sync {
    fn eval(&self, x: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64 + Sync> ScalarField for F {
    fn eval(&self, x: &[f64]) -> f64 {
        self(x)
    }
}
