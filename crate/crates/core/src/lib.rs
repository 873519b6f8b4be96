//! Numerical kernels for minimizing widely degenerate anisotropic functionals
//! of the form
//!
//! ```text
//!   F(u) = sum_i  int (|u_{x_i}| - delta_i)_+^p / p  dx  +  int f u dx
//! ```
//!
//! on rectangular grids, together with the localized estimate machinery used
//! to verify energy bounds, Caccioppoli and Sobolev inequalities, a
//! two-dimensional reverse Hoelder ladder, Bernstein-style maximum-principle
//! gradient bounds, and the anisotropic Sobolev (Troisi) inequality.
//!
//! The crate is `no_std` (with `alloc`); all IO, configuration and file
//! formats live in the companion `degenlab` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod estimates;
pub mod grid;
mod math;
pub mod minimize;
pub mod scalar;
pub mod troisi;

use core::fmt;

use minimize::SolveReport;

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside its documented range (bad axis, negative eps, ...).
    Argument(&'static str),
    /// A stated precondition on the inputs does not hold.
    Precondition(&'static str),
    /// A ball contains no grid nodes.
    EmptyBall,
    /// Two fields live on different grids.
    GridMismatch(&'static str),
    /// The operation is only defined in a specific dimension.
    UnsupportedDimension { required: usize, got: usize },
    /// The iterative solver hit its iteration cap before reaching tolerance.
    /// Carries the regularization parameter and the partial report.
    Convergence { eps: f64, report: SolveReport },
    /// A non-finite value appeared during computation.
    NonFinite { stage: &'static str },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Argument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Precondition(msg) => write!(f, "precondition violated: {msg}"),
            Error::EmptyBall => write!(f, "ball contains no grid nodes"),
            Error::GridMismatch(msg) => write!(f, "grid mismatch: {msg}"),
            Error::UnsupportedDimension { required, got } => {
                write!(f, "unsupported dimension: requires N = {required}, got N = {got}")
            }
            Error::Convergence { eps, report } => write!(
                f,
                "solver did not reach tolerance at eps = {eps:e} \
                 (iterations = {}, residual = {:e})",
                report.iterations, report.el_residual
            ),
            Error::NonFinite { stage } => write!(f, "non-finite value during {stage}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
