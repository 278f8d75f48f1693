//! Exact inference for linear-Gaussian probabilistic programs.
//!
//! Programs written in a small Python-like language are executed on a
//! multivariate Gaussian: every statement is a closed-form update of the
//! mean vector and covariance matrix, and `condition` is exact. The
//! posterior can then be summarised with leakage metrics (KL divergence,
//! mutual information), probability queries and Gaussian-mechanism noise
//! calibration.
//!
//! ```
//! use gaussi::{interp::run_program, lang::parse};
//!
//! let program = parse(
//!     "X = Normal(15, 2)
//! Y = Normal(2, 1)
//! Z = X + Y
//! condition(Z, 1)
//! return X, Y",
//! )?;
//! let posterior = run_program(&program)?;
//! assert!((posterior.mean[0] - 13.0 / 3.0).abs() < 1e-12);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod bench;
pub mod casestudy;
pub mod cli;
pub mod gaussian;
pub mod interp;
pub mod lang;
pub mod metrics;
pub mod report;

pub use gaussian::{ArithOp, GaussianError, GaussianState};
pub use interp::{execute, run_program, PosteriorResult, RuntimeError};
pub use lang::{parse, validate, Program};
