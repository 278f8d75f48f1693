//! Reference computations for checking the `gaussi` engine.
//!
//! Nothing here touches the engine's covariance code. The noise-basis model
//! tracks every variable as an affine map of independent standard normals,
//! and the ABC sampler simulates programs and keeps draws whose observed
//! variables land near the conditioned values.

pub mod abc;
pub mod generator;
pub mod noise_basis;

pub use abc::{abc_posterior, AbcEstimate, Bandwidth};
pub use generator::{random_program, random_source, seed_from_env};
pub use noise_basis::{build_noise_basis, oracle_moments, program_moments, NoiseBasisModel};

use gaussi::lang::unroll::StepError;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("unknown random variable `{0}`")]
    UnknownVariable(String),
    #[error("random variable `{0}` assigned twice")]
    Duplicate(String),
    #[error("negative variance for `{0}`")]
    NegativeVariance(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("observation of `{0}` is outside its support")]
    OutsideSupport(String),
    #[error(transparent)]
    Step(StepError),
    #[error("no sample accepted out of {samples} ({accepted} accepted)")]
    NoAcceptance { samples: usize, accepted: u64 },
}

/// `max |a - b| / max(1, max |b|)` over paired entries.
pub fn relative_deviation(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    let scale = b.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}
