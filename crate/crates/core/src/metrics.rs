//! Leakage metrics, probability queries and Gaussian-mechanism calibration.

use serde::{Deserialize, Serialize};
use libm::erfc;
use thiserror::Error;

use crate::gaussian::{GaussianError, GaussianState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("variance must be positive, got {0}")]
    NonPositiveVariance(f64),
    #[error("invalid differential-privacy parameters: {0}")]
    InvalidDpParameters(String),
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
    #[error("`{a}` and `{b}` are perfectly correlated: their joint covariance is singular and mutual information is unbounded")]
    SingularMarginal { a: String, b: String },
    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("a density curve needs at least 2 points")]
    TooFewPoints,
    #[error("`{0}` has zero variance; its density is not defined")]
    DegenerateVariance(String),
}

pub type Result<T> = std::result::Result<T, MetricError>;

fn check_variance(v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(MetricError::NonPositiveVariance(v))
    }
}

/// `log2(sqrt(var_q) / sqrt(var_p)) + (var_p + (mean_p - mean_q)^2) / (2 var_q) - 1/2`.
///
/// This mixes a base-2 logarithm with the `-1/2` of the natural-log form,
/// so it is not a proper divergence in any single unit; see
/// [`kl_divergence_nats`] for the standard quantity.
pub fn kl_divergence_mixed(mean_p: f64, var_p: f64, mean_q: f64, var_q: f64) -> Result<f64> {
    check_variance(var_p)?;
    check_variance(var_q)?;
    let d = mean_p - mean_q;
    Ok(0.5 * (var_q / var_p).log2() + (var_p + d * d) / (2.0 * var_q) - 0.5)
}

/// KL(P || Q) between univariate Gaussians, in nats.
pub fn kl_divergence_nats(mean_p: f64, var_p: f64, mean_q: f64, var_q: f64) -> Result<f64> {
    check_variance(var_p)?;
    check_variance(var_q)?;
    let d = mean_p - mean_q;
    let r = var_p / var_q;
    // r - 1 - ln r loses everything to cancellation when r is close to 1
    let shape = if (r - 1.0).abs() < 1e-4 {
        let x = r - 1.0;
        x * x / 2.0 - x * x * x / 3.0 + x * x * x * x / 4.0
    } else {
        r - 1.0 - r.ln()
    };
    Ok(0.5 * (shape + d * d / var_q))
}

/// Mutual information in bits between two variables of a joint Gaussian,
/// `1/2 log2(var_a var_b / det)`.
pub fn mutual_information(state: &GaussianState, a: &str, b: &str) -> Result<f64> {
    if a == b {
        return Err(GaussianError::SameVariable(a.to_owned()).into());
    }
    let va = state.variance_of(a)?;
    let vb = state.variance_of(b)?;
    let c = state.covariance_of(a, b)?;
    if c == 0.0 {
        return Ok(0.0);
    }
    if va <= 0.0 || vb <= 0.0 {
        return Err(MetricError::SingularMarginal {
            a: a.to_owned(),
            b: b.to_owned(),
        });
    }
    let rho2 = c * c / (va * vb);
    if rho2 >= 1.0 - 1e-15 {
        return Err(MetricError::SingularMarginal {
            a: a.to_owned(),
            b: b.to_owned(),
        });
    }
    let mi = -0.5 * (-rho2).ln_1p() / std::f64::consts::LN_2;
    Ok(if mi.abs() < 1e-12 { 0.0 } else { mi })
}

/// Parameters of the Gaussian mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpParameters {
    pub epsilon: f64,
    pub delta: f64,
    pub sensitivity: f64,
}

impl DpParameters {
    pub fn new(epsilon: f64, delta: f64, sensitivity: f64) -> Result<Self> {
        let p = Self {
            epsilon,
            delta,
            sensitivity,
        };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(MetricError::InvalidDpParameters(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(MetricError::InvalidDpParameters(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if !(self.sensitivity >= 0.0 && self.sensitivity.is_finite()) {
            return Err(MetricError::InvalidDpParameters(format!(
                "sensitivity must be non-negative, got {}",
                self.sensitivity
            )));
        }
        Ok(())
    }

    pub fn noise_variance(&self) -> Result<f64> {
        gaussian_mechanism_variance(self)
    }
}

/// Variance of the noise added by the Gaussian mechanism,
/// `2 sensitivity^2 ln(1.25 / delta) / epsilon^2`.
pub fn gaussian_mechanism_variance(params: &DpParameters) -> Result<f64> {
    params.check()?;
    let DpParameters {
        epsilon,
        delta,
        sensitivity,
    } = *params;
    Ok(2.0 * sensitivity * sensitivity * (1.25 / delta).ln() / (epsilon * epsilon))
}

/// Leakage of one secret for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub label: String,
    /// Mixed-base KL of posterior against prior.
    pub kl_prior_posterior: f64,
    /// Standard KL of posterior against prior, in nats.
    pub kl_nats: f64,
    /// Mutual information in bits, absent when it is unbounded.
    pub mutual_information: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Upper tail of the standard normal, `P(Z > z)`.
fn upper_tail(z: f64) -> f64 {
    if z == f64::INFINITY {
        0.0
    } else if z == f64::NEG_INFINITY {
        1.0
    } else {
        0.5 * erfc(z / std::f64::consts::SQRT_2)
    }
}

/// `P(lo <= X <= hi)` for a normal with the given moments.
pub fn normal_interval_probability(mean: f64, variance: f64, lo: f64, hi: f64) -> Result<f64> {
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(MetricError::InvalidInterval { lo, hi });
    }
    if variance < 0.0 || variance.is_nan() {
        return Err(MetricError::NonPositiveVariance(variance));
    }
    if variance == 0.0 {
        return Ok(if lo <= mean && mean <= hi { 1.0 } else { 0.0 });
    }
    if lo == hi {
        return Ok(0.0);
    }
    let sd = variance.sqrt();
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    // subtract the smaller tails so that neither term is close to 1
    let p = if a >= 0.0 {
        upper_tail(a) - upper_tail(b)
    } else if b <= 0.0 {
        upper_tail(-b) - upper_tail(-a)
    } else {
        1.0 - upper_tail(-a) - upper_tail(b)
    };
    Ok(p.clamp(0.0, 1.0))
}

/// `P(lo <= x <= hi)` under the marginal of `x`.
pub fn interval_probability(state: &GaussianState, x: &str, lo: f64, hi: f64) -> Result<f64> {
    normal_interval_probability(state.mean_of(x)?, state.variance_of(x)?, lo, hi)
}

pub fn normal_density(mean: f64, variance: f64, x: f64) -> f64 {
    let d = x - mean;
    (-d * d / (2.0 * variance)).exp() / (2.0 * std::f64::consts::PI * variance).sqrt()
}

/// Density of `x` on `points` evenly spaced grid values from `lo` to `hi`.
pub fn density_curve(state: &GaussianState, x: &str, lo: f64, hi: f64, points: usize) -> Result<Vec<(f64, f64)>> {
    let mean = state.mean_of(x)?;
    let variance = state.variance_of(x)?;
    if variance <= 0.0 {
        return Err(MetricError::DegenerateVariance(x.to_owned()));
    }
    normal_density_curve(mean, variance, lo, hi, points)
}

pub fn normal_density_curve(mean: f64, variance: f64, lo: f64, hi: f64, points: usize) -> Result<Vec<(f64, f64)>> {
    if points < 2 {
        return Err(MetricError::TooFewPoints);
    }
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(MetricError::InvalidInterval { lo, hi });
    }
    check_variance(variance)?;
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points)
        .map(|i| {
            let x = if i == points - 1 { hi } else { lo + step * i as f64 };
            (x, normal_density(mean, variance, x))
        })
        .collect())
}
