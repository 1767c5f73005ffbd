//! Standard normal tail probability and its inverse.

use statrs::function::erf;

use crate::error::{Error, Result};

/// Q(x) = P(Z > x) for a standard normal Z.
pub fn gaussian_tail(x: f64) -> f64 {
    0.5 * erf::erfc(x / std::f64::consts::SQRT_2)
}

/// Q⁻¹(p); rejects `p` outside (0, 1).
pub fn gaussian_tail_inverse(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::ProbabilityOutOfRange(p));
    }
    Ok(std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * p))
}
