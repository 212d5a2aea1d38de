//! Density estimates at the tracked quantile.
//!
//! The policy-gradient direction is divided by an estimate of the return
//! density at the current quantile estimate. Two estimators are provided:
//! the sigmoid-kernel form matching the smoothed indicator used in the
//! gradient derivation, and a Gaussian KDE with Silverman's bandwidth.
//! Both floor the estimate to keep the division bounded.

use crate::error::{Error, Result};

/// Default lower bound on density estimates used as divisors.
pub const DEFAULT_DENSITY_FLOOR: f64 = 1e-3;

const SQRT_2PI: f64 = 2.5066282746310002;

/// A density value plus provenance of any clamping.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityEstimate {
    pub value: f64,
    /// True when the raw estimate fell below the floor (or the sample was
    /// degenerate) and the floor was returned instead.
    pub floored: bool,
}

/// Sigmoid-kernel estimate
/// `(1 / (n h)) * sum_i sigma'((q - u_i) / h)` with
/// `sigma'(z) = sigma(z) (1 - sigma(z))`.
///
/// This is the density implied by smoothing the indicator `1{u <= q}` with a
/// logistic CDF of bandwidth `h`.
pub fn density_sigmoid(q: f64, returns: &[f64], bandwidth: f64, floor: f64) -> DensityEstimate {
    assert!(bandwidth > 0.0, "bandwidth must be positive");
    assert!(floor > 0.0, "floor must be positive");
    if returns.is_empty() {
        return DensityEstimate {
            value: floor,
            floored: true,
        };
    }
    let n = returns.len() as f64;
    let raw: f64 = returns
        .iter()
        .map(|u| {
            let s = crate::policy::sigmoid((q - u) / bandwidth);
            s * (1.0 - s)
        })
        .sum::<f64>()
        / (n * bandwidth);
    if raw < floor {
        DensityEstimate {
            value: floor,
            floored: true,
        }
    } else {
        DensityEstimate {
            value: raw,
            floored: false,
        }
    }
}

/// Gaussian KDE at `q` with Silverman's rule-of-thumb bandwidth
/// `1.06 * std * n^(-1/5)`.
///
/// Needs at least two samples. A degenerate sample (zero spread) cannot
/// support a bandwidth; the floor is returned with `floored = true`.
pub fn density_kde(q: f64, returns: &[f64], floor: f64) -> Result<DensityEstimate> {
    assert!(floor > 0.0, "floor must be positive");
    if returns.len() < 2 {
        return Err(Error::config(
            "kde density needs at least 2 samples",
        ));
    }
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|u| (u - mean) * (u - mean)).sum::<f64>() / (n - 1.0);
    let std = var.sqrt();
    let h = 1.06 * std * n.powf(-0.2);
    if !(h > 0.0) || !h.is_finite() {
        return Ok(DensityEstimate {
            value: floor,
            floored: true,
        });
    }
    let raw: f64 = returns
        .iter()
        .map(|u| {
            let z = (q - u) / h;
            (-0.5 * z * z).exp() / SQRT_2PI
        })
        .sum::<f64>()
        / (n * h);
    if raw < floor {
        Ok(DensityEstimate {
            value: floor,
            floored: true,
        })
    } else {
        Ok(DensityEstimate {
            value: raw,
            floored: false,
        })
    }
}
