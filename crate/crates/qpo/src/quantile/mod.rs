//! Online quantile tracking on the fast timescale.
//!
//! The tracker runs the stochastic approximation
//! `q <- q + beta_k * (alpha - frac)` where `frac` is the (optionally
//! importance-weighted) fraction of batch returns at or below the current
//! estimate. Its step size must dominate the policy step size; see
//! [`BetaSchedule`] for the adaptive schedule with magnitude clipping.

mod density;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use density::{density_kde, density_sigmoid, DensityEstimate, DEFAULT_DENSITY_FLOOR};

/// Decay of the raw step `beta_k` before magnitude adaptation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum BetaDecay {
    /// `k^-lambda` with `lambda` in (0.5, 1): square-summable but not summable.
    Power { lambda: f64 },
    /// `factor^floor(k / period)`: constant-rate decay used to speed up
    /// experiments; forgoes the summability conditions.
    Stepwise { factor: f64, period: u64 },
}

/// Adaptive tracker step size
/// `beta_k = c0 * decay(k) * clip(|q|, c1, c2)`.
///
/// Scaling by the clipped magnitude of the current estimate keeps the
/// recursion responsive when quantiles are large without letting tiny
/// estimates freeze it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaSchedule {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    #[serde(flatten)]
    pub decay: BetaDecay,
}

impl Default for BetaSchedule {
    fn default() -> Self {
        BetaSchedule {
            c0: 1.0,
            c1: 0.1,
            c2: 10.0,
            decay: BetaDecay::Power { lambda: 0.75 },
        }
    }
}

impl BetaSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.c0 > 0.0) || !self.c0.is_finite() {
            return Err(Error::config("beta c0 must be positive and finite"));
        }
        if !(self.c1 > 0.0) || !(self.c2 >= self.c1) || !self.c2.is_finite() {
            return Err(Error::config("beta clip bounds need 0 < c1 <= c2 < inf"));
        }
        match self.decay {
            BetaDecay::Power { lambda } => {
                if !(lambda > 0.5 && lambda < 1.0) {
                    return Err(Error::config(format!(
                        "beta power decay needs lambda in (0.5, 1), got {lambda}"
                    )));
                }
            }
            BetaDecay::Stepwise { factor, period } => {
                if !(factor > 0.0 && factor < 1.0) {
                    return Err(Error::config("beta stepwise factor must lie in (0, 1)"));
                }
                if period == 0 {
                    return Err(Error::config("beta stepwise period must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Step size for update index `k >= 1` at current estimate `q`.
    pub fn beta(&self, k: u64, q: f64) -> f64 {
        debug_assert!(k >= 1, "beta is defined for k >= 1");
        let decay = match self.decay {
            BetaDecay::Power { lambda } => (k as f64).powf(-lambda),
            BetaDecay::Stepwise { factor, period } => factor.powi((k / period) as i32),
        };
        self.c0 * decay * q.abs().clamp(self.c1, self.c2)
    }
}

/// Empirical `alpha`-quantile: the `ceil(alpha * n)`-th order statistic
/// (lower interpolation), index clamped into `1..=n`.
pub fn empirical_quantile(values: &[f64], alpha: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::config(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = sorted.len();
    // The epsilon guards against alpha * n landing epsilon above an integer.
    let index = ((alpha * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    Ok(sorted[index - 1])
}

/// Two-timescale quantile tracker.
///
/// `k` counts completed recursion steps; the first call to
/// [`QuantileTracker::update`] on an unseeded tracker first seeds `q` with
/// the batch's empirical quantile, then applies the recursion to the same
/// batch.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuantileTracker {
    alpha: f64,
    schedule: BetaSchedule,
    q: Option<f64>,
    k: u64,
    /// Importance ratios are clipped at this bound before weighting.
    max_ratio: f64,
    clip_events: u64,
    last_beta: Option<f64>,
}

impl QuantileTracker {
    pub fn new(alpha: f64, schedule: BetaSchedule, max_ratio: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::config(format!(
                "alpha must lie in (0, 1), got {alpha}"
            )));
        }
        schedule.validate()?;
        if !(max_ratio >= 1.0) || !max_ratio.is_finite() {
            return Err(Error::config("max_ratio must be >= 1 and finite"));
        }
        Ok(QuantileTracker {
            alpha,
            schedule,
            q: None,
            k: 0,
            max_ratio,
            clip_events: 0,
            last_beta: None,
        })
    }

    pub fn with_initial(alpha: f64, schedule: BetaSchedule, max_ratio: f64, q0: f64) -> Result<Self> {
        if !q0.is_finite() {
            return Err(Error::config("q0 must be finite"));
        }
        let mut t = QuantileTracker::new(alpha, schedule, max_ratio)?;
        t.q = Some(q0);
        Ok(t)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn is_seeded(&self) -> bool {
        self.q.is_some()
    }

    /// Current estimate. Panics if the tracker has never seen data; callers
    /// inside this crate always seed first.
    pub fn q(&self) -> f64 {
        self.q.expect("tracker not seeded")
    }

    /// Completed recursion steps.
    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn clip_events(&self) -> u64 {
        self.clip_events
    }

    pub fn last_beta(&self) -> Option<f64> {
        self.last_beta
    }

    /// Seeds `q` from the batch's empirical quantile if not yet seeded.
    pub fn seed_from_batch(&mut self, returns: &[f64]) -> Result<()> {
        if self.q.is_none() {
            self.q = Some(empirical_quantile(returns, self.alpha)?);
        }
        Ok(())
    }

    fn validate_returns(returns: &[f64]) -> Result<()> {
        if returns.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if returns.iter().any(|u| !u.is_finite()) {
            return Err(Error::non_finite("batch return"));
        }
        Ok(())
    }

    /// Shared recursion core: both update paths funnel through the same
    /// floating-point expression so unit ratios reproduce the unweighted
    /// update bit for bit.
    fn advance(&mut self, weighted_count: f64, n: usize) -> f64 {
        let q = self.q.expect("seeded");
        self.k += 1;
        let beta = self.schedule.beta(self.k, q);
        let frac = weighted_count / n as f64;
        let next = q + beta * (self.alpha - frac);
        self.q = Some(next);
        self.last_beta = Some(beta);
        next
    }

    /// On-policy recursion step; returns the new estimate.
    pub fn update(&mut self, returns: &[f64]) -> Result<f64> {
        Self::validate_returns(returns)?;
        self.seed_from_batch(returns)?;
        let q = self.q.expect("seeded");
        let count: f64 = returns.iter().map(|&u| f64::from(u8::from(u <= q))).sum();
        Ok(self.advance(count, returns.len()))
    }

    /// Importance-weighted recursion step. `ratios[i]` weights sample `i`;
    /// ratios above `max_ratio` are clipped (counted in
    /// [`QuantileTracker::clip_events`]). A ratio of exactly zero is allowed:
    /// it drops the sample, which is the correct degenerate weighting.
    pub fn update_is(&mut self, returns: &[f64], ratios: &[f64]) -> Result<f64> {
        Self::validate_returns(returns)?;
        if ratios.len() != returns.len() {
            return Err(Error::ShapeMismatch {
                what: "importance ratios",
                expected: returns.len(),
                got: ratios.len(),
            });
        }
        if let Some(i) = ratios.iter().position(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::NonFiniteRatio { step: i });
        }
        self.seed_from_batch(returns)?;
        let q = self.q.expect("seeded");
        let mut weighted = 0.0;
        for (&u, &r) in returns.iter().zip(ratios) {
            let rho = if r > self.max_ratio {
                self.clip_events += 1;
                self.max_ratio
            } else {
                r
            };
            weighted += rho * f64::from(u8::from(u <= q));
        }
        Ok(self.advance(weighted, returns.len()))
    }
}
