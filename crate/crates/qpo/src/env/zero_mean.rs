//! Zero-mean synthetic benchmark.
//!
//! Per-step reward `R_t = X_t + h(delta_t) * (Y_t - 1/2)` with
//! `X_t ~ N(0, 1)` and `Y_t ~ Bernoulli(1/2)`, so every policy has expected
//! return zero and only the return *spread* is controllable. The action `a`
//! sets the next mixing level via `delta_{t+1} = sigmoid(a)`, and
//! `h(delta) = h_min + (h_max - h_min) * delta`. Driving `delta` toward zero
//! minimizes variance and therefore raises low quantiles of the return;
//! mean-seeking algorithms see zero gradient signal in expectation.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

use super::{ActionSpace, Environment, StepOutcome};
use crate::error::{Error, Result};
use crate::policy::Action;

/// Observation is `(h(delta_t), t / horizon)`.
#[derive(Clone, Debug)]
pub struct ZeroMeanEnv {
    horizon: usize,
    h_min: f64,
    h_max: f64,
    discount: f64,
    delta: f64,
    t: usize,
}

impl ZeroMeanEnv {
    pub fn new(horizon: usize, h_min: f64, h_max: f64, discount: f64) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::config("zero-mean horizon must be positive"));
        }
        if !(0.0..=1.0).contains(&discount) {
            return Err(Error::config("discount must lie in [0, 1]"));
        }
        if !h_min.is_finite() || !h_max.is_finite() || h_min < 0.0 || h_max < h_min {
            return Err(Error::config("need 0 <= h_min <= h_max, both finite"));
        }
        Ok(ZeroMeanEnv {
            horizon,
            h_min,
            h_max,
            discount,
            delta: 0.0,
            t: 0,
        })
    }

    /// Paper defaults: h in [0, 4], undiscounted.
    pub fn with_horizon(horizon: usize) -> Result<Self> {
        ZeroMeanEnv::new(horizon, 0.0, 4.0, 1.0)
    }

    fn h(&self, delta: f64) -> f64 {
        self.h_min + (self.h_max - self.h_min) * delta
    }

    fn observation(&self) -> Vec<f64> {
        vec![self.h(self.delta), self.t as f64 / self.horizon as f64]
    }
}

impl Environment for ZeroMeanEnv {
    fn obs_dim(&self) -> usize {
        2
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Continuous(1)
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn discount(&self) -> f64 {
        self.discount
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.delta = rng.gen::<f64>();
        self.t = 0;
        self.observation()
    }

    fn step(&mut self, action: &Action, rng: &mut dyn RngCore) -> Result<StepOutcome> {
        let a = match action {
            Action::Continuous(v) if v.len() == 1 => v[0],
            _ => {
                return Err(Error::InvalidAction {
                    reason: "zero-mean env takes a 1-d continuous action".into(),
                })
            }
        };
        if !a.is_finite() {
            return Err(Error::InvalidAction {
                reason: "non-finite action".into(),
            });
        }
        // Reward uses the pre-step delta; the action only shapes the future.
        let x: f64 = StandardNormal.sample(rng);
        let y = if rng.gen::<f64>() < 0.5 { 0.0 } else { 1.0 };
        let reward = x + self.h(self.delta) * (y - 0.5);

        self.delta = crate::policy::sigmoid(a);
        self.t += 1;
        Ok(StepOutcome {
            state: self.observation(),
            reward,
            done: self.t == self.horizon,
        })
    }
}
