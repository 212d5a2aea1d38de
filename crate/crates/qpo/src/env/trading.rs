//! Portfolio trading over a fixed price grid.
//!
//! An episode walks the price matrix row by row. At each step the agent
//! reallocates total wealth across one cash leg and `N` stocks according to
//! a weight vector on the simplex; prices then advance one row, cash earns
//! the per-step risk-free rate, and the reward is the change in portfolio
//! value. With `rows` price rows an episode has `rows - 1` steps.
//!
//! Observation: for each stock, the `lookback` most recent prices normalized
//! by the current price (window clamped at the series start), followed by
//! the current portfolio weights `(cash, stocks...)`. Total width
//! `N * lookback + N + 1`.

use std::sync::Arc;

use rand::RngCore;
use rand_distr::Distribution;

use super::prices::PriceMatrix;
use super::{ActionSpace, Environment, StepOutcome};
use crate::error::{Error, Result};
use crate::policy::Action;

/// Tolerance on "weights form a simplex point" checks.
pub const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct TradingEnv {
    prices: Arc<PriceMatrix>,
    lookback: usize,
    /// Risk-free return per step on the cash leg (0.002 = 0.2%).
    risk_free: f64,
    discount: f64,
    // Episode state.
    t: usize,
    cash: f64,
    /// Shares held per stock.
    holdings: Vec<f64>,
}

impl TradingEnv {
    pub fn new(
        prices: Arc<PriceMatrix>,
        lookback: usize,
        risk_free: f64,
        discount: f64,
    ) -> Result<Self> {
        if prices.rows() < 2 {
            return Err(Error::config("trading needs at least 2 price rows"));
        }
        if prices.cols() == 0 {
            return Err(Error::config("trading needs at least 1 stock"));
        }
        if lookback == 0 {
            return Err(Error::config("lookback must be positive"));
        }
        if !risk_free.is_finite() || risk_free < 0.0 {
            return Err(Error::config("risk_free must be >= 0 and finite"));
        }
        if !(0.0..=1.0).contains(&discount) {
            return Err(Error::config("discount must lie in [0, 1]"));
        }
        let holdings = vec![0.0; prices.cols()];
        Ok(TradingEnv {
            prices,
            lookback,
            risk_free,
            discount,
            t: 0,
            cash: 1.0,
            holdings,
        })
    }

    pub fn stocks(&self) -> usize {
        self.prices.cols()
    }

    pub fn prices(&self) -> &PriceMatrix {
        &self.prices
    }

    /// Portfolio value at the current prices.
    pub fn value(&self) -> f64 {
        let row = self.prices.row(self.t);
        self.cash
            + self
                .holdings
                .iter()
                .zip(row)
                .map(|(h, p)| h * p)
                .sum::<f64>()
    }

    /// Current weights `(cash, stocks...)`; sums to 1 given positive value.
    pub fn weights(&self) -> Vec<f64> {
        let v = self.value();
        let row = self.prices.row(self.t);
        let mut w = Vec::with_capacity(self.stocks() + 1);
        w.push(self.cash / v);
        for (h, p) in self.holdings.iter().zip(row) {
            w.push(h * p / v);
        }
        w
    }

    fn observation(&self) -> Vec<f64> {
        let n = self.stocks();
        let mut obs = Vec::with_capacity(n * self.lookback + n + 1);
        for stock in 0..n {
            let now = self.prices.get(self.t, stock);
            for back in (0..self.lookback).rev() {
                let row = self.t.saturating_sub(back);
                obs.push(self.prices.get(row, stock) / now);
            }
        }
        obs.extend_from_slice(&self.weights());
        obs
    }

    fn validate_weights(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.stocks() + 1 {
            return Err(Error::InvalidAction {
                reason: format!(
                    "weight vector has {} entries, need {}",
                    w.len(),
                    self.stocks() + 1
                ),
            });
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidAction {
                reason: "non-finite weight".into(),
            });
        }
        if w.iter().any(|&v| v < -SIMPLEX_TOL) {
            return Err(Error::InvalidAction {
                reason: format!("negative weight beyond tolerance: {w:?}"),
            });
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidAction {
                reason: format!("weights sum to {sum}, not 1"),
            });
        }
        Ok(())
    }
}

impl Environment for TradingEnv {
    fn obs_dim(&self) -> usize {
        let n = self.stocks();
        n * self.lookback + n + 1
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Simplex(self.stocks() + 1)
    }

    fn horizon(&self) -> usize {
        self.prices.rows() - 1
    }

    fn discount(&self) -> f64 {
        self.discount
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.t = 0;
        // Random initial allocation of unit wealth over all legs.
        let alphas = vec![1.0; self.stocks() + 1];
        let dirichlet = rand_distr::Dirichlet::new(alphas).expect("valid alphas");
        let w = dirichlet.sample(rng);
        self.cash = w[0];
        let row = self.prices.row(0);
        for (n, p) in row.iter().enumerate() {
            self.holdings[n] = w[n + 1] / p;
        }
        self.observation()
    }

    fn step(&mut self, action: &Action, rng: &mut dyn RngCore) -> Result<StepOutcome> {
        let _ = rng; // Dynamics are deterministic given the price grid.
        if self.t + 1 >= self.prices.rows() {
            return Err(Error::InvalidAction {
                reason: "episode already finished; call reset".into(),
            });
        }
        let w = match action {
            Action::Continuous(w) => w,
            _ => {
                return Err(Error::InvalidAction {
                    reason: "trading env takes a continuous weight vector".into(),
                })
            }
        };
        self.validate_weights(w)?;

        let value_before = self.value();
        // Reallocate at current prices, then advance one row.
        let row = self.prices.row(self.t);
        self.cash = w[0] * value_before;
        for (n, p) in row.iter().enumerate() {
            self.holdings[n] = w[n + 1] * value_before / p;
        }
        self.t += 1;
        self.cash *= 1.0 + self.risk_free;
        let value_after = self.value();

        Ok(StepOutcome {
            state: self.observation(),
            reward: value_after - value_before,
            done: self.t + 1 == self.prices.rows(),
        })
    }
}
