//! Episodic environments and trajectory collection.
//!
//! Environments are finite-horizon and seeded: every stochastic draw goes
//! through the caller's RNG, so a (config, seed) pair pins an episode down
//! exactly. [`rollout`] runs one episode under a policy and records states,
//! raw policy actions, their log-probabilities, and rewards.
//!
//! Policies emit actions in their own coordinates; [`rollout`] converts them
//! to environment coordinates per the action space (softmax for
//! [`ActionSpace::Simplex`]) before stepping, while the trajectory stores the
//! raw policy action so densities can be recomputed later.

mod trading;
mod zero_mean;

pub mod prices;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::policy::{Action, Policy};

pub use trading::TradingEnv;
pub use zero_mean::ZeroMeanEnv;

/// Action coordinates an environment accepts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ActionSpace {
    /// Integer in `0..n`.
    Discrete(usize),
    /// Unconstrained vector of the given dimension.
    Continuous(usize),
    /// Probability vector of the given dimension (sums to one). Policies emit
    /// logits; [`rollout`] applies the softmax.
    Simplex(usize),
}

/// Result of one environment step.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// Finite-horizon seeded environment.
pub trait Environment {
    fn obs_dim(&self) -> usize;
    fn action_space(&self) -> ActionSpace;
    /// Steps per episode.
    fn horizon(&self) -> usize;
    /// Discount factor applied when accumulating returns.
    fn discount(&self) -> f64;
    /// Starts a fresh episode and returns the initial observation.
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64>;
    /// Advances one step. `action` is in environment coordinates.
    fn step(&mut self, action: &Action, rng: &mut dyn RngCore) -> Result<StepOutcome>;
}

/// One transition as recorded during a rollout. `action` is the raw policy
/// action (pre-softmax logits for simplex environments); `log_prob` is its
/// log-density under the sampling policy.
#[derive(Clone, Debug)]
pub struct Step {
    pub state: Vec<f64>,
    pub action: Action,
    pub log_prob: f64,
    pub reward: f64,
}

/// A complete episode.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    /// Discounted return under the environment's discount factor.
    pub discounted_return: f64,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    /// Recomputes the discounted return from stored rewards.
    pub fn return_with_discount(&self, discount: f64) -> f64 {
        let mut acc = 0.0;
        let mut d = 1.0;
        for s in &self.steps {
            acc += d * s.reward;
            d *= discount;
        }
        acc
    }
}

/// Maps a raw policy action into environment coordinates and validates it.
pub fn to_env_action(action: &Action, space: &ActionSpace) -> Result<Action> {
    match (action, space) {
        (Action::Discrete(i), ActionSpace::Discrete(n)) => {
            if i < n {
                Ok(Action::Discrete(*i))
            } else {
                Err(Error::InvalidAction {
                    reason: format!("discrete action {i} out of range 0..{n}"),
                })
            }
        }
        (Action::Continuous(v), ActionSpace::Continuous(d)) => {
            if v.len() != *d {
                return Err(Error::InvalidAction {
                    reason: format!("continuous action dim {} != {d}", v.len()),
                });
            }
            Ok(Action::Continuous(v.clone()))
        }
        (Action::Continuous(z), ActionSpace::Simplex(d)) => {
            if z.len() != *d {
                return Err(Error::InvalidAction {
                    reason: format!("simplex logits dim {} != {d}", z.len()),
                });
            }
            Ok(Action::Continuous(softmax(z)))
        }
        _ => Err(Error::InvalidAction {
            reason: "action kind does not match action space".into(),
        }),
    }
}

pub(crate) fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Runs one episode of `policy` in `env`.
///
/// Errors from sampling or stepping carry the step index they occurred at.
pub fn rollout<E, P>(env: &mut E, policy: &P, rng: &mut dyn RngCore) -> Result<Trajectory>
where
    E: Environment + ?Sized,
    P: Policy + ?Sized,
{
    let mut state = env.reset(rng);
    if state.len() != policy.obs_dim() {
        return Err(Error::ShapeMismatch {
            what: "observation",
            expected: policy.obs_dim(),
            got: state.len(),
        });
    }
    let space = env.action_space();
    let discount = env.discount();
    let mut steps = Vec::with_capacity(env.horizon());
    let mut acc = 0.0;
    let mut d = 1.0;
    loop {
        let t = steps.len();
        let sample = policy
            .sample(&state, rng)
            .map_err(|e| Error::at_step(t, e))?;
        let env_action = to_env_action(&sample.action, &space).map_err(|e| Error::at_step(t, e))?;
        let outcome = env
            .step(&env_action, rng)
            .map_err(|e| Error::at_step(t, e))?;
        acc += d * outcome.reward;
        d *= discount;
        steps.push(Step {
            state: std::mem::replace(&mut state, outcome.state),
            action: sample.action,
            log_prob: sample.log_prob,
            reward: outcome.reward,
        });
        if outcome.done {
            break;
        }
    }
    Ok(Trajectory {
        steps,
        discounted_return: acc,
    })
}
