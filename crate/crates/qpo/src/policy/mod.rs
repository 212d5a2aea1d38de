//! Stochastic policies over MLP features.
//!
//! A policy maps an observation to a distribution over actions and exposes
//! exactly what the algorithms need: sampling (with the log-density of the
//! drawn action), log-density of an arbitrary action, and the gradient of
//! that log-density with respect to the flat parameters. Sampling and
//! densities share one code path so a stored log-probability always equals a
//! recomputation under the same parameters, bit for bit.

mod head;
mod network;

use rand::RngCore;

use crate::autodiff::Gradient;
use crate::error::Result;

pub use head::Head;
pub use network::PolicyNetwork;

pub(crate) use head::sigmoid;

/// An action as emitted by a policy head.
///
/// Simplex-head policies emit `Continuous` pre-softmax logits; the
/// environment applies the softmax. Densities for those policies are
/// log-densities in logit space.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Action {
    Discrete(usize),
    Continuous(Vec<f64>),
}

/// A sampled action together with its log-density under the sampling policy.
#[derive(Clone, Debug)]
pub struct ActionSample {
    pub action: Action,
    pub log_prob: f64,
}

/// The differentiable-policy contract shared by the MLP network and the
/// analytic bandit used in convergence tests.
pub trait Policy {
    /// Observation width the policy expects.
    fn obs_dim(&self) -> usize;

    /// Flat parameter view.
    fn params(&self) -> &[f64];

    /// Mutable flat parameter view. Callers that write through this are
    /// responsible for re-validating finiteness.
    fn params_mut(&mut self) -> &mut [f64];

    /// Draws an action and returns it with its log-density.
    fn sample(&self, state: &[f64], rng: &mut dyn RngCore) -> Result<ActionSample>;

    /// Log-density of `action` at `state` under the current parameters.
    fn log_prob(&self, state: &[f64], action: &Action) -> Result<f64>;

    /// Gradient of [`Policy::log_prob`] with respect to the flat parameters.
    fn grad_log_prob(&self, state: &[f64], action: &Action) -> Result<Gradient>;
}
