//! MLP policy: tanh feature network feeding a distribution head.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::head::Head;
use super::{Action, ActionSample, Policy};
use crate::autodiff::{backward, forward, Gradient, MlpSpec, ParamVector};
use crate::error::{Error, Result};

/// Feed-forward stochastic policy.
///
/// The network output width is dictated by the head
/// ([`Head::required_outputs`]); construction wires that up and seeds the
/// parameters uniformly in `±1/sqrt(fan_in)` per layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyNetwork {
    spec: MlpSpec,
    head: Head,
    params: ParamVector,
}

impl PolicyNetwork {
    pub fn new(obs_dim: usize, hidden: &[usize], head: Head, rng: &mut dyn RngCore) -> Result<Self> {
        head.validate()?;
        let spec = MlpSpec::new(obs_dim, hidden, head.required_outputs())?;
        let params = spec.init_params(rng);
        Ok(PolicyNetwork { spec, head, params })
    }

    /// Rebuilds a policy from its serialized parts, re-checking invariants.
    pub fn from_parts(spec: MlpSpec, head: Head, params: ParamVector) -> Result<Self> {
        head.validate()?;
        if spec.output_dim() != head.required_outputs() {
            return Err(Error::ShapeMismatch {
                what: "head outputs",
                expected: head.required_outputs(),
                got: spec.output_dim(),
            });
        }
        if params.len() != spec.param_len() {
            return Err(Error::ShapeMismatch {
                what: "policy parameters",
                expected: spec.param_len(),
                got: params.len(),
            });
        }
        params.check_finite()?;
        Ok(PolicyNetwork { spec, head, params })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn param_vector(&self) -> &ParamVector {
        &self.params
    }

    fn net_out(&self, state: &[f64]) -> Result<(Vec<f64>, crate::autodiff::Tape)> {
        let (out, tape) = forward(&self.params, &self.spec, state)?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::non_finite(format!(
                "network output at state {state:?}"
            )));
        }
        Ok((out, tape))
    }
}

impl Policy for PolicyNetwork {
    fn obs_dim(&self) -> usize {
        self.spec.input_dim()
    }

    fn params(&self) -> &[f64] {
        self.params.values()
    }

    fn params_mut(&mut self) -> &mut [f64] {
        self.params.values_mut()
    }

    fn sample(&self, state: &[f64], rng: &mut dyn RngCore) -> Result<ActionSample> {
        let (out, _) = self.net_out(state)?;
        let (action, log_prob) = self.head.sample(&out, rng)?;
        Ok(ActionSample { action, log_prob })
    }

    fn log_prob(&self, state: &[f64], action: &Action) -> Result<f64> {
        let (out, _) = self.net_out(state)?;
        self.head.log_prob(&out, action)
    }

    fn grad_log_prob(&self, state: &[f64], action: &Action) -> Result<Gradient> {
        let (out, tape) = self.net_out(state)?;
        let seed = self.head.log_prob_seed(&out, action)?;
        backward(&self.params, &tape, &seed)
    }
}
