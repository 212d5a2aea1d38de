//! State-value baseline network.
//!
//! A scalar-output MLP trained by plain SGD on mean squared error against
//! per-trajectory targets (PPO: returns; QPPO: the negated indicator).
//! One [`BaselineNet::sgd_step`] call makes exactly one gradient step, in
//! keeping with the one-step-per-epoch structure of the proximal updates.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::autodiff::{backward, forward, Gradient, MlpSpec, ParamVector};
use crate::env::Trajectory;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineNet {
    spec: MlpSpec,
    params: ParamVector,
}

impl BaselineNet {
    pub fn new(obs_dim: usize, hidden: &[usize], rng: &mut dyn RngCore) -> Result<Self> {
        let spec = MlpSpec::new(obs_dim, hidden, 1)?;
        let params = spec.init_params(rng);
        Ok(BaselineNet { spec, params })
    }

    pub fn from_parts(spec: MlpSpec, params: ParamVector) -> Result<Self> {
        if spec.output_dim() != 1 {
            return Err(Error::config("baseline net must have one output"));
        }
        if params.len() != spec.param_len() {
            return Err(Error::ShapeMismatch {
                what: "baseline parameters",
                expected: spec.param_len(),
                got: params.len(),
            });
        }
        params.check_finite()?;
        Ok(BaselineNet { spec, params })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn param_vector(&self) -> &ParamVector {
        &self.params
    }

    /// Predicted value at a state.
    pub fn value(&self, state: &[f64]) -> Result<f64> {
        let (out, _) = forward(&self.params, &self.spec, state)?;
        if !out[0].is_finite() {
            return Err(Error::non_finite("baseline output"));
        }
        Ok(out[0])
    }

    /// One SGD step on `mean over all steps of (B(s) - target)^2`, where each
    /// trajectory's steps share that trajectory's target. Returns the
    /// pre-update loss.
    pub fn sgd_step(&mut self, batch: &[Trajectory], targets: &[f64], lr: f64) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if targets.len() != batch.len() {
            return Err(Error::ShapeMismatch {
                what: "baseline targets",
                expected: batch.len(),
                got: targets.len(),
            });
        }
        if !(lr > 0.0) || !lr.is_finite() {
            return Err(Error::config("baseline learning rate must be positive"));
        }
        let count: usize = batch.iter().map(|t| t.steps.len()).sum();
        if count == 0 {
            return Err(Error::EmptyBatch);
        }
        let scale = 1.0 / count as f64;
        let mut loss = 0.0;
        let mut grad = Gradient::zeros(self.params.len());
        for (traj, &y) in batch.iter().zip(targets) {
            for step in &traj.steps {
                let (out, tape) = forward(&self.params, &self.spec, &step.state)?;
                let resid = out[0] - y;
                if !resid.is_finite() {
                    return Err(Error::non_finite("baseline residual"));
                }
                loss += resid * resid * scale;
                let g = backward(&self.params, &tape, &[2.0 * resid * scale])?;
                grad.add_scaled(&g, 1.0)?;
            }
        }
        self.params.add_scaled(&grad, -lr)?;
        self.params.check_finite()?;
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Step;
    use crate::policy::Action;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_step_traj(state: Vec<f64>) -> Trajectory {
        Trajectory {
            steps: vec![Step {
                state,
                action: Action::Continuous(vec![0.0]),
                log_prob: 0.0,
                reward: 0.0,
            }],
            discounted_return: 0.0,
        }
    }

    #[test]
    fn constant_net_moves_toward_target_mean() {
        // Zero weights and zero states make the net a pure bias b; one step on
        // MSE moves b by -lr * 2 (b - mean(y)).
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = BaselineNet::new(1, &[], &mut rng).unwrap();
        for v in net.params.values_mut() {
            *v = 0.0;
        }
        let batch = vec![one_step_traj(vec![0.0]), one_step_traj(vec![0.0])];
        let targets = [1.0, 3.0];
        let lr = 0.25;
        let loss = net.sgd_step(&batch, &targets, lr).unwrap();
        // Pre-update loss: mean of (0-1)^2 and (0-3)^2 = 5.
        assert!((loss - 5.0).abs() < 1e-12);
        // b' = 0 - lr * mean(2 (0 - y)) = 0.25 * 2 * 2 = 1.0 toward the mean 2.
        let bias = net.params.values()[net.params.len() - 1];
        assert!((bias - 1.0).abs() < 1e-12);
    }

    #[test]
    fn repeated_steps_converge_to_the_mean_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut net = BaselineNet::new(2, &[8], &mut rng).unwrap();
        let batch = vec![
            one_step_traj(vec![0.3, -0.1]),
            one_step_traj(vec![0.3, -0.1]),
        ];
        let targets = [2.0, 2.0];
        for _ in 0..500 {
            net.sgd_step(&batch, &targets, 0.1).unwrap();
        }
        let v = net.value(&[0.3, -0.1]).unwrap();
        assert!((v - 2.0).abs() < 1e-3, "value {v}");
    }

    #[test]
    fn validates_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = BaselineNet::new(1, &[], &mut rng).unwrap();
        assert!(net.sgd_step(&[], &[], 0.1).is_err());
        let batch = vec![one_step_traj(vec![0.0])];
        assert!(net.sgd_step(&batch, &[1.0, 2.0], 0.1).is_err());
        assert!(net.sgd_step(&batch, &[1.0], 0.0).is_err());
    }
}
