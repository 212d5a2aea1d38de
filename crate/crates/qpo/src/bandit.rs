//! One-parameter analytic benchmark for the two-timescale recursions.
//!
//! The policy is `a ~ N(mu(theta), 1)` with `mu(theta) = -(theta - center)^2`
//! and a single scalar parameter; the environment is a single-step episode
//! whose reward is the action itself. Everything is known in closed form:
//!
//! * return distribution: `U ~ N(-(theta - center)^2, 1)`;
//! * every quantile and the mean are maximized at `theta = center`;
//! * the optimal `alpha`-quantile is `z_alpha`, the standard normal quantile;
//! * the score is `d log pi / d theta = (a - mu) * (-2 (theta - center))`.
//!
//! That makes it a sharp end-to-end test: the tracker must find
//! `-(theta - center)^2 + z_alpha` while the policy ascent drives `theta`
//! to `center`, and both mean- and quantile-criterion methods must agree on
//! the optimizer.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::autodiff::Gradient;
use crate::env::{ActionSpace, Environment, StepOutcome};
use crate::error::{Error, Result};
use crate::policy::{Action, ActionSample, Policy};

const LN_2PI: f64 = 1.8378770664093453;

/// Gaussian policy with mean `-(theta - center)^2` and unit standard
/// deviation, parameterized by the scalar `theta`.
#[derive(Clone, Debug)]
pub struct BanditPolicy {
    theta: [f64; 1],
    center: f64,
}

impl BanditPolicy {
    pub fn new(theta0: f64, center: f64) -> Self {
        BanditPolicy {
            theta: [theta0],
            center,
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta[0]
    }

    pub fn mean(&self) -> f64 {
        let d = self.theta[0] - self.center;
        -(d * d)
    }
}

impl Policy for BanditPolicy {
    fn obs_dim(&self) -> usize {
        0
    }

    fn params(&self) -> &[f64] {
        &self.theta
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    fn sample(&self, _state: &[f64], rng: &mut dyn RngCore) -> Result<ActionSample> {
        let xi: f64 = StandardNormal.sample(rng);
        let a = self.mean() + xi;
        let action = Action::Continuous(vec![a]);
        let log_prob = self.log_prob(&[], &action)?;
        Ok(ActionSample { action, log_prob })
    }

    fn log_prob(&self, _state: &[f64], action: &Action) -> Result<f64> {
        let a = scalar_action(action)?;
        let z = a - self.mean();
        Ok(-0.5 * z * z - 0.5 * LN_2PI)
    }

    fn grad_log_prob(&self, _state: &[f64], action: &Action) -> Result<Gradient> {
        let a = scalar_action(action)?;
        let d = self.theta[0] - self.center;
        let score = (a - self.mean()) * (-2.0 * d);
        Ok(Gradient::from_values(vec![score]))
    }
}

fn scalar_action(action: &Action) -> Result<f64> {
    match action {
        Action::Continuous(v) if v.len() == 1 && v[0].is_finite() => Ok(v[0]),
        _ => Err(Error::InvalidAction {
            reason: "bandit takes a finite 1-d continuous action".into(),
        }),
    }
}

/// Single-step environment whose reward is the action value.
#[derive(Clone, Copy, Debug, Default)]
pub struct BanditEnv;

impl Environment for BanditEnv {
    fn obs_dim(&self) -> usize {
        0
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Continuous(1)
    }

    fn horizon(&self) -> usize {
        1
    }

    fn discount(&self) -> f64 {
        1.0
    }

    fn reset(&mut self, _rng: &mut dyn RngCore) -> Vec<f64> {
        Vec::new()
    }

    fn step(&mut self, action: &Action, _rng: &mut dyn RngCore) -> Result<StepOutcome> {
        let a = scalar_action(action)?;
        Ok(StepOutcome {
            state: Vec::new(),
            reward: a,
            done: true,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::finite_diff;
    use crate::autodiff::{BlockSpec, ParamLayout, ParamVector};
    use crate::env::rollout;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn return_is_the_sampled_action() {
        let policy = BanditPolicy::new(1.5, 0.0);
        let mut env = BanditEnv;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let traj = rollout(&mut env, &policy, &mut rng).unwrap();
        assert_eq!(traj.horizon(), 1);
        match &traj.steps[0].action {
            Action::Continuous(v) => assert_eq!(traj.discounted_return, v[0]),
            _ => panic!(),
        }
    }

    #[test]
    fn score_matches_finite_differences() {
        let center = 0.7;
        for theta in [-1.2, 0.4, 1.5] {
            let policy = BanditPolicy::new(theta, center);
            let action = Action::Continuous(vec![0.3]);
            let g = policy.grad_log_prob(&[], &action).unwrap();

            let layout = ParamLayout::new(vec![BlockSpec::vector("theta", 1, 1)]);
            let params = ParamVector::from_values(layout, vec![theta]).unwrap();
            let fd = finite_diff(
                |p| {
                    BanditPolicy::new(p.values()[0], center)
                        .log_prob(&[], &action)
                        .unwrap()
                },
                &params,
                1e-6,
            )
            .unwrap();
            assert!(
                (g.values()[0] - fd.values()[0]).abs() < 1e-6,
                "theta {theta}: {} vs {}",
                g.values()[0],
                fd.values()[0]
            );
        }
    }

    #[test]
    fn sample_log_prob_is_consistent() {
        let policy = BanditPolicy::new(0.9, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let s = policy.sample(&[], &mut rng).unwrap();
            assert_eq!(
                s.log_prob.to_bits(),
                policy.log_prob(&[], &s.action).unwrap().to_bits()
            );
        }
    }
}
