//! Importance ratios and the clipped surrogate objective.

use crate::autodiff::Gradient;
use crate::env::Trajectory;
use crate::error::{Error, Result};
use crate::policy::Policy;

use super::baseline::BaselineNet;

/// Per-step and whole-trajectory importance ratios of `target` against the
/// behavior policy that generated `traj` (whose log-probs are stored on the
/// trajectory).
///
/// The trajectory ratio is the product of per-step ratios, computed in log
/// space. Its log is clamped to +-700 so an extreme but finite ratio reaches
/// the downstream clip instead of overflowing. A non-finite per-step ratio
/// (NaN log-probs, or the behavior density vanishing at a taken action) is
/// an error naming the step.
pub fn importance_ratio<P>(traj: &Trajectory, target: &P) -> Result<(Vec<f64>, f64)>
where
    P: Policy + ?Sized,
{
    let mut per_step = Vec::with_capacity(traj.steps.len());
    let mut log_sum = 0.0;
    for (t, step) in traj.steps.iter().enumerate() {
        let lp = target
            .log_prob(&step.state, &step.action)
            .map_err(|e| Error::at_step(t, e))?;
        let delta = lp - step.log_prob;
        let rho = delta.exp();
        if !rho.is_finite() {
            return Err(Error::NonFiniteRatio { step: t });
        }
        per_step.push(rho);
        log_sum += delta;
    }
    let product = log_sum.clamp(-700.0, 700.0).exp();
    if !product.is_finite() {
        return Err(Error::NonFiniteRatio {
            step: traj.steps.len().saturating_sub(1),
        });
    }
    Ok((per_step, product))
}

/// One term of the clipped surrogate: value and its derivative in `rho`.
///
/// `min{rho * adv, clip(rho, 1 - eps, 1 + eps) * adv}` evaluated literally.
/// Ties resolve to the unclipped branch so the gradient flows whenever the
/// unclipped branch attains the min; when the clipped branch is strictly
/// smaller, `rho` sits outside the clip interval and the derivative is zero.
pub fn clipped_term(rho: f64, adv: f64, eps: f64) -> (f64, f64) {
    let clipped = rho.clamp(1.0 - eps, 1.0 + eps);
    let unclipped_value = rho * adv;
    let clipped_value = clipped * adv;
    if unclipped_value <= clipped_value {
        (unclipped_value, adv)
    } else {
        (clipped_value, 0.0)
    }
}

/// Clipped surrogate objective and its gradient at `target`.
///
/// `base_advantage[e]` is the per-trajectory advantage core (for QPPO,
/// `-1{U <= q}`; for PPO, the return); when a baseline net is supplied its
/// state value is subtracted per step. The objective is the mean over
/// trajectories of the per-trajectory sum over steps of
/// `min{rho_t A_t, clip(rho_t) A_t}` with per-step ratios `rho_t`.
pub fn clipped_surrogate<P>(
    batch: &[Trajectory],
    target: &P,
    base_advantage: &[f64],
    eps: f64,
    baseline: Option<&BaselineNet>,
) -> Result<(f64, Gradient)>
where
    P: Policy + ?Sized,
{
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if base_advantage.len() != batch.len() {
        return Err(Error::ShapeMismatch {
            what: "base advantages",
            expected: batch.len(),
            got: base_advantage.len(),
        });
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::config(format!(
            "clip epsilon must lie in (0, 1), got {eps}"
        )));
    }

    let n = batch.len() as f64;
    let mut objective = 0.0;
    let mut grad = Gradient::zeros(target.params().len());
    for (traj, &base) in batch.iter().zip(base_advantage) {
        for (t, step) in traj.steps.iter().enumerate() {
            let lp = target
                .log_prob(&step.state, &step.action)
                .map_err(|e| Error::at_step(t, e))?;
            let rho = (lp - step.log_prob).exp();
            if !rho.is_finite() {
                return Err(Error::NonFiniteRatio { step: t });
            }
            let adv = match baseline {
                Some(b) => base - b.value(&step.state).map_err(|e| Error::at_step(t, e))?,
                None => base,
            };
            let (term, coef) = clipped_term(rho, adv, eps);
            objective += term;
            if coef != 0.0 {
                // d(rho)/d(theta) = rho * grad log pi.
                let g = target
                    .grad_log_prob(&step.state, &step.action)
                    .map_err(|e| Error::at_step(t, e))?;
                grad.add_scaled(&g, coef * rho)?;
            }
        }
    }
    objective /= n;
    grad.scale(1.0 / n);
    Ok((objective, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit::{BanditEnv, BanditPolicy};
    use crate::env::rollout;
    use crate::policy::{Action, Head, PolicyNetwork};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Two-class policy with zero weights and logit biases (0, b):
    /// pi(1) = sigmoid(b).
    fn biased_coin(b: f64) -> PolicyNetwork {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net =
            PolicyNetwork::new(1, &[], Head::Categorical { k: 2 }, &mut rng).unwrap();
        for v in net.params_mut().iter_mut() {
            *v = 0.0;
        }
        let n = net.params().len();
        net.params_mut()[n - 1] = b;
        net
    }

    #[test]
    fn identical_policies_give_unit_ratios_exactly() {
        let policy = BanditPolicy::new(1.2, 0.0);
        let mut env = BanditEnv;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let traj = rollout(&mut env, &policy, &mut rng).unwrap();
            let (steps, product) = importance_ratio(&traj, &policy).unwrap();
            assert!(steps.iter().all(|&r| r == 1.0));
            assert_eq!(product, 1.0);
        }
    }

    #[test]
    fn single_step_categorical_ratio_is_p_over_q() {
        use crate::env::Step;
        use crate::env::Trajectory;
        let behavior = biased_coin(0.0); // pi(1) = 1/2
        let target = biased_coin(3f64.ln()); // pi(1) = 3/4
        let state = vec![0.0];
        let action = Action::Discrete(1);
        let traj = Trajectory {
            steps: vec![Step {
                state: state.clone(),
                log_prob: behavior.log_prob(&state, &action).unwrap(),
                action,
                reward: 0.0,
            }],
            discounted_return: 0.0,
        };
        let (steps, product) = importance_ratio(&traj, &target).unwrap();
        assert!((steps[0] - 1.5).abs() < 1e-12);
        assert!((product - 1.5).abs() < 1e-12);
    }

    #[test]
    fn importance_weighting_is_unbiased_monte_carlo() {
        // E_behavior[rho * 1{a=1}] should equal P_target(a=1).
        let behavior = biased_coin(0.0);
        let target = biased_coin(-1.0);
        let p_target = crate::policy::sigmoid(-1.0);
        let state = [0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 20_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let s = behavior.sample(&state, &mut rng).unwrap();
            if s.action == Action::Discrete(1) {
                let lp = target.log_prob(&state, &s.action).unwrap();
                acc += (lp - s.log_prob).exp();
            }
        }
        let estimate = acc / n as f64;
        // rho*indicator is bounded by 2 here; 3 sigma with a crude variance bound.
        let se = (0.5f64 / n as f64).sqrt();
        assert!(
            (estimate - p_target).abs() < 3.0 * se,
            "{estimate} vs {p_target}"
        );
    }

    #[test]
    fn clipped_term_agrees_with_brute_force_min_everywhere() {
        let eps_grid = [0.1, 0.2, 0.3];
        let adv_grid = [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0];
        for eps in eps_grid {
            for adv in adv_grid {
                let mut rho = 0.0;
                while rho <= 2.5 {
                    let (term, coef) = clipped_term(rho, adv, eps);
                    let brute = (rho * adv).min(rho.clamp(1.0 - eps, 1.0 + eps) * adv);
                    assert_eq!(term, brute, "rho={rho} adv={adv} eps={eps}");
                    // Gradient only flows when the unclipped branch attains the min.
                    if coef != 0.0 {
                        assert_eq!(coef, adv);
                        assert!(rho * adv <= rho.clamp(1.0 - eps, 1.0 + eps) * adv);
                    }
                    rho += 0.01;
                }
            }
        }
    }

    #[test]
    fn clip_branch_selection_truth_table() {
        let eps = 0.2;
        // rho inside the clip interval: branches coincide, gradient flows.
        assert_eq!(clipped_term(1.0, -1.0, eps), (-1.0, -1.0));
        assert_eq!(clipped_term(1.1, 2.0, eps), (2.2, 2.0));
        // Positive advantage, rho above 1+eps: clipped branch caps the value.
        assert_eq!(clipped_term(2.0, 1.0, eps), (1.2, 0.0));
        // Positive advantage, rho below 1-eps: unclipped branch is smaller.
        assert_eq!(clipped_term(0.5, 1.0, eps), (0.5, 1.0));
        // Negative advantage, rho above 1+eps: unclipped branch is smaller.
        assert_eq!(clipped_term(2.0, -1.0, eps), (-2.0, -1.0));
        // Negative advantage, rho below 1-eps: the *clipped* branch is smaller.
        assert_eq!(clipped_term(0.5, -1.0, eps), (-0.8, 0.0));
        // Zero advantage: both branches zero, tie goes to unclipped.
        assert_eq!(clipped_term(2.0, 0.0, eps), (0.0, 0.0));
    }

    #[test]
    fn on_policy_surrogate_value_is_mean_base_advantage_for_single_steps() {
        let policy = BanditPolicy::new(0.8, 0.0);
        let mut env = BanditEnv;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let batch: Vec<_> = (0..6)
            .map(|_| rollout(&mut env, &policy, &mut rng).unwrap())
            .collect();
        let base = [-1.0, 0.0, -1.0, 0.0, 0.0, -1.0];
        let (obj, _) = clipped_surrogate(&batch, &policy, &base, 0.2, None).unwrap();
        let want = base.iter().sum::<f64>() / 6.0;
        assert_eq!(obj, want);
    }

    #[test]
    fn surrogate_validates_inputs() {
        let policy = BanditPolicy::new(0.0, 0.0);
        assert!(matches!(
            clipped_surrogate(&[], &policy, &[], 0.2, None),
            Err(Error::EmptyBatch)
        ));
        let mut env = BanditEnv;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let batch = vec![rollout(&mut env, &policy, &mut rng).unwrap()];
        assert!(clipped_surrogate(&batch, &policy, &[1.0, 2.0], 0.2, None).is_err());
        assert!(clipped_surrogate(&batch, &policy, &[1.0], 0.0, None).is_err());
        assert!(clipped_surrogate(&batch, &policy, &[1.0], 1.0, None).is_err());
    }
}
