//! Distribution heads over the network's linear outputs.
//!
//! Every head consumes the raw output vector of the MLP and defines a
//! distribution, its log-density, and the seed `d log p / d out` that
//! [`backward`] turns into a parameter gradient.
//!
//! [`backward`]: crate::autodiff::backward

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Action;
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.8378770664093453;

/// Distribution family on top of the network outputs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Head {
    /// `k` logits, softmax categorical over `0..k`.
    Categorical { k: usize },
    /// `dim` means then `dim` raw std outputs; std = softplus(raw) + min_std.
    Gaussian { dim: usize, min_std: f64 },
    /// Gaussian in logit space; the environment softmaxes the emitted logits.
    /// Log-densities are with respect to the logit vector.
    Simplex { dim: usize, min_std: f64 },
}

impl Head {
    /// Width of the network output this head consumes.
    pub fn required_outputs(&self) -> usize {
        match *self {
            Head::Categorical { k } => k,
            Head::Gaussian { dim, .. } | Head::Simplex { dim, .. } => 2 * dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Head::Categorical { k } => {
                if k < 2 {
                    return Err(Error::config("categorical head needs k >= 2"));
                }
            }
            Head::Gaussian { dim, min_std } | Head::Simplex { dim, min_std } => {
                if dim == 0 {
                    return Err(Error::config("continuous head needs dim >= 1"));
                }
                if !(min_std > 0.0) || !min_std.is_finite() {
                    return Err(Error::config("min_std must be positive and finite"));
                }
            }
        }
        Ok(())
    }

    pub fn sample(&self, out: &[f64], rng: &mut dyn RngCore) -> Result<(Action, f64)> {
        match *self {
            Head::Categorical { k } => {
                let logp = log_softmax(out);
                // Inverse CDF over the fixed category order 0..k.
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut chosen = k - 1;
                for (i, lp) in logp.iter().enumerate() {
                    acc += lp.exp();
                    if u < acc {
                        chosen = i;
                        break;
                    }
                }
                Ok((Action::Discrete(chosen), logp[chosen]))
            }
            Head::Gaussian { dim, min_std } | Head::Simplex { dim, min_std } => {
                let mut a = Vec::with_capacity(dim);
                for i in 0..dim {
                    let std = softplus(out[dim + i]) + min_std;
                    let xi: f64 = StandardNormal.sample(rng);
                    a.push(out[i] + std * xi);
                }
                let lp = gaussian_log_prob(out, &a, min_std);
                Ok((Action::Continuous(a), lp))
            }
        }
    }

    pub fn log_prob(&self, out: &[f64], action: &Action) -> Result<f64> {
        match (*self, action) {
            (Head::Categorical { k }, Action::Discrete(i)) => {
                if *i >= k {
                    return Err(Error::InvalidAction {
                        reason: format!("category {i} out of range 0..{k}"),
                    });
                }
                Ok(log_softmax(out)[*i])
            }
            (
                Head::Gaussian { dim, min_std } | Head::Simplex { dim, min_std },
                Action::Continuous(a),
            ) => {
                if a.len() != dim {
                    return Err(Error::InvalidAction {
                        reason: format!("action dim {} != head dim {dim}", a.len()),
                    });
                }
                if a.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidAction {
                        reason: "non-finite action component".into(),
                    });
                }
                Ok(gaussian_log_prob(out, a, min_std))
            }
            _ => Err(Error::InvalidAction {
                reason: "action kind does not match head".into(),
            }),
        }
    }

    /// Seed `d log p(action) / d out` for the backward pass.
    pub fn log_prob_seed(&self, out: &[f64], action: &Action) -> Result<Vec<f64>> {
        match (*self, action) {
            (Head::Categorical { k }, Action::Discrete(i)) => {
                if *i >= k {
                    return Err(Error::InvalidAction {
                        reason: format!("category {i} out of range 0..{k}"),
                    });
                }
                // d log softmax(z)_i / d z_j = 1{i=j} - p_j.
                let mut seed: Vec<f64> = log_softmax(out).iter().map(|lp| -lp.exp()).collect();
                seed[*i] += 1.0;
                Ok(seed)
            }
            (
                Head::Gaussian { dim, min_std } | Head::Simplex { dim, min_std },
                Action::Continuous(a),
            ) => {
                if a.len() != dim {
                    return Err(Error::InvalidAction {
                        reason: format!("action dim {} != head dim {dim}", a.len()),
                    });
                }
                let mut seed = vec![0.0; 2 * dim];
                for i in 0..dim {
                    let raw = out[dim + i];
                    let std = softplus(raw) + min_std;
                    let z = (a[i] - out[i]) / std;
                    // d logp / d mean and, via softplus' = sigmoid, d logp / d raw.
                    seed[i] = z / std;
                    seed[dim + i] = ((z * z - 1.0) / std) * sigmoid(raw);
                }
                Ok(seed)
            }
            _ => Err(Error::InvalidAction {
                reason: "action kind does not match head".into(),
            }),
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    // ln(1 + e^x), stable across the whole line.
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

fn gaussian_log_prob(out: &[f64], a: &[f64], min_std: f64) -> f64 {
    let dim = a.len();
    let mut lp = 0.0;
    for i in 0..dim {
        let std = softplus(out[dim + i]) + min_std;
        let z = (a[i] - out[i]) / std;
        lp += -0.5 * z * z - std.ln() - 0.5 * LN_2PI;
    }
    lp
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_categorical_log_prob_is_minus_ln_k() {
        let head = Head::Categorical { k: 4 };
        let out = [0.0; 4];
        for i in 0..4 {
            let lp = head.log_prob(&out, &Action::Discrete(i)).unwrap();
            assert!((lp - (-(4f64).ln())).abs() < 1e-12);
        }
    }

    #[test]
    fn categorical_rejects_out_of_range() {
        let head = Head::Categorical { k: 3 };
        assert!(matches!(
            head.log_prob(&[0.0; 3], &Action::Discrete(3)),
            Err(Error::InvalidAction { .. })
        ));
        assert!(matches!(
            head.log_prob(&[0.0; 3], &Action::Continuous(vec![0.0])),
            Err(Error::InvalidAction { .. })
        ));
    }

    #[test]
    fn categorical_sampling_frequencies_match_probabilities() {
        let head = Head::Categorical { k: 3 };
        let out = [1.0, 0.0, -1.0];
        let probs: Vec<f64> = {
            let lp = log_softmax(&out);
            lp.iter().map(|l| l.exp()).collect()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 100_000usize;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            match head.sample(&out, &mut rng).unwrap().0 {
                Action::Discrete(i) => counts[i] += 1,
                _ => unreachable!(),
            }
        }
        for i in 0..3 {
            let freq = counts[i] as f64 / n as f64;
            let se = (probs[i] * (1.0 - probs[i]) / n as f64).sqrt();
            assert!(
                (freq - probs[i]).abs() < 3.0 * se + 1e-9,
                "category {i}: freq {freq} vs p {}",
                probs[i]
            );
        }
    }

    #[test]
    fn gaussian_log_prob_at_mean_matches_closed_form() {
        let head = Head::Gaussian {
            dim: 1,
            min_std: 0.01,
        };
        // raw std output 0 => std = ln(2) + 0.01.
        let std = 2f64.ln() + 0.01;
        let out = [0.7, 0.0];
        let lp = head
            .log_prob(&out, &Action::Continuous(vec![0.7]))
            .unwrap();
        let want = -std.ln() - 0.5 * LN_2PI;
        assert!((lp - want).abs() < 1e-12);
    }

    #[test]
    fn gaussian_density_normalizes_on_a_grid() {
        let head = Head::Gaussian {
            dim: 1,
            min_std: 0.01,
        };
        let out = [0.3, -0.2];
        // Trapezoid rule over +-10 std around the mean.
        let std = softplus(-0.2) + 0.01;
        let (lo, hi) = (0.3 - 10.0 * std, 0.3 + 10.0 * std);
        let n = 20_000;
        let dx = (hi - lo) / n as f64;
        let mut mass = 0.0;
        for i in 0..=n {
            let a = lo + i as f64 * dx;
            let p = head
                .log_prob(&out, &Action::Continuous(vec![a]))
                .unwrap()
                .exp();
            mass += if i == 0 || i == n { 0.5 * p } else { p };
        }
        mass *= dx;
        assert!((mass - 1.0).abs() < 1e-3, "mass {mass}");
    }

    #[test]
    fn gaussian_sample_mean_and_std_match_head() {
        let head = Head::Gaussian {
            dim: 2,
            min_std: 0.01,
        };
        let out = [1.0, -2.0, 0.5, -1.0];
        let stds = [softplus(0.5) + 0.01, softplus(-1.0) + 0.01];
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 100_000usize;
        let mut sum = [0.0f64; 2];
        let mut sumsq = [0.0f64; 2];
        for _ in 0..n {
            match head.sample(&out, &mut rng).unwrap().0 {
                Action::Continuous(a) => {
                    for i in 0..2 {
                        sum[i] += a[i];
                        sumsq[i] += a[i] * a[i];
                    }
                }
                _ => unreachable!(),
            }
        }
        for i in 0..2 {
            let mean = sum[i] / n as f64;
            let var = sumsq[i] / n as f64 - mean * mean;
            let se_mean = stds[i] / (n as f64).sqrt();
            assert!((mean - out[i]).abs() < 4.0 * se_mean);
            assert!((var.sqrt() - stds[i]).abs() / stds[i] < 0.02);
        }
    }

    #[test]
    fn sampled_log_prob_equals_recomputation_bit_for_bit() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for head in [
            Head::Categorical { k: 5 },
            Head::Gaussian {
                dim: 3,
                min_std: 0.01,
            },
            Head::Simplex {
                dim: 4,
                min_std: 0.01,
            },
        ] {
            let out: Vec<f64> = (0..head.required_outputs())
                .map(|_| rng.gen_range(-1.5..1.5))
                .collect();
            for _ in 0..50 {
                let (a, lp) = head.sample(&out, &mut rng).unwrap();
                let re = head.log_prob(&out, &a).unwrap();
                assert_eq!(lp.to_bits(), re.to_bits());
            }
        }
    }

    #[test]
    fn min_std_floors_the_scale() {
        let head = Head::Gaussian {
            dim: 1,
            min_std: 0.01,
        };
        // Hugely negative raw std: softplus underflows to 0, std == min_std.
        let out = [0.0, -1000.0];
        let lp = head
            .log_prob(&out, &Action::Continuous(vec![0.0]))
            .unwrap();
        let want = -(0.01f64).ln() - 0.5 * LN_2PI;
        assert!((lp - want).abs() < 1e-12);
    }

    #[test]
    fn continuous_head_rejects_bad_actions() {
        let head = Head::Gaussian {
            dim: 2,
            min_std: 0.01,
        };
        let out = [0.0; 4];
        assert!(head
            .log_prob(&out, &Action::Continuous(vec![0.0]))
            .is_err());
        assert!(head
            .log_prob(&out, &Action::Continuous(vec![f64::NAN, 0.0]))
            .is_err());
        assert!(head.log_prob(&out, &Action::Discrete(0)).is_err());
    }

    #[test]
    fn simplex_head_is_gaussian_in_logit_space() {
        let g = Head::Gaussian {
            dim: 3,
            min_std: 0.05,
        };
        let s = Head::Simplex {
            dim: 3,
            min_std: 0.05,
        };
        let out = [0.1, -0.4, 0.7, 0.0, 0.3, -0.3];
        let a = Action::Continuous(vec![0.2, 0.1, -0.5]);
        assert_eq!(
            g.log_prob(&out, &a).unwrap().to_bits(),
            s.log_prob(&out, &a).unwrap().to_bits()
        );
    }
}
