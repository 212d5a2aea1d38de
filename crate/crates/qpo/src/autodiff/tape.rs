//! Wengert tape over affine layers and tanh.
//!
//! [`forward`] evaluates an MLP (`affine, tanh, affine, tanh, ..., affine`)
//! and records every intermediate vector. [`backward`] replays the tape in
//! reverse against a seed on the output node and accumulates the
//! seed-Jacobian product into a flat [`Gradient`]. The tape stores a checksum
//! of the parameters it was recorded with; replaying it after the parameters
//! changed is an error, not a silent wrong answer.

use serde::{Deserialize, Serialize};

use super::params::{BlockSpec, Gradient, ParamLayout, ParamVector};
use crate::error::{Error, Result};
use rand::RngCore;

/// Architecture of a multilayer perceptron: `sizes[0]` inputs, hidden widths,
/// then `sizes.last()` linear outputs. Hidden activations are tanh; the output
/// layer is affine with no activation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    sizes: Vec<usize>,
}

impl MlpSpec {
    pub fn new(input: usize, hidden: &[usize], output: usize) -> Result<Self> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input);
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::config("mlp layer widths must all be positive"));
        }
        Ok(MlpSpec { sizes })
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    /// Number of affine layers.
    pub fn layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Layer `l` contributes blocks `w{l}` (rows x cols) and `b{l}` at layout
    /// indices `2l` and `2l + 1`.
    pub fn layout(&self) -> ParamLayout {
        let mut blocks = Vec::with_capacity(2 * self.layers());
        for l in 0..self.layers() {
            let (rows, cols) = (self.sizes[l + 1], self.sizes[l]);
            blocks.push(BlockSpec::matrix(format!("w{l}"), rows, cols));
            blocks.push(BlockSpec::vector(format!("b{l}"), rows, cols));
        }
        ParamLayout::new(blocks)
    }

    pub fn param_len(&self) -> usize {
        (0..self.layers())
            .map(|l| self.sizes[l + 1] * (self.sizes[l] + 1))
            .sum()
    }

    pub fn init_params(&self, rng: &mut dyn RngCore) -> ParamVector {
        ParamVector::init_uniform(self.layout(), rng)
    }
}

#[derive(Clone, Debug)]
enum Op {
    /// Network input; no parents.
    Input,
    /// `W[layer] * nodes[input] + b[layer]`.
    Affine { layer: usize, input: usize },
    /// Elementwise tanh of `nodes[input]`.
    Tanh { input: usize },
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Vec<f64>,
}

/// Recorded forward pass. Valid only against the exact parameter values it
/// was recorded with (checked via checksum).
#[derive(Clone, Debug)]
pub struct Tape {
    nodes: Vec<Node>,
    checksum: u64,
}

impl Tape {
    /// Value of the output node.
    pub fn output(&self) -> &[f64] {
        &self.nodes.last().expect("tape has nodes").value
    }
}

fn affine(params: &ParamVector, layer: usize, x: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let w = params.block(2 * layer);
    let b = params.block(2 * layer + 1);
    let mut out = Vec::with_capacity(rows);
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = b[r];
        for (wi, xi) in row.iter().zip(x) {
            acc += wi * xi;
        }
        out.push(acc);
    }
    out
}

/// Evaluates the network and records the tape.
///
/// Returns the output vector and the tape; the output is also available as
/// [`Tape::output`]. Errors on input length or parameter shape mismatch.
pub fn forward(params: &ParamVector, spec: &MlpSpec, input: &[f64]) -> Result<(Vec<f64>, Tape)> {
    if input.len() != spec.input_dim() {
        return Err(Error::ShapeMismatch {
            what: "network input",
            expected: spec.input_dim(),
            got: input.len(),
        });
    }
    if params.len() != spec.param_len() {
        return Err(Error::ShapeMismatch {
            what: "network parameters",
            expected: spec.param_len(),
            got: params.len(),
        });
    }

    let mut nodes = Vec::with_capacity(2 * spec.layers());
    nodes.push(Node {
        op: Op::Input,
        value: input.to_vec(),
    });
    let mut cur = 0usize;
    for l in 0..spec.layers() {
        let (rows, cols) = (spec.sizes()[l + 1], spec.sizes()[l]);
        let value = affine(params, l, &nodes[cur].value, rows, cols);
        nodes.push(Node {
            op: Op::Affine { layer: l, input: cur },
            value,
        });
        cur = nodes.len() - 1;
        if l + 1 < spec.layers() {
            let value = nodes[cur].value.iter().map(|v| v.tanh()).collect();
            nodes.push(Node {
                op: Op::Tanh { input: cur },
                value,
            });
            cur = nodes.len() - 1;
        }
    }

    let tape = Tape {
        nodes,
        checksum: params.checksum(),
    };
    Ok((tape.output().to_vec(), tape))
}

/// Seed-Jacobian product: gradient of `seed . output` with respect to the flat
/// parameters, replaying `tape` in reverse.
///
/// Errors if the tape is stale (parameters changed since [`forward`]) or the
/// seed length does not match the output width.
pub fn backward(params: &ParamVector, tape: &Tape, seed: &[f64]) -> Result<Gradient> {
    if params.checksum() != tape.checksum {
        return Err(Error::StaleTape);
    }
    let out_len = tape.output().len();
    if seed.len() != out_len {
        return Err(Error::ShapeMismatch {
            what: "backward seed",
            expected: out_len,
            got: seed.len(),
        });
    }

    let mut grad = Gradient::zeros(params.len());
    let mut adjoints: Vec<Vec<f64>> = tape
        .nodes
        .iter()
        .map(|n| vec![0.0; n.value.len()])
        .collect();
    *adjoints.last_mut().unwrap() = seed.to_vec();

    let layout = params.layout();
    for idx in (0..tape.nodes.len()).rev() {
        match tape.nodes[idx].op {
            Op::Input => {}
            Op::Tanh { input } => {
                // d tanh(z) / dz = 1 - tanh(z)^2, with tanh(z) already on the tape.
                let (head, tail) = adjoints.split_at_mut(idx);
                let g = &tail[0];
                let y = &tape.nodes[idx].value;
                for (j, gy) in g.iter().enumerate() {
                    head[input][j] += gy * (1.0 - y[j] * y[j]);
                }
            }
            Op::Affine { layer, input } => {
                let cols = tape.nodes[input].value.len();
                let w_range = layout.range(2 * layer);
                let b_range = layout.range(2 * layer + 1);
                let (head, tail) = adjoints.split_at_mut(idx);
                let g = &tail[0];
                let x = &tape.nodes[input].value;
                let gv = grad.values_mut();
                for (r, gr) in g.iter().enumerate() {
                    let w_row = w_range.start + r * cols;
                    for (c, xc) in x.iter().enumerate() {
                        gv[w_row + c] += gr * xc;
                    }
                    gv[b_range.start + r] += gr;
                }
                let w = params.block(2 * layer);
                for (r, gr) in g.iter().enumerate() {
                    let row = &w[r * cols..(r + 1) * cols];
                    for (c, wc) in row.iter().enumerate() {
                        head[input][c] += gr * wc;
                    }
                }
            }
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
        assert!(
            (a - b).abs() <= tol,
            "{what}: {a} vs {b} (diff {})",
            (a - b).abs()
        );
    }

    /// Straight-line reference evaluation, independent of the tape code path.
    fn reference_eval(params: &ParamVector, spec: &MlpSpec, input: &[f64]) -> Vec<f64> {
        let mut x = input.to_vec();
        for l in 0..spec.layers() {
            let (rows, cols) = (spec.sizes()[l + 1], spec.sizes()[l]);
            let w = params.block(2 * l);
            let b = params.block(2 * l + 1);
            let mut y = vec![0.0; rows];
            for r in 0..rows {
                y[r] = b[r]
                    + (0..cols).map(|c| w[r * cols + c] * x[c]).sum::<f64>();
            }
            if l + 1 < spec.layers() {
                for v in &mut y {
                    *v = v.tanh();
                }
            }
            x = y;
        }
        x
    }

    #[test]
    fn zero_params_give_zero_output() {
        let spec = MlpSpec::new(3, &[4], 2).unwrap();
        let params = ParamVector::zeros(spec.layout());
        let (out, _) = forward(&params, &spec, &[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn single_affine_layer_is_identity_when_w_is_identity() {
        let spec = MlpSpec::new(3, &[], 3).unwrap();
        let mut params = ParamVector::zeros(spec.layout());
        for i in 0..3 {
            params.block_mut(0)[i * 3 + i] = 1.0;
        }
        let x = [0.3, -1.7, 2.2];
        let (out, _) = forward(&params, &spec, &x).unwrap();
        assert_eq!(out, x.to_vec());
    }

    #[test]
    fn forward_matches_reference_on_random_nets() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..20 {
            let spec = MlpSpec::new(4, &[32, 32], 3).unwrap();
            let params = spec.init_params(&mut rng);
            let input: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (out, tape) = forward(&params, &spec, &input).unwrap();
            let want = reference_eval(&params, &spec, &input);
            for (a, b) in out.iter().zip(&want) {
                assert_close(*a, *b, 1e-12, &format!("trial {trial}"));
            }
            assert_eq!(tape.output(), out.as_slice());
        }
    }

    #[test]
    fn forward_rejects_bad_input_length() {
        let spec = MlpSpec::new(3, &[4], 2).unwrap();
        let params = ParamVector::zeros(spec.layout());
        assert!(matches!(
            forward(&params, &spec, &[1.0, 2.0]),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn backward_is_exact_for_linear_network() {
        // f = seed . (W x + b) is linear in (W, b): dW = seed outer x, db = seed.
        let spec = MlpSpec::new(2, &[], 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let params = spec.init_params(&mut rng);
        let x = [1.5, -0.25];
        let seed = [2.0, -1.0, 0.5];
        let (_, tape) = forward(&params, &spec, &x).unwrap();
        let g = backward(&params, &tape, &seed).unwrap();
        let layout = spec.layout();
        let w_range = layout.range(0);
        let b_range = layout.range(1);
        for r in 0..3 {
            for c in 0..2 {
                assert_eq!(g.values()[w_range.start + r * 2 + c], seed[r] * x[c]);
            }
            assert_eq!(g.values()[b_range.start + r], seed[r]);
        }
    }

    #[test]
    fn backward_matches_finite_differences_on_tanh_nets() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let spec = MlpSpec::new(3, &[8, 8], 2).unwrap();
            let params = spec.init_params(&mut rng);
            let input: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let seed: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();

            let (_, tape) = forward(&params, &spec, &input).unwrap();
            let g = backward(&params, &tape, &seed).unwrap();

            let f = |p: &ParamVector| {
                let (out, _) = forward(p, &spec, &input).unwrap();
                out.iter().zip(&seed).map(|(o, s)| o * s).sum::<f64>()
            };
            let fd = super::super::finite_diff(f, &params, 1e-5).unwrap();
            let scale = fd.inf_norm().max(1e-12);
            for (a, b) in g.values().iter().zip(fd.values()) {
                assert!(
                    (a - b).abs() / scale < 1e-4,
                    "autodiff {a} vs fd {b} (norm-relative {})",
                    (a - b).abs() / scale
                );
            }
        }
    }

    #[test]
    fn backward_is_linear_in_the_seed() {
        let spec = MlpSpec::new(3, &[6], 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = spec.init_params(&mut rng);
        let (_, tape) = forward(&params, &spec, &[0.1, 0.2, 0.3]).unwrap();
        let g1 = backward(&params, &tape, &[1.0, 0.0]).unwrap();
        let g2 = backward(&params, &tape, &[0.0, 1.0]).unwrap();
        let gsum = backward(&params, &tape, &[2.0, -3.0]).unwrap();
        for i in 0..gsum.len() {
            assert_close(
                gsum.values()[i],
                2.0 * g1.values()[i] - 3.0 * g2.values()[i],
                1e-12,
                "seed linearity",
            );
        }
    }

    #[test]
    fn stale_tape_is_rejected() {
        let spec = MlpSpec::new(2, &[4], 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut params = spec.init_params(&mut rng);
        let (_, tape) = forward(&params, &spec, &[1.0, 1.0]).unwrap();
        params.values_mut()[0] += 1e-9;
        assert!(matches!(
            backward(&params, &tape, &[1.0]),
            Err(Error::StaleTape)
        ));
    }

    #[test]
    fn backward_rejects_bad_seed_length() {
        let spec = MlpSpec::new(2, &[4], 2).unwrap();
        let params = ParamVector::zeros(spec.layout());
        let (_, tape) = forward(&params, &spec, &[1.0, 1.0]).unwrap();
        assert!(matches!(
            backward(&params, &tape, &[1.0]),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn seeded_init_and_forward_are_deterministic() {
        let spec = MlpSpec::new(4, &[16, 16], 3).unwrap();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let params = spec.init_params(&mut rng);
            let (out, tape) = forward(&params, &spec, &[0.5, -0.5, 1.0, 0.0]).unwrap();
            let g = backward(&params, &tape, &[1.0, 2.0, 3.0]).unwrap();
            (out, g.values().to_vec())
        };
        let (o1, g1) = run();
        let (o2, g2) = run();
        assert_eq!(o1, o2);
        assert_eq!(g1, g2);
    }
}
