//! Flat parameter storage with a named block layout.
//!
//! All optimizers in this crate treat parameters as one flat `Vec<f64>`;
//! the layout maps named blocks (weight matrices, bias vectors) onto
//! contiguous ranges of that vector. Gradients share the flat shape, so
//! update rules are plain vector arithmetic.

use std::ops::Range;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One named contiguous block of parameters.
///
/// `rows == len` and `cols == 1` for vectors. `fan_in` is the input width of
/// the layer the block belongs to; initialization draws each entry uniformly
/// from `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub fan_in: usize,
}

impl BlockSpec {
    pub fn matrix(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        BlockSpec {
            name: name.into(),
            rows,
            cols,
            fan_in: cols,
        }
    }

    pub fn vector(name: impl Into<String>, len: usize, fan_in: usize) -> Self {
        BlockSpec {
            name: name.into(),
            rows: len,
            cols: 1,
            fan_in,
        }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Ordered collection of blocks defining the flat parameter shape.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    blocks: Vec<BlockSpec>,
}

impl ParamLayout {
    pub fn new(blocks: Vec<BlockSpec>) -> Self {
        ParamLayout { blocks }
    }

    pub fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    pub fn total_len(&self) -> usize {
        self.blocks.iter().map(BlockSpec::len).sum()
    }

    /// Flat index range of block `idx`.
    pub fn range(&self, idx: usize) -> Range<usize> {
        let start: usize = self.blocks[..idx].iter().map(BlockSpec::len).sum();
        start..start + self.blocks[idx].len()
    }

    /// Looks a block up by name.
    pub fn find(&self, name: &str) -> Option<(usize, &BlockSpec)> {
        self.blocks.iter().enumerate().find(|(_, b)| b.name == name)
    }
}

/// Flat parameter vector tied to a layout.
///
/// Invariant: `values.len() == layout.total_len()` and every entry is finite.
/// Mutation goes through `values_mut`; update rules re-validate finiteness
/// afterwards via [`ParamVector::check_finite`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    layout: ParamLayout,
    values: Vec<f64>,
}

impl ParamVector {
    pub fn zeros(layout: ParamLayout) -> Self {
        let values = vec![0.0; layout.total_len()];
        ParamVector { layout, values }
    }

    pub fn from_values(layout: ParamLayout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.total_len() {
            return Err(Error::ShapeMismatch {
                what: "parameter vector",
                expected: layout.total_len(),
                got: values.len(),
            });
        }
        let v = ParamVector { layout, values };
        v.check_finite()?;
        Ok(v)
    }

    /// Uniform init in `±1/sqrt(fan_in)` per block, in block order.
    pub fn init_uniform(layout: ParamLayout, rng: &mut dyn RngCore) -> Self {
        let mut values = Vec::with_capacity(layout.total_len());
        for block in layout.blocks() {
            let bound = 1.0 / (block.fan_in.max(1) as f64).sqrt();
            for _ in 0..block.len() {
                values.push(rng.gen_range(-bound..=bound));
            }
        }
        ParamVector { layout, values }
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Slice of the block at `idx` in layout order.
    pub fn block(&self, idx: usize) -> &[f64] {
        &self.values[self.layout.range(idx)]
    }

    pub fn block_mut(&mut self, idx: usize) -> &mut [f64] {
        let r = self.layout.range(idx);
        &mut self.values[r]
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(i) => Err(Error::non_finite(format!("parameter coordinate {i}"))),
        }
    }

    /// Order-sensitive checksum over the exact bit patterns of the values.
    /// Used to detect stale tapes: FNV-1a over the little-endian bytes.
    pub fn checksum(&self) -> u64 {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for v in &self.values {
            for byte in v.to_bits().to_le_bytes() {
                hash ^= u64::from(byte);
                hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        hash
    }

    /// `self += scale * grad`.
    pub fn add_scaled(&mut self, grad: &Gradient, scale: f64) -> Result<()> {
        if grad.len() != self.values.len() {
            return Err(Error::ShapeMismatch {
                what: "gradient",
                expected: self.values.len(),
                got: grad.len(),
            });
        }
        for (p, g) in self.values.iter_mut().zip(grad.values()) {
            *p += scale * g;
        }
        Ok(())
    }
}

/// Flat gradient, shape-identical to the [`ParamVector`] it was taken at.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    values: Vec<f64>,
}

impl Gradient {
    pub fn zeros(len: usize) -> Self {
        Gradient {
            values: vec![0.0; len],
        }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        Gradient { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Gradient, scale: f64) -> Result<()> {
        if other.len() != self.len() {
            return Err(Error::ShapeMismatch {
                what: "gradient accumulation",
                expected: self.len(),
                got: other.len(),
            });
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.values {
            *v *= s;
        }
    }

    pub fn inf_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
