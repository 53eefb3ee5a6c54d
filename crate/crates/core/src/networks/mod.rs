//! Small dense-network framework with hand-written backpropagation.
//!
//! Networks are generic over `f32` (training, inference) and `f64`
//! (finite-difference gradient checks). A gradient is represented as a network
//! of the same shape, so optimizers and checkpoints walk both with the same
//! visitor.

mod bidnet;
mod checkpoint;
mod gradcheck;
mod layers;
mod optim;
mod qnet;

use std::fmt;

use ndarray::{Array2, ArrayView2};
use thiserror::Error;

use crate::rng::GameRng;

pub use bidnet::{features_matrix, BidNetConfig, BidNetwork, BID_DEFAULT_DROPOUT, BID_WIDTHS};
pub use checkpoint::{Checkpoint, NamedTensor, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use gradcheck::{finite_difference_check, GradCheck};
pub use layers::{Activation, DenseLayer, Dropout, LayerNorm, ResidualBlock, Stage};
pub use optim::{OptimizerState, RmsProp};
pub use qnet::{concat_rows, Arch, LayerSummary, QNetConfig, QNetwork};

pub trait Scalar:
    ndarray::LinalgScalar
    + ndarray::ScalarOperand
    + num_traits::Float
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + std::ops::DivAssign
    + fmt::Debug
    + Send
    + Sync
    + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Forward-pass mode. Only dropout distinguishes the two.
pub enum Mode<'a> {
    Infer,
    Train(&'a mut GameRng),
}

#[derive(Debug, Error)]
pub enum NetError {
    #[error("shape mismatch: expected width {expected}, got {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(String),
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("architecture mismatch: expected `{expected}`, found `{found}`")]
    ArchMismatch { expected: String, found: String },
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
}

/// A chain of stages with a parameter name per stage.
#[derive(Clone, Debug, PartialEq)]
pub struct Sequential<F> {
    names: Vec<String>,
    stages: Vec<Stage<F>>,
}

impl<F: Scalar> Sequential<F> {
    pub fn new() -> Sequential<F> {
        Sequential {
            names: Vec::new(),
            stages: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, stage: Stage<F>) {
        self.names.push(name.into());
        self.stages.push(stage);
    }

    pub fn stages(&self) -> impl Iterator<Item = (&str, &Stage<F>)> {
        self.names.iter().map(String::as_str).zip(&self.stages)
    }

    pub fn stage_mut(&mut self, name: &str) -> Option<&mut Stage<F>> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(&mut self.stages[i])
    }

    /// Copies every stage of `other` whose name and parameter shapes match.
    /// Returns how many stages were copied.
    pub fn copy_shared_from(&mut self, other: &Sequential<F>) -> usize {
        let shapes = |s: &Stage<F>| {
            let mut v = Vec::new();
            s.visit(&mut |_, shape, _| v.push(shape.to_vec()));
            v
        };
        let mut copied = 0;
        for (name, src) in other.stages() {
            if let Some(dst) = self.stage_mut(name) {
                if shapes(dst) == shapes(src) {
                    *dst = src.clone();
                    copied += 1;
                }
            }
        }
        copied
    }

    pub fn input_width(&self) -> usize {
        self.stages
            .iter()
            .find_map(|s| match s {
                Stage::Dense(d) => Some(d.inputs()),
                Stage::Block(b) => Some(b.width()),
                Stage::Dropout(_) => None,
            })
            .unwrap_or(0)
    }

    /// A structurally identical network with every parameter zero.
    pub fn zeros_like(&self) -> Sequential<F> {
        let mut z = self.clone();
        z.visit_mut(&mut |_, values| values.fill(F::zero()));
        z
    }

    /// Visits `(name, shape, values)` for every tensor in a fixed order.
    pub fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[F])) {
        for (name, stage) in self.names.iter().zip(&self.stages) {
            stage.visit(&mut |suffix, shape, values| f(&format!("{name}.{suffix}"), shape, values));
        }
    }

    /// Mutable visit in the same order as [`Sequential::visit`]; the first
    /// argument is the tensor's position in that order.
    pub fn visit_mut(&mut self, f: &mut dyn FnMut(usize, &mut [F])) {
        let mut i = 0;
        for stage in &mut self.stages {
            stage.visit_mut(&mut |values| {
                f(i, values);
                i += 1;
            });
        }
    }

    pub fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, _, v| n += v.len());
        n
    }

    pub fn all_finite(&self) -> bool {
        let mut ok = true;
        self.visit(&mut |_, _, v| ok &= v.iter().all(|x| x.is_finite()));
        ok
    }

    /// Flattened copy of every parameter in visit order.
    pub fn flat_params(&self) -> Vec<F> {
        let mut out = Vec::with_capacity(self.num_params());
        self.visit(&mut |_, _, v| out.extend_from_slice(v));
        out
    }

    pub fn set_flat_params(&mut self, flat: &[F]) {
        let mut offset = 0;
        self.visit_mut(&mut |_, v| {
            v.copy_from_slice(&flat[offset..offset + v.len()]);
            offset += v.len();
        });
        assert_eq!(offset, flat.len(), "flat parameter length");
    }

    fn check_width(&self, x: &ArrayView2<F>) -> Result<(), NetError> {
        let expected = self.input_width();
        if x.ncols() != expected {
            return Err(NetError::ShapeMismatch {
                expected,
                found: x.ncols(),
            });
        }
        Ok(())
    }

    /// Batched forward pass; one row per sample.
    pub fn forward(&self, x: ArrayView2<F>, mode: &mut Mode<'_>) -> Result<Array2<F>, NetError> {
        self.check_width(&x)?;
        let mut h = x.to_owned();
        for stage in &self.stages {
            h = stage.forward(h, mode);
        }
        Ok(h)
    }

    /// Runs the stages after the first `skip` on an intermediate activation.
    pub(crate) fn forward_tail(&self, skip: usize, mut h: Array2<F>, mode: &mut Mode<'_>) -> Array2<F> {
        for stage in &self.stages[skip..] {
            h = stage.forward(h, mode);
        }
        h
    }

    /// Mean-squared error of the single-column output against `targets`, and
    /// the gradient of that loss with respect to every parameter.
    pub fn mse_backward(
        &self,
        x: ArrayView2<F>,
        targets: &[F],
        mode: &mut Mode<'_>,
    ) -> Result<(F, Sequential<F>), NetError> {
        self.check_width(&x)?;
        if x.nrows() == 0 {
            return Err(NetError::EmptyBatch);
        }
        if targets.len() != x.nrows() {
            return Err(NetError::ShapeMismatch {
                expected: x.nrows(),
                found: targets.len(),
            });
        }
        let mut caches = Vec::with_capacity(self.stages.len());
        let mut h = x.to_owned();
        for stage in &self.stages {
            let (out, cache) = stage.forward_train(h, mode);
            caches.push(cache);
            h = out;
        }
        let n = F::from(targets.len()).expect("batch size");
        let two = F::one() + F::one();
        let mut loss = F::zero();
        let mut d = Array2::zeros(h.raw_dim());
        for (i, &t) in targets.iter().enumerate() {
            let r = h[[i, 0]] - t;
            loss = loss + r * r;
            d[[i, 0]] = two * r / n;
        }
        let mut grads = self.zeros_like();
        for ((stage, cache), g) in self.stages.iter().zip(&caches).zip(&mut grads.stages).rev() {
            d = stage.backward(cache, d, g);
        }
        Ok((loss / n, grads))
    }

    /// Parameter-wise conversion between scalar types.
    pub fn cast<G: Scalar>(&self) -> Sequential<G> {
        let stages = self
            .stages
            .iter()
            .map(|s| match s {
                Stage::Dense(d) => Stage::Dense(cast_dense(d)),
                Stage::Block(b) => Stage::Block(ResidualBlock {
                    fc1: cast_dense(&b.fc1),
                    fc2: cast_dense(&b.fc2),
                    norm1: b.norm1.as_ref().map(cast_norm),
                    norm2: b.norm2.as_ref().map(cast_norm),
                }),
                Stage::Dropout(p) => Stage::Dropout(*p),
            })
            .collect();
        Sequential {
            names: self.names.clone(),
            stages,
        }
    }
}

impl<F: Scalar> Default for Sequential<F> {
    fn default() -> Self {
        Sequential::new()
    }
}

fn cast_value<F: Scalar, G: Scalar>(v: F) -> G {
    G::from(v).expect("finite parameter")
}

fn cast_dense<F: Scalar, G: Scalar>(d: &DenseLayer<F>) -> DenseLayer<G> {
    DenseLayer {
        weight: d.weight.mapv(cast_value),
        bias: d.bias.mapv(cast_value),
        activation: d.activation,
    }
}

fn cast_norm<F: Scalar, G: Scalar>(n: &LayerNorm<F>) -> LayerNorm<G> {
    LayerNorm {
        gain: n.gain.mapv(cast_value),
        shift: n.shift.mapv(cast_value),
    }
}
