use ndarray::{Array1, Array2, Axis};

use super::{Mode, Scalar};
use crate::rng::GameRng;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Activation {
    Relu,
    Identity,
}

fn relu_in_place<F: Scalar>(x: &mut Array2<F>) {
    x.mapv_inplace(|v| if v > F::zero() { v } else { F::zero() });
}

/// Zeroes `grad` wherever `pre` was not positive.
fn relu_backward<F: Scalar>(grad: &mut Array2<F>, pre: &Array2<F>) {
    grad.zip_mut_with(pre, |g, &p| {
        if p <= F::zero() {
            *g = F::zero();
        }
    });
}

fn cast<F: Scalar>(v: f64) -> F {
    F::from(v).expect("f64 converts to the network scalar")
}

/// Fully connected layer `y = act(x Wᵀ + b)` over row-major batches.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer<F> {
    pub weight: Array2<F>,
    pub bias: Array1<F>,
    pub activation: Activation,
}

pub(crate) struct DenseCache<F> {
    input: Array2<F>,
    pre: Array2<F>,
}

impl<F: Scalar> DenseLayer<F> {
    /// Uniform init in ±1/sqrt(fan_in) for weights and biases.
    pub fn new(inputs: usize, outputs: usize, activation: Activation, rng: &mut GameRng) -> DenseLayer<F> {
        let bound = 1.0 / (inputs as f64).sqrt();
        let mut sample = || cast::<F>((rng.unit_f64() * 2.0 - 1.0) * bound);
        DenseLayer {
            weight: Array2::from_shape_simple_fn((outputs, inputs), &mut sample),
            bias: Array1::from_shape_simple_fn(outputs, &mut sample),
            activation,
        }
    }

    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> DenseLayer<F> {
        DenseLayer {
            weight: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.nrows()
    }

    fn pre_activation(&self, x: &Array2<F>) -> Array2<F> {
        let mut z = x.dot(&self.weight.t());
        z += &self.bias;
        z
    }

    pub fn forward(&self, x: &Array2<F>) -> Array2<F> {
        let mut z = self.pre_activation(x);
        if self.activation == Activation::Relu {
            relu_in_place(&mut z);
        }
        z
    }

    pub(crate) fn forward_train(&self, x: Array2<F>) -> (Array2<F>, DenseCache<F>) {
        let pre = self.pre_activation(&x);
        let mut out = pre.clone();
        if self.activation == Activation::Relu {
            relu_in_place(&mut out);
        }
        (out, DenseCache { input: x, pre })
    }

    pub(crate) fn backward(&self, cache: &DenseCache<F>, mut dout: Array2<F>, grad: &mut DenseLayer<F>) -> Array2<F> {
        if self.activation == Activation::Relu {
            relu_backward(&mut dout, &cache.pre);
        }
        grad.weight += &dout.t().dot(&cache.input);
        grad.bias += &dout.sum_axis(Axis(0));
        dout.dot(&self.weight)
    }
}

/// Per-sample normalization across features with a learned gain and shift.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerNorm<F> {
    pub gain: Array1<F>,
    pub shift: Array1<F>,
}

pub(crate) struct NormCache<F> {
    normalized: Array2<F>,
    inv_std: Array1<F>,
}

const NORM_EPS: f64 = 1e-5;

impl<F: Scalar> LayerNorm<F> {
    pub fn new(width: usize) -> LayerNorm<F> {
        LayerNorm {
            gain: Array1::ones(width),
            shift: Array1::zeros(width),
        }
    }

    fn normalize(&self, x: &Array2<F>) -> (Array2<F>, Array1<F>) {
        let n = cast::<F>(x.ncols() as f64);
        let mean = x.sum_axis(Axis(1)) / n;
        let centered = x - &mean.view().insert_axis(Axis(1));
        let var = centered.mapv(|v| v * v).sum_axis(Axis(1)) / n;
        let inv_std = var.mapv(|v| F::one() / (v + cast(NORM_EPS)).sqrt());
        let normalized = centered * &inv_std.view().insert_axis(Axis(1));
        (normalized, inv_std)
    }

    pub fn forward(&self, x: &Array2<F>) -> Array2<F> {
        let (xhat, _) = self.normalize(x);
        xhat * &self.gain + &self.shift
    }

    pub(crate) fn forward_train(&self, x: &Array2<F>) -> (Array2<F>, NormCache<F>) {
        let (normalized, inv_std) = self.normalize(x);
        let out = &normalized * &self.gain + &self.shift;
        (out, NormCache { normalized, inv_std })
    }

    pub(crate) fn backward(&self, cache: &NormCache<F>, dout: Array2<F>, grad: &mut LayerNorm<F>) -> Array2<F> {
        let xhat = &cache.normalized;
        grad.gain += &(&dout * xhat).sum_axis(Axis(0));
        grad.shift += &dout.sum_axis(Axis(0));
        let dxhat = dout * &self.gain;
        let n = cast::<F>(xhat.ncols() as f64);
        let sum_d = dxhat.sum_axis(Axis(1)).insert_axis(Axis(1));
        let sum_dx = (&dxhat * xhat).sum_axis(Axis(1)).insert_axis(Axis(1));
        let inner = dxhat.mapv(|v| v * n) - &sum_d - &(xhat * &sum_dx);
        inner * &(cache.inv_std.mapv(|s| s / n)).insert_axis(Axis(1))
    }
}

/// `relu(x + norm2(fc2(relu(norm1(fc1(x))))))`. With zero weights and no
/// normalization the block is exactly `relu(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualBlock<F> {
    pub fc1: DenseLayer<F>,
    pub fc2: DenseLayer<F>,
    pub norm1: Option<LayerNorm<F>>,
    pub norm2: Option<LayerNorm<F>>,
}

pub(crate) struct BlockCache<F> {
    fc1: DenseCache<F>,
    norm1: Option<NormCache<F>>,
    hidden_pre: Array2<F>,
    fc2: DenseCache<F>,
    norm2: Option<NormCache<F>>,
    sum: Array2<F>,
}

impl<F: Scalar> ResidualBlock<F> {
    pub fn new(width: usize, normalize: bool, rng: &mut GameRng) -> ResidualBlock<F> {
        ResidualBlock {
            fc1: DenseLayer::new(width, width, Activation::Identity, rng),
            fc2: DenseLayer::new(width, width, Activation::Identity, rng),
            norm1: normalize.then(|| LayerNorm::new(width)),
            norm2: normalize.then(|| LayerNorm::new(width)),
        }
    }

    pub fn width(&self) -> usize {
        self.fc1.inputs()
    }

    pub fn forward(&self, x: &Array2<F>) -> Array2<F> {
        let mut h = self.fc1.forward(x);
        if let Some(n) = &self.norm1 {
            h = n.forward(&h);
        }
        relu_in_place(&mut h);
        let mut y = self.fc2.forward(&h);
        if let Some(n) = &self.norm2 {
            y = n.forward(&y);
        }
        y += x;
        relu_in_place(&mut y);
        y
    }

    pub(crate) fn forward_train(&self, x: Array2<F>) -> (Array2<F>, BlockCache<F>) {
        let skip = x.clone();
        let (mut h, fc1) = self.fc1.forward_train(x);
        let norm1 = self.norm1.as_ref().map(|n| {
            let (out, cache) = n.forward_train(&h);
            h = out;
            cache
        });
        let hidden_pre = h.clone();
        relu_in_place(&mut h);
        let (mut y, fc2) = self.fc2.forward_train(h);
        let norm2 = self.norm2.as_ref().map(|n| {
            let (out, cache) = n.forward_train(&y);
            y = out;
            cache
        });
        y += &skip;
        let sum = y.clone();
        relu_in_place(&mut y);
        (
            y,
            BlockCache {
                fc1,
                norm1,
                hidden_pre,
                fc2,
                norm2,
                sum,
            },
        )
    }

    pub(crate) fn backward(&self, cache: &BlockCache<F>, mut dout: Array2<F>, grad: &mut ResidualBlock<F>) -> Array2<F> {
        relu_backward(&mut dout, &cache.sum);
        let skip_grad = dout.clone();
        let mut d = dout;
        if let (Some(n), Some(c), Some(g)) = (&self.norm2, &cache.norm2, grad.norm2.as_mut()) {
            d = n.backward(c, d, g);
        }
        let mut d = self.fc2.backward(&cache.fc2, d, &mut grad.fc2);
        relu_backward(&mut d, &cache.hidden_pre);
        if let (Some(n), Some(c), Some(g)) = (&self.norm1, &cache.norm1, grad.norm1.as_mut()) {
            d = n.backward(c, d, g);
        }
        let d = self.fc1.backward(&cache.fc1, d, &mut grad.fc1);
        d + skip_grad
    }
}

/// Inverted dropout: in training each unit survives with probability `1 - p`
/// and is scaled by `1 / (1 - p)`; inference is the identity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dropout {
    pub p: f64,
}

impl Dropout {
    pub(crate) fn mask<F: Scalar>(&self, rows: usize, cols: usize, rng: &mut GameRng) -> Array2<F> {
        let scale = cast::<F>(1.0 / (1.0 - self.p));
        Array2::from_shape_simple_fn((rows, cols), || {
            if rng.bernoulli(self.p) {
                F::zero()
            } else {
                scale
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Stage<F> {
    Dense(DenseLayer<F>),
    Block(ResidualBlock<F>),
    Dropout(Dropout),
}

pub(crate) enum StageCache<F> {
    Dense(DenseCache<F>),
    Block(BlockCache<F>),
    Dropout(Option<Array2<F>>),
}

impl<F: Scalar> Stage<F> {
    pub(crate) fn forward(&self, x: Array2<F>, mode: &mut Mode<'_>) -> Array2<F> {
        match self {
            Stage::Dense(d) => d.forward(&x),
            Stage::Block(b) => b.forward(&x),
            Stage::Dropout(drop) => match mode {
                Mode::Infer => x,
                Mode::Train(rng) => {
                    let mask = drop.mask(x.nrows(), x.ncols(), rng);
                    x * &mask
                }
            },
        }
    }

    pub(crate) fn forward_train(&self, x: Array2<F>, mode: &mut Mode<'_>) -> (Array2<F>, StageCache<F>) {
        match self {
            Stage::Dense(d) => {
                let (y, c) = d.forward_train(x);
                (y, StageCache::Dense(c))
            }
            Stage::Block(b) => {
                let (y, c) = b.forward_train(x);
                (y, StageCache::Block(c))
            }
            Stage::Dropout(drop) => match mode {
                Mode::Infer => (x, StageCache::Dropout(None)),
                Mode::Train(rng) => {
                    let mask = drop.mask(x.nrows(), x.ncols(), rng);
                    (x * &mask, StageCache::Dropout(Some(mask)))
                }
            },
        }
    }

    pub(crate) fn backward(&self, cache: &StageCache<F>, dout: Array2<F>, grad: &mut Stage<F>) -> Array2<F> {
        match (self, cache, grad) {
            (Stage::Dense(d), StageCache::Dense(c), Stage::Dense(g)) => d.backward(c, dout, g),
            (Stage::Block(b), StageCache::Block(c), Stage::Block(g)) => b.backward(c, dout, g),
            (Stage::Dropout(_), StageCache::Dropout(mask), Stage::Dropout(_)) => match mask {
                Some(m) => dout * m,
                None => dout,
            },
            _ => unreachable!("gradient network mirrors the parameter network"),
        }
    }

    /// Calls `f(suffix, shape, values)` for every parameter tensor.
    pub(crate) fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[F])) {
        fn dense<F: Scalar>(prefix: &str, d: &DenseLayer<F>, f: &mut dyn FnMut(&str, &[usize], &[F])) {
            f(&format!("{prefix}w"), d.weight.shape(), d.weight.as_slice().expect("standard layout"));
            f(&format!("{prefix}b"), d.bias.shape(), d.bias.as_slice().expect("standard layout"));
        }
        fn norm<F: Scalar>(prefix: &str, n: &LayerNorm<F>, f: &mut dyn FnMut(&str, &[usize], &[F])) {
            f(&format!("{prefix}gain"), n.gain.shape(), n.gain.as_slice().expect("standard layout"));
            f(&format!("{prefix}shift"), n.shift.shape(), n.shift.as_slice().expect("standard layout"));
        }
        match self {
            Stage::Dense(d) => dense("", d, f),
            Stage::Block(b) => {
                dense("fc1.", &b.fc1, f);
                if let Some(n) = &b.norm1 {
                    norm("norm1.", n, f);
                }
                dense("fc2.", &b.fc2, f);
                if let Some(n) = &b.norm2 {
                    norm("norm2.", n, f);
                }
            }
            Stage::Dropout(_) => {}
        }
    }

    /// Mutable counterpart of [`Stage::visit`], same order.
    pub fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [F])) {
        fn dense<F: Scalar>(d: &mut DenseLayer<F>, f: &mut dyn FnMut(&mut [F])) {
            f(d.weight.as_slice_mut().expect("standard layout"));
            f(d.bias.as_slice_mut().expect("standard layout"));
        }
        fn norm<F: Scalar>(n: &mut LayerNorm<F>, f: &mut dyn FnMut(&mut [F])) {
            f(n.gain.as_slice_mut().expect("standard layout"));
            f(n.shift.as_slice_mut().expect("standard layout"));
        }
        match self {
            Stage::Dense(d) => dense(d, f),
            Stage::Block(b) => {
                dense(&mut b.fc1, f);
                if let Some(n) = b.norm1.as_mut() {
                    norm(n, f);
                }
                dense(&mut b.fc2, f);
                if let Some(n) = b.norm2.as_mut() {
                    norm(n, f);
                }
            }
            Stage::Dropout(_) => {}
        }
    }
}
