//! Fully-connected networks with exact reverse-mode gradients, in 64-bit
//! floating point throughout. The topology is fixed at construction:
//! affine layers with ReLU between hidden layers and either a TanH or an
//! identity output activation.

mod adam;
mod checkpoint;
mod normalizer;
mod policy;

pub use adam::AdamState;
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError};
pub use normalizer::Normalizer;
pub use policy::GaussianPolicy;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("input has {got} entries, layer expects {expected}")]
    InputShape { expected: usize, got: usize },
    #[error("upstream gradient has {got} rows, output has {expected}")]
    UpstreamShape { expected: usize, got: usize },
    #[error("a network needs at least one layer")]
    NoLayers,
    #[error("normalizer needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("normalizer dimension mismatch: fitted {fitted}, input {input}")]
    NormalizerShape { fitted: usize, input: usize },
}

/// Output nonlinearity of the last layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    Identity,
    Tanh,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// Weight matrix, `output_dim × input_dim`.
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
}

/// Multi-layer perceptron. Hidden activations are ReLU (subgradient 0 at
/// the kink); the output activation is configured per network.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
    output: OutputActivation,
}

/// Per-parameter gradients, mirroring the layer layout of an [`Mlp`].
#[derive(Debug, Clone)]
pub struct MlpGradients {
    pub w: Vec<DMatrix<f64>>,
    pub b: Vec<DVector<f64>>,
}

impl MlpGradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            w: net.layers.iter().map(|l| DMatrix::zeros(l.w.nrows(), l.w.ncols())).collect(),
            b: net.layers.iter().map(|l| DVector::zeros(l.b.len())).collect(),
        }
    }
}

/// Cached forward-pass intermediates for one batch.
pub struct ForwardCache {
    /// Input to each layer (column per sample).
    inputs: Vec<DMatrix<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<DMatrix<f64>>,
    /// Network output after the output activation.
    output: DMatrix<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &DMatrix<f64> {
        &self.output
    }
}

impl Mlp {
    /// Build a network with the given layer dimensions (input first, output
    /// last), initialized with uniform fan-in scaling: every weight and bias
    /// of a layer is drawn from U(−1/√fan_in, 1/√fan_in).
    pub fn new<R: Rng>(dims: &[usize], output: OutputActivation, rng: &mut R) -> Result<Self, NnError> {
        if dims.len() < 2 {
            return Err(NnError::NoLayers);
        }
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for pair in dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let w = DMatrix::from_fn(fan_out, fan_in, |_, _| rng.gen_range(-bound..bound));
            let b = DVector::from_fn(fan_out, |_, _| rng.gen_range(-bound..bound));
            layers.push(Layer { w, b });
        }
        Ok(Self { layers, output })
    }

    pub fn from_layers(layers: Vec<Layer>, output: OutputActivation) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::NoLayers);
        }
        Ok(Self { layers, output })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().w.nrows()
    }

    /// Layer dimensions, input first.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(|l| l.w.nrows()));
        dims
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn forward(&self, input: &DVector<f64>) -> Result<DVector<f64>, NnError> {
        if input.len() != self.input_dim() {
            return Err(NnError::InputShape { expected: self.input_dim(), got: input.len() });
        }
        let mut x = input.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = &layer.w * &x + &layer.b;
            if i < last {
                z.apply(|v| *v = v.max(0.0));
            } else if self.output == OutputActivation::Tanh {
                z.apply(|v| *v = v.tanh());
            }
            x = z;
        }
        Ok(x)
    }

    /// Batched forward pass; samples are columns.
    pub fn forward_batch(&self, input: &DMatrix<f64>) -> Result<DMatrix<f64>, NnError> {
        Ok(self.forward_batch_cached(input)?.output)
    }

    pub fn forward_batch_cached(&self, input: &DMatrix<f64>) -> Result<ForwardCache, NnError> {
        if input.nrows() != self.input_dim() {
            return Err(NnError::InputShape { expected: self.input_dim(), got: input.nrows() });
        }
        let n = input.ncols();
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = &layer.w * &x;
            for c in 0..n {
                z.column_mut(c).axpy(1.0, &layer.b, 1.0);
            }
            inputs.push(x);
            pre.push(z.clone());
            if i < last {
                z.apply(|v| *v = v.max(0.0));
            } else if self.output == OutputActivation::Tanh {
                z.apply(|v| *v = v.tanh());
            }
            x = z;
        }
        Ok(ForwardCache { inputs, pre, output: x })
    }

    /// Exact gradients of a scalar loss L with respect to every parameter,
    /// given dL/d(output) for the batch in `upstream` (one column per
    /// sample, any batch averaging already folded in).
    pub fn backward(&self, cache: &ForwardCache, upstream: &DMatrix<f64>) -> Result<MlpGradients, NnError> {
        if upstream.nrows() != self.output_dim() {
            return Err(NnError::UpstreamShape { expected: self.output_dim(), got: upstream.nrows() });
        }
        let mut grads = MlpGradients {
            w: Vec::with_capacity(self.layers.len()),
            b: Vec::with_capacity(self.layers.len()),
        };
        let last = self.layers.len() - 1;
        // dL/d(pre-activation) of the output layer.
        let mut delta = match self.output {
            OutputActivation::Identity => upstream.clone(),
            OutputActivation::Tanh => {
                let mut d = upstream.clone();
                d.zip_apply(&cache.output, |g, y| *g *= 1.0 - y * y);
                d
            }
        };
        let mut w_rev = Vec::with_capacity(self.layers.len());
        let mut b_rev = Vec::with_capacity(self.layers.len());
        for i in (0..=last).rev() {
            w_rev.push(&delta * cache.inputs[i].transpose());
            b_rev.push(DVector::from_fn(delta.nrows(), |r, _| delta.row(r).sum()));
            if i > 0 {
                let mut next = self.layers[i].w.transpose() * &delta;
                next.zip_apply(&cache.pre[i - 1], |g, z| {
                    if z <= 0.0 {
                        *g = 0.0;
                    }
                });
                delta = next;
            }
        }
        grads.w = w_rev.into_iter().rev().collect();
        grads.b = b_rev.into_iter().rev().collect();
        Ok(grads)
    }

    /// Single-sample convenience wrapper around [`Mlp::backward`].
    pub fn gradient(&self, input: &DVector<f64>, upstream: &DVector<f64>) -> Result<MlpGradients, NnError> {
        let x = DMatrix::from_columns(&[input.clone()]);
        let cache = self.forward_batch_cached(&x)?;
        let up = DMatrix::from_columns(&[upstream.clone()]);
        self.backward(&cache, &up)
    }
}
