//! Dense layers and multilayer perceptrons with hand-written backward passes.
//!
//! Everything runs in f64 over `ndarray` batches; gradients are exact and
//! verified against central finite differences in the test suite.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Fully connected layer, weights stored (out × in).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Clone, Debug)]
pub struct DenseGrads {
    pub dw: Array2<f64>,
    pub db: Array1<f64>,
}

impl Dense {
    /// Scaled-uniform fan-in initialization.
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        Dense {
            w: Array2::from_shape_fn((out_dim, in_dim), |_| rng.gen_range(-bound..bound)),
            b: Array1::from_shape_fn(out_dim, |_| rng.gen_range(-bound..bound)),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.w.nrows()
    }

    /// `x: (batch, in) -> (batch, out)`
    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.w.t()) + &self.b
    }

    /// Given the layer input and the gradient at the output, produce the
    /// gradient at the input and the parameter gradients.
    pub fn backward(&self, x: &Array2<f64>, dy: &Array2<f64>) -> (Array2<f64>, DenseGrads) {
        // Accumulate into standard-layout buffers so the optimizer can view
        // every gradient as a flat slice.
        let mut dw = Array2::zeros(self.w.raw_dim());
        ndarray::linalg::general_mat_mul(1.0, &dy.t(), x, 0.0, &mut dw);
        let db = dy.sum_axis(Axis(0));
        let dx = dy.dot(&self.w);
        (dx, DenseGrads { dw, db })
    }

    pub fn zero_grads(&self) -> DenseGrads {
        DenseGrads {
            dw: Array2::zeros(self.w.raw_dim()),
            db: Array1::zeros(self.b.raw_dim()),
        }
    }
}

/// Stack of dense layers with relu between them; `relu_last` also rectifies
/// the final layer (used by the convolution perceptrons and the trunk, while
/// output heads stay linear).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub relu_last: bool,
}

/// Intermediates needed for the backward pass.
pub struct MlpCache {
    /// Input to each layer (post-activation of the previous one).
    inputs: Vec<Array2<f64>>,
    /// Pre-activation output of each layer.
    preacts: Vec<Array2<f64>>,
}

impl Mlp {
    /// Build from an explicit dimension chain, e.g. `[20, 128, 128]`.
    pub fn new(dims: &[usize], relu_last: bool, rng: &mut impl Rng) -> Self {
        assert!(dims.len() >= 2);
        let layers = dims
            .windows(2)
            .map(|d| Dense::new(d[0], d[1], rng))
            .collect();
        Mlp { layers, relu_last }
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().unwrap().in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    fn rectify_at(&self, layer: usize) -> bool {
        layer + 1 < self.layers.len() || self.relu_last
    }

    pub fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, MlpCache) {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut preacts = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(&cur);
            inputs.push(cur);
            let out = if self.rectify_at(i) {
                z.mapv(|v| v.max(0.0))
            } else {
                z.clone()
            };
            preacts.push(z);
            cur = out;
        }
        (cur, MlpCache { inputs, preacts })
    }

    /// Inference-only forward without saving intermediates.
    pub fn infer(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut cur = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            cur = layer.forward(&cur);
            if self.rectify_at(i) {
                cur.mapv_inplace(|v| v.max(0.0));
            }
        }
        cur
    }

    pub fn backward(&self, cache: &MlpCache, dy: &Array2<f64>) -> (Array2<f64>, Vec<DenseGrads>) {
        let mut grads = vec![self.layers[0].zero_grads(); 0];
        grads.reserve(self.layers.len());
        let mut rev = Vec::with_capacity(self.layers.len());
        let mut cur = dy.clone();
        for i in (0..self.layers.len()).rev() {
            if self.rectify_at(i) {
                cur.zip_mut_with(&cache.preacts[i], |g, z| {
                    if *z <= 0.0 {
                        *g = 0.0;
                    }
                });
            }
            let (dx, g) = self.layers[i].backward(&cache.inputs[i], &cur);
            rev.push(g);
            cur = dx;
        }
        rev.reverse();
        grads.extend(rev);
        (cur, grads)
    }

    pub fn zero_grads(&self) -> Vec<DenseGrads> {
        self.layers.iter().map(Dense::zero_grads).collect()
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    l.w.as_slice_mut().unwrap(),
                    l.b.as_slice_mut().unwrap(),
                ]
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }
}

pub fn grad_slices(grads: &[DenseGrads]) -> Vec<&[f64]> {
    grads
        .iter()
        .flat_map(|g| [g.dw.as_slice().unwrap(), g.db.as_slice().unwrap()])
        .collect()
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}
