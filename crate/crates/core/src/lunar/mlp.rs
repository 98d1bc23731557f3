//! Fully connected scoring network: tanh hidden layers, sigmoid output, mean
//! squared error, and hand-written reverse-mode gradients.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::distributions::{Distribution, Uniform};
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layer_dims: Vec<usize>,
    /// `weights[l]` maps layer `l` to layer `l + 1` and has shape
    /// `(layer_dims[l], layer_dims[l + 1])`.
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

/// `[k, width, ..., width, 1]` with `depth` hidden layers.
pub fn layer_dims(k: usize, width: usize, depth: usize) -> Vec<usize> {
    let mut dims = Vec::with_capacity(depth + 2);
    dims.push(k);
    dims.extend(std::iter::repeat(width).take(depth));
    dims.push(1);
    dims
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
        return Err(Error::InvalidConfig(format!("invalid layer dims {dims:?}")));
    }
    if dims[dims.len() - 1] != 1 {
        return Err(Error::InvalidConfig("the output layer must have width 1".into()));
    }
    Ok(())
}

/// Weights uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, biases zero.
pub fn init_model<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<MlpModel> {
    check_dims(dims)?;
    let mut weights = Vec::with_capacity(dims.len() - 1);
    let mut biases = Vec::with_capacity(dims.len() - 1);
    for w in dims.windows(2) {
        let bound = 1.0 / (w[0] as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound);
        weights.push(Array2::from_shape_simple_fn((w[0], w[1]), || dist.sample(rng)));
        biases.push(Array1::zeros(w[1]));
    }
    Ok(MlpModel {
        layer_dims: dims.to_vec(),
        weights,
        biases,
    })
}

/// Activations kept from a forward pass: the input and every layer's output.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn scores(&self) -> Vec<f64> {
        self.activations.last().expect("non-empty").column(0).to_vec()
    }
}

/// Gradients with the same shapes as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn max_abs(&self) -> f64 {
        self.weights
            .iter()
            .flat_map(|w| w.iter())
            .chain(self.biases.iter().flat_map(|b| b.iter()))
            .fold(0.0, |m, g| m.max(g.abs()))
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl MlpModel {
    /// Builds a model from explicit parameters.
    pub fn from_parameters(weights: Vec<Array2<f64>>, biases: Vec<Array1<f64>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::InvalidConfig("one bias vector per weight matrix".into()));
        }
        let mut dims = vec![weights[0].nrows()];
        for (w, b) in weights.iter().zip(&biases) {
            if w.nrows() != *dims.last().unwrap() || b.len() != w.ncols() {
                return Err(Error::InvalidConfig("parameter shapes do not chain".into()));
            }
            dims.push(w.ncols());
        }
        check_dims(&dims)?;
        if weights.iter().flatten().chain(biases.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite parameter".into()));
        }
        Ok(Self {
            layer_dims: dims,
            weights,
            biases,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [Array2<f64>], &mut [Array1<f64>]) {
        (&mut self.weights, &mut self.biases)
    }

    /// Scores for each row of `batch` plus the cache needed by [`backward`].
    pub fn forward(&self, batch: ArrayView2<'_, f64>) -> Result<(Vec<f64>, ForwardCache)> {
        let cache = self.forward_cache(batch)?;
        Ok((cache.scores(), cache))
    }

    pub fn predict(&self, batch: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        Ok(self.forward_cache(batch)?.scores())
    }

    fn forward_cache(&self, batch: ArrayView2<'_, f64>) -> Result<ForwardCache> {
        if batch.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: batch.ncols(),
            });
        }
        let last = self.n_layers() - 1;
        let mut activations = Vec::with_capacity(self.n_layers() + 1);
        activations.push(batch.to_owned());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = activations[l].dot(w);
            z += b;
            if l == last {
                z.mapv_inplace(sigmoid);
            } else {
                z.mapv_inplace(f64::tanh);
            }
            activations.push(z);
        }
        Ok(ForwardCache { activations })
    }

    /// Exact gradients of [`loss_mse`] with respect to every parameter.
    pub fn backward(&self, cache: &ForwardCache, targets: &[f64]) -> Result<Gradients> {
        let acts = &cache.activations;
        if acts.len() != self.n_layers() + 1
            || acts
                .iter()
                .zip(&self.layer_dims)
                .any(|(a, &d)| a.ncols() != d || a.nrows() != acts[0].nrows())
        {
            return Err(Error::StaleCache);
        }
        let b = acts[0].nrows();
        if targets.len() != b {
            return Err(Error::LengthMismatch {
                left: b,
                right: targets.len(),
            });
        }
        let scale = 2.0 / b as f64;
        let out = &acts[self.n_layers()];
        // dL/dz at the output: 2/b (s - t) * s (1 - s).
        let mut delta = Array2::from_shape_fn((b, 1), |(i, _)| {
            let s = out[[i, 0]];
            scale * (s - targets[i]) * s * (1.0 - s)
        });

        let mut gw = Vec::with_capacity(self.n_layers());
        let mut gb = Vec::with_capacity(self.n_layers());
        for l in (0..self.n_layers()).rev() {
            gw.push(acts[l].t().dot(&delta));
            gb.push(delta.sum_axis(Axis(0)));
            if l > 0 {
                let mut prev = delta.dot(&self.weights[l].t());
                Zip::from(&mut prev)
                    .and(&acts[l])
                    .for_each(|d, &a| *d *= 1.0 - a * a);
                delta = prev;
            }
        }
        gw.reverse();
        gb.reverse();
        Ok(Gradients {
            weights: gw,
            biases: gb,
        })
    }
}

/// Mean of `(score - target)^2`.
pub fn loss_mse(scores: &[f64], targets: &[f64]) -> Result<f64> {
    if scores.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: targets.len(),
        });
    }
    if scores.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let sum: f64 = scores.iter().zip(targets).map(|(s, t)| (s - t) * (s - t)).sum();
    Ok(sum / scores.len() as f64)
}
