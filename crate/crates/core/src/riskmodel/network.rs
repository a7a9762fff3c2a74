use ndarray::ArrayView2;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::check_width;
use crate::error::{Result, SurvError};
use crate::numeric::rng_from_seed;

/// Affine layer; `weights` is row-major `n_out × n_in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            weights: vec![0.0; n_in * n_out],
            bias: vec![0.0; n_out],
        }
    }

    fn n_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Feedforward risk network: rectifier hidden layers, one linear output unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpRisk {
    layers: Vec<DenseLayer>,
}

/// Layer inputs and hidden pre-activations kept from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    n_rows: usize,
    inputs: Vec<Vec<f64>>,
    pre_activations: Vec<Vec<f64>>,
}

impl MlpRisk {
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        let net = Self { layers };
        net.validate()?;
        Ok(net)
    }

    /// All-zero network with the given sizes (last must be 1).
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(SurvError::Parameter(
                "network needs at least input and output sizes".into(),
            ));
        }
        Self::from_layers(
            layer_sizes
                .windows(2)
                .map(|w| DenseLayer::zeros(w[0], w[1]))
                .collect(),
        )
    }

    /// Weights from `N(0, 2/fan_in)`, zero biases.
    pub fn he_init(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes)?;
        let mut rng = rng_from_seed(seed);
        for layer in &mut net.layers {
            let normal = Normal::new(0.0, (2.0 / layer.n_in as f64).sqrt())
                .map_err(|e| SurvError::Parameter(e.to_string()))?;
            layer
                .weights
                .iter_mut()
                .for_each(|w| *w = normal.sample(&mut rng));
        }
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        let Some(last) = self.layers.last() else {
            return Err(SurvError::Parameter("network has no layers".into()));
        };
        if last.n_out != 1 {
            return Err(SurvError::Parameter(format!(
                "output layer has {} units, expected 1",
                last.n_out
            )));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.n_in == 0 || l.weights.len() != l.n_in * l.n_out || l.bias.len() != l.n_out {
                return Err(SurvError::Shape(format!(
                    "layer {i} has inconsistent dimensions"
                )));
            }
            if i > 0 && self.layers[i - 1].n_out != l.n_in {
                return Err(SurvError::Shape(format!(
                    "layer {i} input does not match previous output"
                )));
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(SurvError::Numeric(format!(
                    "layer {i} has non-finite parameters"
                )));
            }
        }
        Ok(())
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].n_in];
        sizes.extend(self.layers.iter().map(|l| l.n_out));
        sizes
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        self.forward_with_cache(x).map(|(g, _)| g)
    }

    pub fn forward_with_cache(&self, x: ArrayView2<f64>) -> Result<(Vec<f64>, ForwardCache)> {
        check_width(x.ncols(), self.layers[0].n_in)?;
        let n = x.nrows();
        let mut input: Vec<f64> = x.iter().copied().collect();
        let mut cache = ForwardCache {
            n_rows: n,
            inputs: Vec::with_capacity(self.layers.len()),
            pre_activations: Vec::with_capacity(self.layers.len()),
        };
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = vec![0.0; n * layer.n_out];
            for r in 0..n {
                let a = &input[r * layer.n_in..(r + 1) * layer.n_in];
                let out = &mut z[r * layer.n_out..(r + 1) * layer.n_out];
                for (o, zo) in out.iter_mut().enumerate() {
                    let w = &layer.weights[o * layer.n_in..(o + 1) * layer.n_in];
                    *zo = layer.bias[o] + w.iter().zip(a).map(|(wi, ai)| wi * ai).sum::<f64>();
                }
            }
            let next = if l == last {
                z.clone()
            } else {
                z.iter().map(|v| v.max(0.0)).collect()
            };
            cache.inputs.push(std::mem::replace(&mut input, next));
            cache.pre_activations.push(z);
        }
        Ok((input, cache))
    }

    /// Exact parameter gradients given `∂loss/∂g` per row.
    pub fn backward(&self, cache: &ForwardCache, upstream: &[f64]) -> Result<Vec<DenseLayer>> {
        if upstream.len() != cache.n_rows || cache.inputs.len() != self.layers.len() {
            return Err(SurvError::Shape(format!(
                "{} upstream values for a cached batch of {} rows",
                upstream.len(),
                cache.n_rows
            )));
        }
        let n = cache.n_rows;
        let mut grads: Vec<DenseLayer> = self
            .layers
            .iter()
            .map(|l| DenseLayer::zeros(l.n_in, l.n_out))
            .collect();
        let mut delta = upstream.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let grad = &mut grads[l];
            let input = &cache.inputs[l];
            let mut delta_prev = if l > 0 {
                vec![0.0; n * layer.n_in]
            } else {
                Vec::new()
            };
            for r in 0..n {
                let a = &input[r * layer.n_in..(r + 1) * layer.n_in];
                for o in 0..layer.n_out {
                    let d = delta[r * layer.n_out + o];
                    if d == 0.0 {
                        continue;
                    }
                    grad.bias[o] += d;
                    let gw = &mut grad.weights[o * layer.n_in..(o + 1) * layer.n_in];
                    gw.iter_mut().zip(a).for_each(|(g, ai)| *g += d * ai);
                    if l > 0 {
                        let w = &layer.weights[o * layer.n_in..(o + 1) * layer.n_in];
                        let dp = &mut delta_prev[r * layer.n_in..(r + 1) * layer.n_in];
                        dp.iter_mut().zip(w).for_each(|(p, wi)| *p += d * wi);
                    }
                }
            }
            if l > 0 {
                let z_prev = &cache.pre_activations[l - 1];
                delta_prev.iter_mut().zip(z_prev).for_each(|(dp, z)| {
                    if *z <= 0.0 {
                        *dp = 0.0
                    }
                });
                delta = delta_prev;
            }
        }
        Ok(grads)
    }

    /// Concatenates every layer's weights then bias.
    pub fn flatten(layers: &[DenseLayer]) -> Vec<f64> {
        let mut out = Vec::with_capacity(layers.iter().map(DenseLayer::n_params).sum());
        for l in layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_flat(&mut self, params: &[f64]) -> Result<()> {
        let expected: usize = self.layers.iter().map(DenseLayer::n_params).sum();
        if params.len() != expected {
            return Err(SurvError::Shape(format!(
                "{} parameters for a network with {expected}",
                params.len()
            )));
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[offset..offset + nw]);
            offset += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }
}
