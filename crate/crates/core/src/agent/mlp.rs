//! Fully connected ReLU network with hand-written forward, reverse and
//! forward-mode derivatives.
//!
//! Parameters are addressed through one flat vector: for each layer the
//! weight matrix (row-major, `out × in`) followed by the bias.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::Rng;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
struct Dense {
    n_in: usize,
    n_out: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Dense {
    fn n_params(&self) -> usize {
        self.n_out * (self.n_in + 1)
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.n_out {
            let row = &self.weights[o * self.n_in..(o + 1) * self.n_in];
            out.push(self.biases[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>());
        }
    }
}

/// Feed-forward network: ReLU on hidden layers, identity on the output.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
}

/// Layer outputs recorded by [`Mlp::forward_cached`]; entry 0 is the input.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("cache holds the input")
    }
}

impl Mlp {
    /// All-zero network with the given layer sizes (input first).
    pub fn zeros(layer_dims: &[usize]) -> Result<Self> {
        if layer_dims.len() < 2 || layer_dims.contains(&0) {
            return Err(Error::invalid("an MLP needs at least input and output layers of nonzero size"));
        }
        let layers = layer_dims
            .windows(2)
            .map(|w| Dense { n_in: w[0], n_out: w[1], weights: vec![0.0; w[0] * w[1]], biases: vec![0.0; w[1]] })
            .collect();
        Ok(Self { layers })
    }

    /// He-initialized hidden layers; the output layer is drawn with standard
    /// deviation `output_scale / sqrt(fan_in)`. Biases start at zero.
    pub fn random(layer_dims: &[usize], output_scale: f64, rng: &mut Rng) -> Result<Self> {
        let mut net = Self::zeros(layer_dims)?;
        let last = net.layers.len() - 1;
        for (l, layer) in net.layers.iter_mut().enumerate() {
            let fan_in = layer.n_in as f64;
            let std = if l == last { output_scale / libm::sqrt(fan_in) } else { libm::sqrt(2.0 / fan_in) };
            layer.weights.iter_mut().for_each(|w| *w = std * rng.normal());
        }
        Ok(net)
    }

    /// Rebuilds a network from per-layer weights (row-major) and biases.
    pub fn from_parts(layer_dims: &[usize], weights: Vec<Vec<f64>>, biases: Vec<Vec<f64>>) -> Result<Self> {
        let mut net = Self::zeros(layer_dims)?;
        if weights.len() != net.layers.len() || biases.len() != net.layers.len() {
            return Err(Error::DimensionMismatch { expected: net.layers.len(), found: weights.len().min(biases.len()) });
        }
        for ((layer, w), b) in net.layers.iter_mut().zip(weights).zip(biases) {
            if w.len() != layer.weights.len() {
                return Err(Error::DimensionMismatch { expected: layer.weights.len(), found: w.len() });
            }
            if b.len() != layer.biases.len() {
                return Err(Error::DimensionMismatch { expected: layer.biases.len(), found: b.len() });
            }
            layer.weights = w;
            layer.biases = b;
        }
        if !net.is_finite() {
            return Err(Error::invalid("network parameters must be finite"));
        }
        Ok(net)
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].n_in];
        dims.extend(self.layers.iter().map(|l| l.n_out));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].n_out
    }

    pub fn layer_weights(&self, l: usize) -> &[f64] {
        &self.layers[l].weights
    }

    pub fn layer_biases(&self, l: usize) -> &[f64] {
        &self.layers[l].biases
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Dense::n_params).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::DimensionMismatch { expected: self.n_params(), found: params.len() });
        }
        let mut rest = params;
        for l in &mut self.layers {
            let (w, tail) = rest.split_at(l.weights.len());
            let (b, tail) = tail.split_at(l.biases.len());
            l.weights.copy_from_slice(w);
            l.biases.copy_from_slice(b);
            rest = tail;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }

    /// Sets the output-layer bias, e.g. to the mean regression target.
    pub fn set_output_bias(&mut self, bias: &[f64]) -> Result<()> {
        let last = self.layers.len() - 1;
        let layer = &mut self.layers[last];
        if bias.len() != layer.n_out {
            return Err(Error::DimensionMismatch { expected: layer.n_out, found: bias.len() });
        }
        layer.biases.copy_from_slice(bias);
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), found: x.len() });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(x)?.activations.pop().expect("nonempty"))
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<ForwardCache> {
        self.check_input(x)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.n_out);
            layer.apply(&activations[l], &mut out);
            if l != last {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            activations.push(out);
        }
        Ok(ForwardCache { activations })
    }

    /// Adds `(∂out/∂θ)ᵀ · d_out` to `grad` (reverse mode).
    pub fn backward(&self, cache: &ForwardCache, d_out: &[f64], grad: &mut [f64]) {
        debug_assert_eq!(grad.len(), self.n_params());
        let mut delta = d_out.to_vec();
        let mut offset = self.n_params();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            offset -= layer.n_params();
            let input = &cache.activations[l];
            let (gw, gb) = grad[offset..offset + layer.n_params()].split_at_mut(layer.weights.len());
            for o in 0..layer.n_out {
                gb[o] += delta[o];
                let row = &mut gw[o * layer.n_in..(o + 1) * layer.n_in];
                row.iter_mut().zip(input).for_each(|(g, x)| *g += delta[o] * x);
            }
            if l > 0 {
                let mut prev = vec![0.0; layer.n_in];
                for o in 0..layer.n_out {
                    let row = &layer.weights[o * layer.n_in..(o + 1) * layer.n_in];
                    prev.iter_mut().zip(row).for_each(|(p, w)| *p += delta[o] * w);
                }
                // ReLU gate from the recorded post-activation.
                prev.iter_mut().zip(input).for_each(|(p, a)| {
                    if *a <= 0.0 {
                        *p = 0.0
                    }
                });
                delta = prev;
            }
        }
    }

    /// Directional derivative `(∂out/∂θ) · tangent` (forward mode).
    pub fn jvp(&self, cache: &ForwardCache, tangent: &[f64]) -> Vec<f64> {
        debug_assert_eq!(tangent.len(), self.n_params());
        let mut d_act = vec![0.0; self.input_dim()];
        let mut offset = 0;
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let input = &cache.activations[l];
            let (tw, tb) = tangent[offset..offset + layer.n_params()].split_at(layer.weights.len());
            let mut next = Vec::with_capacity(layer.n_out);
            for o in 0..layer.n_out {
                let r = o * layer.n_in..(o + 1) * layer.n_in;
                let mut v = tb[o];
                for ((w, dw), (x, dx)) in layer.weights[r.clone()].iter().zip(&tw[r]).zip(input.iter().zip(&d_act)) {
                    v += w * dx + dw * x;
                }
                if l != last && cache.activations[l + 1][o] <= 0.0 {
                    v = 0.0;
                }
                next.push(v);
            }
            offset += layer.n_params();
            d_act = next;
        }
        d_act
    }
}
