use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::rng::rng_for;

/// Architecture and seed of a soft classifier.
///
/// Capacity 0 is a linear softmax model; capacity `k >= 1` is a two-layer
/// tanh MLP of width `4 * 2^k` followed by a linear head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub capacity_index: usize,
    pub input_dim: usize,
    pub n_classes: usize,
    pub seed: u64,
}

/// Highest supported capacity index.
pub const MAX_CAPACITY: usize = 8;

pub const HIDDEN_LAYERS: usize = 2;

pub fn hidden_width(capacity_index: usize) -> usize {
    if capacity_index == 0 {
        0
    } else {
        4 << capacity_index
    }
}

impl ModelConfig {
    pub fn new(capacity_index: usize, input_dim: usize, n_classes: usize, seed: u64) -> Self {
        Self {
            capacity_index,
            input_dim,
            n_classes,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.capacity_index > MAX_CAPACITY {
            return Err(LabError::InvalidArgument(format!(
                "capacity index {} exceeds maximum {MAX_CAPACITY}",
                self.capacity_index
            )));
        }
        if self.input_dim == 0 || self.n_classes < 2 {
            return Err(LabError::InvalidArgument(format!(
                "need input_dim >= 1 and n_classes >= 2, got {} and {}",
                self.input_dim, self.n_classes
            )));
        }
        Ok(())
    }

    /// Layer widths from input to logits.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim];
        let h = hidden_width(self.capacity_index);
        if h > 0 {
            w.extend(std::iter::repeat_n(h, HIDDEN_LAYERS));
        }
        w.push(self.n_classes);
        w
    }

    pub fn param_count(&self) -> usize {
        self.widths().windows(2).map(|p| p[0] * p[1] + p[1]).sum()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_capacity(mut self, capacity_index: usize) -> Self {
        self.capacity_index = capacity_index;
        self
    }
}

/// Parameter offsets of one affine layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    /// Start of the row-major `n_out x n_in` weight block; biases follow it.
    pub w: usize,
    pub b: usize,
}

pub(crate) fn layers(cfg: &ModelConfig) -> Vec<Layer> {
    let mut out = Vec::new();
    let mut off = 0;
    for p in cfg.widths().windows(2) {
        let (n_in, n_out) = (p[0], p[1]);
        out.push(Layer {
            n_in,
            n_out,
            w: off,
            b: off + n_in * n_out,
        });
        off += n_in * n_out + n_out;
    }
    out
}

/// A soft classifier: flat parameters plus the index where the head begins.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub params: Vec<f64>,
    pub config: ModelConfig,
    /// Parameters before this index form the trunk; the rest is the head.
    pub head_offset: usize,
}

/// Cached forward pass: `acts[0]` is the input, `acts[l]` the output of
/// hidden layer `l`, `logits` the head output and `probs` its softmax.
#[derive(Debug, Clone)]
pub(crate) struct Trace {
    pub acts: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

pub fn init_model(config: ModelConfig) -> Result<Model> {
    config.validate()?;
    let layers = layers(&config);
    let mut params = vec![0.0; config.param_count()];
    let mut rng = rng_for(config.seed, "init");
    for layer in &layers {
        let normal = Normal::new(0.0, (1.0 / layer.n_in as f64).sqrt()).expect("positive std");
        for p in &mut params[layer.w..layer.b] {
            *p = normal.sample(&mut rng);
        }
    }
    let head_offset = layers.last().expect("at least one layer").w;
    Ok(Model {
        params,
        config,
        head_offset,
    })
}

pub(crate) fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn affine(params: &[f64], layer: &Layer, x: &[f64]) -> Vec<f64> {
    let mut out = params[layer.b..layer.b + layer.n_out].to_vec();
    for (o, acc) in out.iter_mut().enumerate() {
        let row = &params[layer.w + o * layer.n_in..layer.w + (o + 1) * layer.n_in];
        *acc += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
    }
    out
}

/// `W x` without the bias.
fn linear_part(params: &[f64], layer: &Layer, x: &[f64]) -> Vec<f64> {
    (0..layer.n_out)
        .map(|o| {
            params[layer.w + o * layer.n_in..layer.w + (o + 1) * layer.n_in]
                .iter()
                .zip(x)
                .map(|(w, v)| w * v)
                .sum()
        })
        .collect()
}

/// `W^T d`.
fn transpose_apply(params: &[f64], layer: &Layer, d: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; layer.n_in];
    for (o, dv) in d.iter().enumerate() {
        let row = &params[layer.w + o * layer.n_in..layer.w + (o + 1) * layer.n_in];
        out.iter_mut().zip(row).for_each(|(u, w)| *u += dv * w);
    }
    out
}

/// Accumulates `d x^T` into the weight block of `layer`.
fn add_outer(grad: &mut [f64], layer: &Layer, d: &[f64], x: &[f64]) {
    for (o, dv) in d.iter().enumerate() {
        let row = &mut grad[layer.w + o * layer.n_in..layer.w + (o + 1) * layer.n_in];
        row.iter_mut().zip(x).for_each(|(g, v)| *g += dv * v);
    }
}

impl Model {
    pub fn capacity(&self) -> usize {
        self.config.capacity_index
    }

    pub(crate) fn layers(&self) -> Vec<Layer> {
        layers(&self.config)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.config.input_dim {
            return Err(LabError::DimensionMismatch {
                expected: self.config.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn trace(&self, x: &[f64]) -> Trace {
        let layers = self.layers();
        let mut acts = vec![x.to_vec()];
        for layer in &layers[..layers.len() - 1] {
            let mut h = affine(&self.params, layer, acts.last().unwrap());
            h.iter_mut().for_each(|v| *v = v.tanh());
            acts.push(h);
        }
        let logits = affine(&self.params, layers.last().unwrap(), acts.last().unwrap());
        let probs = softmax(&logits);
        Trace { acts, logits, probs }
    }

    /// Class distribution for one input.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.trace(x).probs)
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.trace(x).logits)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(crate::taskgen::argmax(&self.forward(x)?))
    }

    pub fn predict_all(&self, xs: &[Vec<f64>]) -> Result<Vec<usize>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }

    pub fn forward_all(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        xs.iter().map(|x| self.forward(x)).collect()
    }

    /// Backpropagates a logit adjoint `dz` through a cached pass.
    ///
    /// `extra[l]` (same shape as `trace.acts[l]`, for `l >= 1`) is added to
    /// the adjoint of hidden activation `l`, which lets higher-order terms
    /// reuse this sweep. Parameter gradients accumulate into `grad` when
    /// given; the input adjoint is returned.
    pub(crate) fn backward(
        &self,
        trace: &Trace,
        dz: &[f64],
        extra: Option<&[Vec<f64>]>,
        mut grad: Option<&mut [f64]>,
    ) -> Vec<f64> {
        let layers = self.layers();
        let mut delta = dz.to_vec();
        for (l, layer) in layers.iter().enumerate().rev() {
            let input = &trace.acts[l];
            if let Some(g) = grad.as_deref_mut() {
                for (o, d) in delta.iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    let row = &mut g[layer.w + o * layer.n_in..layer.w + (o + 1) * layer.n_in];
                    row.iter_mut().zip(input).for_each(|(gw, a)| *gw += d * a);
                    g[layer.b + o] += d;
                }
            }
            let mut up = vec![0.0; layer.n_in];
            for (o, d) in delta.iter().enumerate() {
                let row = &self.params[layer.w + o * layer.n_in..layer.w + (o + 1) * layer.n_in];
                up.iter_mut().zip(row).for_each(|(u, w)| *u += d * w);
            }
            if l == 0 {
                return up;
            }
            if let Some(extra) = extra {
                up.iter_mut().zip(&extra[l]).for_each(|(u, e)| *u += e);
            }
            delta = up.iter().zip(input).map(|(u, a)| u * (1.0 - a * a)).collect();
        }
        unreachable!("models have at least one layer")
    }

    /// Gradient of `dz . logits` with respect to the input.
    pub fn input_gradient(&self, x: &[f64], dz: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        if dz.len() != self.config.n_classes {
            return Err(LabError::DimensionMismatch {
                expected: self.config.n_classes,
                got: dz.len(),
            });
        }
        Ok(self.backward(&self.trace(x), dz, None, None))
    }

    /// Adds the parameter gradient of `v . grad_x(dz . logits)` into `grad`,
    /// holding `v` and `dz` fixed.
    ///
    /// The inner product equals the directional derivative of `dz . logits`
    /// along `v`, so a tangent pass followed by a reverse sweep over both the
    /// tangent and the primal activations gives the exact mixed derivative.
    pub(crate) fn input_gradient_param_grad(&self, trace: &Trace, dz: &[f64], v: &[f64], grad: &mut [f64]) {
        let layers = self.layers();
        let depth = layers.len();
        let mut tangent = vec![v.to_vec()];
        let mut pre_tangent = vec![Vec::new()];
        for l in 1..depth {
            let p = linear_part(&self.params, &layers[l - 1], &tangent[l - 1]);
            let h = &trace.acts[l];
            tangent.push(p.iter().zip(h).map(|(p, a)| p * (1.0 - a * a)).collect());
            pre_tangent.push(p);
        }
        let head = &layers[depth - 1];
        add_outer(grad, head, dz, &tangent[depth - 1]);
        let mut adj_tangent = transpose_apply(&self.params, head, dz);
        let mut extra: Vec<Vec<f64>> = trace.acts.iter().map(|a| vec![0.0; a.len()]).collect();
        for l in (1..depth).rev() {
            let h = &trace.acts[l];
            let adj_pre: Vec<f64> = adj_tangent.iter().zip(h).map(|(b, a)| b * (1.0 - a * a)).collect();
            for k in 0..h.len() {
                extra[l][k] = -2.0 * h[k] * adj_tangent[k] * pre_tangent[l][k];
            }
            add_outer(grad, &layers[l - 1], &adj_pre, &tangent[l - 1]);
            adj_tangent = transpose_apply(&self.params, &layers[l - 1], &adj_pre);
        }
        let zero = vec![0.0; dz.len()];
        self.backward(trace, &zero, Some(&extra), Some(grad));
    }

    /// Final trunk-layer activations.
    pub fn extract_activations(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.config.capacity_index == 0 {
            return Err(LabError::NoTrunk {
                capacity: self.config.capacity_index,
            });
        }
        self.check_dim(x)?;
        Ok(self.trace(x).acts.pop().expect("trunk output"))
    }

    pub fn trunk_width(&self) -> usize {
        hidden_width(self.config.capacity_index)
    }

    /// Replaces the classification head with zeros (uniform predictions).
    pub fn zero_head(&mut self) {
        let off = self.head_offset;
        self.params[off..].iter_mut().for_each(|p| *p = 0.0);
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_param_count() {
        assert_eq!(ModelConfig::new(0, 8, 2, 0).param_count(), 8 * 2 + 2);
    }

    #[test]
    fn ladder_strictly_grows() {
        let counts: Vec<usize> = (0..=4).map(|k| ModelConfig::new(k, 8, 2, 0).param_count()).collect();
        assert!(counts.windows(2).all(|w| w[0] < w[1]), "{counts:?}");
    }

    #[test]
    fn zero_head_is_uniform() {
        let mut m = init_model(ModelConfig::new(2, 5, 3, 4)).unwrap();
        m.zero_head();
        let p = m.forward(&[1.0, -2.0, 0.5, 3.0, 0.0]).unwrap();
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_wrong_dimension() {
        let m = init_model(ModelConfig::new(1, 3, 2, 0)).unwrap();
        assert!(matches!(m.forward(&[1.0]), Err(LabError::DimensionMismatch { .. })));
        let lin = init_model(ModelConfig::new(0, 3, 2, 0)).unwrap();
        assert!(matches!(lin.extract_activations(&[0.0; 3]), Err(LabError::NoTrunk { .. })));
    }
}
