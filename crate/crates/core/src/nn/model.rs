use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{PIOutput, Variant};

/// Default initial biases of the (upper, lower) heads on the standardized
/// target scale.
pub const DEFAULT_HEAD_BIAS: (f64, f64) = (3.0, -3.0);

/// One fully connected layer; `weights` is `out x in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn n_in(&self) -> usize {
        self.weights.ncols()
    }

    pub fn n_out(&self) -> usize {
        self.weights.nrows()
    }

    fn affine(&self, input: ArrayView2<f64>) -> Array2<f64> {
        input.dot(&self.weights.t()) + &self.bias
    }
}

/// Dense ReLU network with a linear output layer.
///
/// With three outputs the heads are read as (upper, lower, auxiliary logit);
/// with two as (mean, raw variance) for the Gaussian baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedForwardModel {
    layer_sizes: Vec<usize>,
    layers: Vec<Dense>,
    head_bias_init: (f64, f64),
}

/// Activations kept from a forward pass for the reverse sweep.
pub(crate) struct Trace {
    /// `inputs[k]` is the input to layer `k` (post-ReLU for hidden layers).
    pub inputs: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

impl FeedForwardModel {
    /// Builds an interval network: the last layer must have three units.
    ///
    /// Weights are drawn uniformly from `[-r, r]` with `r = sqrt(3 / fan_in)`
    /// (unit-variance scaling for ReLU inputs). The upper and lower head
    /// biases start at `head_bias_init`, the auxiliary bias at zero.
    pub fn new(layer_sizes: &[usize], seed: u64, head_bias_init: (f64, f64)) -> Result<Self> {
        Self::with_heads(layer_sizes, seed, head_bias_init, 3)
    }

    /// Builds a two-output (mean, raw variance) network for the Gaussian
    /// baseline. Both output biases start at zero.
    pub fn new_gaussian(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        Self::with_heads(layer_sizes, seed, (0.0, 0.0), 2)
    }

    /// Builds the head layout required by `variant`.
    pub fn for_variant(
        variant: Variant,
        input_dim: usize,
        hidden: &[usize],
        seed: u64,
        head_bias_init: (f64, f64),
    ) -> Result<Self> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input_dim);
        sizes.extend_from_slice(hidden);
        sizes.push(variant.head_count());
        match variant {
            Variant::GaussNll => Self::new_gaussian(&sizes, seed),
            _ => Self::new(&sizes, seed, head_bias_init),
        }
    }

    fn with_heads(
        layer_sizes: &[usize],
        seed: u64,
        head_bias_init: (f64, f64),
        heads: usize,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Config(
                "a network needs at least an input and an output layer".into(),
            ));
        }
        if let Some(pos) = layer_sizes.iter().position(|&s| s == 0) {
            return Err(Error::Config(format!("layer {pos} has size zero")));
        }
        let last = *layer_sizes.last().unwrap();
        if last != heads {
            return Err(Error::Config(format!(
                "output layer must have {heads} units, got {last}"
            )));
        }
        if !(head_bias_init.0.is_finite() && head_bias_init.1.is_finite()) {
            return Err(Error::Config("head bias init must be finite".into()));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(layer_sizes.len() - 1);
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (3.0 / fan_in as f64).sqrt();
            let weights =
                Array2::from_shape_fn((fan_out, fan_in), |_| rng.random_range(-limit..=limit));
            layers.push(Dense {
                weights,
                bias: Array1::zeros(fan_out),
            });
        }
        if heads == 3 {
            let out = layers.last_mut().unwrap();
            out.bias[0] = head_bias_init.0;
            out.bias[1] = head_bias_init.1;
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            layers,
            head_bias_init,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn head_count(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn head_bias_init(&self) -> (f64, f64) {
        self.head_bias_init
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Visits every parameter in a fixed order: per layer, weights
    /// (row-major) then biases.
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn all_finite(&self) -> bool {
        self.params().all(|p| p.is_finite())
    }

    fn check_input(&self, features: ArrayView2<f64>) -> Result<()> {
        if features.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "model expects {} features, got {}",
                self.input_dim(),
                features.ncols()
            )));
        }
        Ok(())
    }

    /// Raw head values, `n x head_count`.
    pub fn forward_raw(&self, features: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(features)?;
        let mut act = features.to_owned();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            act = layer.affine(act.view());
            if k < last {
                act.mapv_inplace(relu);
            }
        }
        Ok(act)
    }

    /// Decoded (U, L, v, value) per sample, using the coupled value head.
    pub fn forward(&self, features: ArrayView2<f64>) -> Result<PIOutput> {
        self.forward_as(features, Variant::Piven)
    }

    /// Decoded outputs with the value prediction chosen by `variant`.
    pub fn forward_as(&self, features: ArrayView2<f64>, variant: Variant) -> Result<PIOutput> {
        let raw = self.forward_raw(features)?;
        PIOutput::from_heads(raw.view(), variant)
    }

    pub(crate) fn forward_trace(&self, features: ArrayView2<f64>) -> Result<Trace> {
        self.check_input(features)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut act = features.to_owned();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let z = layer.affine(act.view());
            inputs.push(act);
            act = if k < last { z.mapv(relu) } else { z };
        }
        Ok(Trace {
            inputs,
            output: act,
        })
    }
}

/// NaN passes through so that divergence is not masked.
fn relu(x: f64) -> f64 {
    if x < 0.0 {
        0.0
    } else {
        x
    }
}

pub(crate) fn relu_mask(activation: &Array2<f64>, grad: &mut Array2<f64>) {
    ndarray::Zip::from(grad).and(activation).for_each(|g, &a| {
        if a <= 0.0 {
            *g = 0.0;
        }
    });
}

pub(crate) fn column_sums(a: &Array2<f64>) -> Array1<f64> {
    a.sum_axis(Axis(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn zero_input_propagates_head_biases() {
        let model = FeedForwardModel::new(&[13, 50, 3], 7, (2.0, -2.0)).unwrap();
        let out = model.forward(Array2::zeros((1, 13)).view()).unwrap();
        assert_eq!(out.upper, vec![2.0]);
        assert_eq!(out.lower, vec![-2.0]);
        assert_eq!(out.v, vec![0.5]);
        assert_eq!(out.value, vec![0.0]);
    }

    #[test]
    fn same_seed_same_parameters() {
        let a = FeedForwardModel::new(&[13, 50, 3], 7, DEFAULT_HEAD_BIAS).unwrap();
        let b = FeedForwardModel::new(&[13, 50, 3], 7, DEFAULT_HEAD_BIAS).unwrap();
        let c = FeedForwardModel::new(&[13, 50, 3], 8, DEFAULT_HEAD_BIAS).unwrap();
        assert!(a
            .params()
            .zip(b.params())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_layouts() {
        assert!(FeedForwardModel::new(&[13, 50, 2], 1, DEFAULT_HEAD_BIAS).is_err());
        assert!(FeedForwardModel::new(&[13, 0, 3], 1, DEFAULT_HEAD_BIAS).is_err());
        assert!(FeedForwardModel::new(&[3], 1, DEFAULT_HEAD_BIAS).is_err());
        assert!(FeedForwardModel::new_gaussian(&[4, 8, 3], 1).is_err());
        assert!(FeedForwardModel::new_gaussian(&[4, 8, 2], 1).is_ok());
    }

    #[test]
    fn forward_shapes_and_errors() {
        let model = FeedForwardModel::new(&[4, 8, 3], 1, DEFAULT_HEAD_BIAS).unwrap();
        let x = Array2::from_shape_fn((100, 4), |(i, j)| (i as f64 * 0.37 + j as f64).sin() * 5.0);
        let out = model.forward(x.view()).unwrap();
        assert_eq!(out.len(), 100);
        assert!(out.v.iter().all(|&v| v > 0.0 && v < 1.0));
        assert!(matches!(
            model.forward(Array2::zeros((2, 5)).view()),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn init_scale_is_fan_in_bounded() {
        let model = FeedForwardModel::new(&[12, 40, 3], 3, DEFAULT_HEAD_BIAS).unwrap();
        let limit = (3.0f64 / 12.0).sqrt();
        assert!(model.layers()[0].weights.iter().all(|w| w.abs() <= limit));
        assert_eq!(model.param_count(), 12 * 40 + 40 + 40 * 3 + 3);
    }
}
