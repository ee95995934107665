use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::model::{column_sums, relu_mask, FeedForwardModel};
use crate::error::{Error, Result};
use crate::loss::{objective, LossConfig};

/// Gradient of one layer; shapes mirror [`super::Dense`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerGradient {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// One gradient array per parameter tensor of a [`FeedForwardModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientSet {
    pub layers: Vec<LayerGradient>,
}

impl GradientSet {
    pub fn zeros_like(model: &FeedForwardModel) -> Self {
        Self {
            layers: model
                .layers()
                .iter()
                .map(|l| LayerGradient {
                    weights: Array2::zeros(l.weights.raw_dim()),
                    bias: Array1::zeros(l.bias.len()),
                })
                .collect(),
        }
    }

    /// Same parameter order as [`FeedForwardModel::params`].
    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn matches_shape(&self, model: &FeedForwardModel) -> bool {
        self.layers.len() == model.layers().len()
            && self.layers.iter().zip(model.layers()).all(|(g, l)| {
                g.weights.raw_dim() == l.weights.raw_dim() && g.bias.len() == l.bias.len()
            })
    }

    pub fn all_finite(&self) -> bool {
        self.values().all(|g| g.is_finite())
    }
}

/// A mini-batch of standardized features and targets.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    pub features: ArrayView2<'a, f64>,
    pub targets: ArrayView1<'a, f64>,
    /// Position of this batch within its epoch, reported on divergence.
    pub index: usize,
}

impl<'a> Batch<'a> {
    pub fn new(features: ArrayView2<'a, f64>, targets: ArrayView1<'a, f64>) -> Self {
        Self {
            features,
            targets,
            index: 0,
        }
    }

    pub fn with_index(mut self, index: usize) -> Self {
        self.index = index;
        self
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// Loss over `batch` and its exact gradient with respect to every parameter.
pub fn backward(
    model: &FeedForwardModel,
    batch: Batch<'_>,
    config: &LossConfig,
) -> Result<(f64, GradientSet)> {
    if batch.is_empty() {
        return Err(Error::Shape("empty batch".into()));
    }
    if batch.features.nrows() != batch.len() {
        return Err(Error::Shape(format!(
            "{} feature rows against {} targets",
            batch.features.nrows(),
            batch.len()
        )));
    }
    let trace = model.forward_trace(batch.features)?;
    let (loss, mut delta) = objective(trace.output.view(), batch.targets, config)?;
    if !loss.is_finite() {
        return Err(Error::Divergence {
            batch: batch.index,
            loss,
        });
    }

    let layers = model.layers();
    let mut grads = Vec::with_capacity(layers.len());
    for k in (0..layers.len()).rev() {
        let input = &trace.inputs[k];
        let weights = delta.t().dot(input);
        let bias = column_sums(&delta);
        if k > 0 {
            let mut upstream = delta.dot(&layers[k].weights);
            relu_mask(input, &mut upstream);
            delta = upstream;
        }
        grads.push(LayerGradient { weights, bias });
    }
    grads.reverse();
    Ok((loss, GradientSet { layers: grads }))
}

/// Loss of `model` on `batch` without gradients.
pub fn batch_loss(model: &FeedForwardModel, batch: Batch<'_>, config: &LossConfig) -> Result<f64> {
    let raw = model.forward_raw(batch.features)?;
    let (loss, _) = objective(raw.view(), batch.targets, config)?;
    Ok(loss)
}

/// Central finite-difference estimate of every partial derivative.
pub fn finite_diff_grad(
    model: &FeedForwardModel,
    batch: Batch<'_>,
    config: &LossConfig,
    h: f64,
) -> Result<GradientSet> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Config(format!(
            "step size must be positive, got {h}"
        )));
    }
    let mut probe = model.clone();
    let mut grads = GradientSet::zeros_like(model);
    let count = model.param_count();
    let mut out = Vec::with_capacity(count);
    for idx in 0..count {
        let original = *model.params().nth(idx).unwrap();
        set_param(&mut probe, idx, original + h);
        let plus = batch_loss(&probe, batch, config)?;
        set_param(&mut probe, idx, original - h);
        let minus = batch_loss(&probe, batch, config)?;
        set_param(&mut probe, idx, original);
        out.push((plus - minus) / (2.0 * h));
    }
    for (slot, g) in grads.values_mut().zip(out) {
        *slot = g;
    }
    Ok(grads)
}

fn set_param(model: &mut FeedForwardModel, idx: usize, value: f64) {
    if let Some(p) = model.params_mut().nth(idx) {
        *p = value;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::Variant;
    use crate::nn::DEFAULT_HEAD_BIAS;
    use ndarray::Array1;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_case(seed: u64, n: usize) -> (FeedForwardModel, Array2<f64>, Array1<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = FeedForwardModel::new(&[2, 4, 3], seed, DEFAULT_HEAD_BIAS).unwrap();
        for p in model.params_mut() {
            *p = rng.random_range(-1.0..1.0);
        }
        let x = Array2::from_shape_fn((n, 2), |_| rng.random_range(-1.0..1.0));
        let y = Array1::from_shape_fn(n, |_| rng.random_range(-1.0..1.0));
        (model, x, y)
    }

    #[test]
    fn finite_difference_of_a_quadratic() {
        // Single linear layer, input 1, only the upper-head weight w nonzero.
        // MOI with beta = 0 and target 0 gives loss (w/2)^2.
        let mut model = FeedForwardModel::new(&[1, 3], 0, (0.0, 0.0)).unwrap();
        {
            let layer = &mut model.layers_mut()[0];
            layer.weights.fill(0.0);
            layer.bias.fill(0.0);
            layer.weights[[0, 0]] = 3.0;
        }
        let x = Array2::from_elem((1, 1), 1.0);
        let y = Array1::from(vec![0.0]);
        let cfg = LossConfig {
            beta: 0.0,
            variant: Variant::Moi,
            ..LossConfig::default()
        };
        // loss = (w/2)^2, d/dw = w/2 = 1.5
        let fd = finite_diff_grad(&model, Batch::new(x.view(), y.view()), &cfg, 1e-5).unwrap();
        let g = fd.layers[0].weights[[0, 0]];
        assert!((g - 1.5).abs() < 1e-6, "{g}");
    }

    #[test]
    fn zero_step_is_rejected() {
        let (model, x, y) = random_case(1, 4);
        let cfg = LossConfig::default();
        assert!(finite_diff_grad(&model, Batch::new(x.view(), y.view()), &cfg, 0.0).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let (model, x, y) = random_case(11, 16);
        let cfg = LossConfig::default();
        let batch = Batch::new(x.view(), y.view());
        let (_, g) = backward(&model, batch, &cfg).unwrap();
        let fd = finite_diff_grad(&model, batch, &cfg, 1e-5).unwrap();
        assert!(g.matches_shape(&model));
        for (a, b) in g.values().zip(fd.values()) {
            assert!(
                (a - b).abs() <= 1e-4 * a.abs().max(b.abs()).max(1e-3),
                "{a} vs {b}"
            );
        }
    }

    #[test]
    fn beta_one_leaves_aux_head_untouched() {
        let (model, x, y) = random_case(5, 16);
        let cfg = LossConfig {
            beta: 1.0,
            ..LossConfig::default()
        };
        let (_, g) = backward(&model, Batch::new(x.view(), y.view()), &cfg).unwrap();
        let out = g.layers.last().unwrap();
        assert!(out.weights.row(2).iter().all(|&w| w == 0.0));
        assert_eq!(out.bias[2], 0.0);
    }

    #[test]
    fn duplicated_rows_keep_value_loss_gradient() {
        let (model, x, y) = random_case(9, 8);
        let cfg = LossConfig {
            beta: 0.0,
            ..LossConfig::default()
        };
        let x2 = ndarray::concatenate![ndarray::Axis(0), x, x];
        let y2 = ndarray::concatenate![ndarray::Axis(0), y, y];
        let (l1, g1) = backward(&model, Batch::new(x.view(), y.view()), &cfg).unwrap();
        let (l2, g2) = backward(&model, Batch::new(x2.view(), y2.view()), &cfg).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        for (a, b) in g1.values().zip(g2.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_loss_reports_batch_index() {
        let (mut model, x, y) = random_case(2, 4);
        model.layers_mut()[0].bias[0] = f64::NAN;
        let cfg = LossConfig {
            beta: 0.0,
            ..LossConfig::default()
        };
        let err = backward(&model, Batch::new(x.view(), y.view()).with_index(7), &cfg).unwrap_err();
        assert!(matches!(err, Error::Divergence { batch: 7, .. }));
    }
}
