use serde::{Deserialize, Serialize};

use super::backward::GradientSet;
use super::model::FeedForwardModel;
use crate::error::{Error, Result};

/// Adam with bias-corrected moments and per-epoch exponential decay of the
/// learning rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub first_moment: GradientSet,
    pub second_moment: GradientSet,
    pub step: u64,
    pub learning_rate: f64,
    /// Multiplier applied to the learning rate by [`AdamState::end_epoch`].
    pub decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(model: &FeedForwardModel, learning_rate: f64, decay: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        if !(decay > 0.0 && decay <= 1.0) {
            return Err(Error::Config(format!(
                "decay must lie in (0, 1], got {decay}"
            )));
        }
        Ok(Self {
            first_moment: GradientSet::zeros_like(model),
            second_moment: GradientSet::zeros_like(model),
            step: 0,
            learning_rate,
            decay,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        })
    }

    pub fn end_epoch(&mut self) {
        self.learning_rate *= self.decay;
    }
}

/// Applies one Adam update to `model` in place.
pub fn adam_step(
    state: &mut AdamState,
    model: &mut FeedForwardModel,
    gradients: &GradientSet,
) -> Result<()> {
    if !gradients.matches_shape(model) || !state.first_moment.matches_shape(model) {
        return Err(Error::Shape(
            "gradient or optimizer state does not match the model".into(),
        ));
    }
    if !gradients.all_finite() {
        return Err(Error::NonFinite("gradient"));
    }

    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let correction1 = 1.0 - b1.powi(t);
    let correction2 = 1.0 - b2.powi(t);
    let lr = state.learning_rate;
    let eps = state.epsilon;

    let moments = state
        .first_moment
        .values_mut()
        .zip(state.second_moment.values_mut());
    for ((p, &g), (m, v)) in model.params_mut().zip(gradients.values()).zip(moments) {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / correction1;
        let v_hat = *v / correction2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }

    if !model.all_finite() {
        return Err(Error::NonFinite("parameters after optimizer step"));
    }
    Ok(())
}
