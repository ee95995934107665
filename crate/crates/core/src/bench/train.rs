use ndarray::Axis;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{adam_step, backward, batch_loss, AdamState, Batch, FeedForwardModel};

/// Per-epoch mean training loss and full validation loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub train_loss: Vec<f64>,
    pub valid_loss: Vec<f64>,
    /// Epoch (0-based) whose parameters were returned.
    pub best_epoch: usize,
    pub epochs_run: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub model: FeedForwardModel,
    pub history: History,
    pub seed: u64,
}

/// Mini-batch Adam training with early stopping on `valid`.
///
/// Rows are reshuffled every epoch from a stream seeded by `seed`. Training
/// stops once the validation loss has failed to improve for more than
/// `patience` consecutive epochs, and the best-validation parameters are
/// returned. Without a validation set the run lasts `max_epochs` and the
/// final parameters are returned.
pub fn train_single(
    config: &ExperimentConfig,
    seed: u64,
    train: &Dataset,
    valid: Option<&Dataset>,
) -> Result<TrainedModel> {
    if train.is_empty() {
        return Err(Error::Data("empty training set".into()));
    }
    let mut model = FeedForwardModel::for_variant(
        config.loss.variant,
        train.dim(),
        &config.model.hidden,
        seed,
        config.model.head_bias_init,
    )?;
    let opt = &config.optimizer;
    let mut adam = AdamState::new(&model, opt.learning_rate, opt.decay)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);

    let valid = valid.filter(|v| !v.is_empty());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = History {
        train_loss: Vec::new(),
        valid_loss: Vec::new(),
        best_epoch: 0,
        epochs_run: 0,
    };
    let mut best: Option<(f64, FeedForwardModel)> = None;
    let mut stale = 0usize;

    for epoch in 0..opt.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, rows) in order.chunks(opt.batch_size).enumerate() {
            let x = train.features.select(Axis(0), rows);
            let y = train.targets.select(Axis(0), rows);
            let batch = Batch::new(x.view(), y.view()).with_index(b);
            let (loss, grads) = backward(&model, batch, &config.loss)?;
            adam_step(&mut adam, &mut model, &grads)?;
            total += loss * rows.len() as f64;
        }
        adam.end_epoch();
        history.train_loss.push(total / train.len() as f64);
        history.epochs_run = epoch + 1;

        let Some(valid) = valid else {
            history.best_epoch = epoch;
            continue;
        };
        let vloss = batch_loss(
            &model,
            Batch::new(valid.features.view(), valid.targets.view()),
            &config.loss,
        )?;
        if !vloss.is_finite() {
            return Err(Error::Divergence {
                batch: 0,
                loss: vloss,
            });
        }
        history.valid_loss.push(vloss);
        match &best {
            Some((b, _)) if vloss >= *b => {
                stale += 1;
                if stale > opt.patience {
                    break;
                }
            }
            _ => {
                best = Some((vloss, model.clone()));
                history.best_epoch = epoch;
                stale = 0;
            }
        }
    }

    if let Some((_, m)) = best {
        model = m;
    }
    Ok(TrainedModel {
        model,
        history,
        seed,
    })
}

/// Trains `config.ensemble_size` members with seeds `base_seed + j`.
pub fn train_ensemble(
    config: &ExperimentConfig,
    base_seed: u64,
    train: &Dataset,
    valid: Option<&Dataset>,
) -> Result<Vec<TrainedModel>> {
    if config.ensemble_size == 0 {
        return Err(Error::Config("ensemble size must be at least 1".into()));
    }
    (0..config.ensemble_size)
        .map(|j| {
            train_single(config, base_seed.wrapping_add(j as u64), train, valid).map_err(|e| {
                Error::Member {
                    member: j,
                    source: Box::new(e),
                }
            })
        })
        .collect()
}
