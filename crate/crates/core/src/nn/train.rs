//! Mini-batch Adam with early stopping on validation loss.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetRecord, DatasetSplit};
use crate::error::{Error, Result};

use super::model::QpaModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
            batch_size: 32,
            max_epochs: 500,
            patience: 20,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.learning_rate > 0.0
            && self.epsilon > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.batch_size > 0
            && self.max_epochs > 0
            && self.patience >= 1;
        if positive {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid training configuration: {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_validation_loss: f64,
    pub stopped_early: bool,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step<'a>(
        &mut self,
        cfg: &TrainConfig,
        params: impl Iterator<Item = &'a mut f64>,
        grads: impl Iterator<Item = &'a f64>,
    ) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for (((p, &g), m), v) in params.zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            *p -= cfg.learning_rate * (*m / c1) / ((*v / c2).sqrt() + cfg.epsilon);
        }
    }
}

/// Trains on `split.train`, early-stopping on `split.validation` (or on the
/// training loss when there is no validation data), and returns the model
/// with the best parameters seen.
pub fn train(mut model: QpaModel, split: &DatasetSplit, cfg: &TrainConfig) -> Result<(QpaModel, TrainHistory)> {
    let history = train_on(&mut model, &split.train, &split.validation, cfg)?;
    Ok((model, history))
}

pub fn train_on(
    model: &mut QpaModel,
    train: &[DatasetRecord],
    validation: &[DatasetRecord],
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let monitor = if validation.is_empty() { train } else { validation };
    let mut adam = Adam::new(model.n_params());
    let mut best_params: Vec<f64> = model.params().copied().collect();
    let mut history = TrainHistory {
        best_validation_loss: model.loss(monitor)?,
        ..Default::default()
    };
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut since_best = 0;
    for epoch in 1..=cfg.max_epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let records: Vec<&DatasetRecord> = batch.iter().map(|&i| &train[i]).collect();
            let (loss, grads) = model.loss_and_gradients(&records)?;
            if !loss.is_finite() {
                return Err(Error::Numerical(format!("non-finite training loss at epoch {epoch}")));
            }
            total += loss * records.len() as f64;
            adam.step(cfg, model.params_mut(), grads.params());
        }
        let validation_loss = model.loss(monitor)?;
        history.epochs.push(EpochStats {
            epoch,
            train_loss: total / train.len() as f64,
            validation_loss,
        });
        log::debug!("epoch {epoch}: train {:.6e}, validation {validation_loss:.6e}", total / train.len() as f64);
        if validation_loss < history.best_validation_loss {
            history.best_validation_loss = validation_loss;
            history.best_epoch = epoch;
            best_params.clear();
            best_params.extend(model.params().copied());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                history.stopped_early = true;
                break;
            }
        }
    }
    for (p, b) in model.params_mut().zip(best_params) {
        *p = b;
    }
    Ok(history)
}
