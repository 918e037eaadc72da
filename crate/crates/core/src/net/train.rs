use super::model::Model;
use super::optim::{self, OptimizerSettings};
use super::{LossWeights, NetError, Result, Sample};
use crate::entropy::Alpha;
use crate::loss;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub alpha: Alpha,
    /// Name in [`crate::loss::registry`].
    pub loss: String,
    /// Name in [`crate::net::optim::registry`].
    pub optimizer: String,
    pub loss_weights: LossWeights,
    /// Seed of the mini-batch shuffling.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 8,
            learning_rate: 1e-3,
            alpha: Alpha::SHANNON,
            loss: "thc".into(),
            optimizer: "adam".into(),
            loss_weights: LossWeights::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(NetError::InvalidTrainConfig(m.into()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        self.loss_weights.validate()?;
        loss::registry().get(&self.loss)?;
        optim::registry().get(&self.optimizer)?;
        Ok(())
    }
}

/// Mean losses over one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub rec: f64,
    pub pred: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub trace: Vec<EpochLoss>,
}

/// Mini-batch training of `model` on `data`.
///
/// Items are reshuffled every epoch from `config.seed`; the last batch of
/// an epoch may be short. Training stops with [`NetError::NonFiniteLoss`]
/// as soon as a loss or gradient stops being finite.
pub fn train(mut model: Model, data: &[Sample], config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if data.is_empty() {
        return Err(NetError::EmptyDataset);
    }
    if let Some(s) = data.iter().find(|s| s.label > 1) {
        return Err(NetError::InvalidTrainConfig(format!(
            "label {} not in {{0, 1}}",
            s.label
        )));
    }
    let pred_loss = loss::by_name(&config.loss, config.alpha)?;
    let mut optimizer = optim::registry().get(&config.optimizer)?(&OptimizerSettings {
        learning_rate: config.learning_rate,
    });
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut trace = Vec::with_capacity(config.epochs);
    let weights = config.loss_weights;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let (mut rec, mut pred, mut total) = (0.0, 0.0, 0.0);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &data[i]).collect();
            let numeric = |e: NetError| match e {
                NetError::Entropy(_) => NetError::NonFiniteLoss { epoch },
                other => other,
            };
            let tape = model.forward_tape(&batch)?;
            let parts = model
                .losses(&tape, &batch, pred_loss.as_ref(), weights)
                .map_err(numeric)?;
            let grads = model
                .backward(&tape, &batch, pred_loss.as_ref(), weights)
                .map_err(numeric)?;
            if !grads.blocks().iter().flatten().all(|g| g.is_finite()) {
                return Err(NetError::NonFiniteLoss { epoch });
            }
            let n = batch.len() as f64;
            rec += parts.rec.value() * n;
            pred += parts.pred.value() * n;
            total += parts.total.value() * n;
            optimizer.step(model.params_mut(), &grads);
        }
        let n = data.len() as f64;
        let row = EpochLoss {
            epoch,
            rec: rec / n,
            pred: pred / n,
            total: total / n,
        };
        log::debug!(
            "epoch {epoch}: rec {:.6} pred {:.6} total {:.6}",
            row.rec,
            row.pred,
            row.total
        );
        trace.push(row);
    }
    Ok(TrainOutcome { model, trace })
}

/// Writes the trace as CSV `epoch,rec_loss,pred_loss,total_loss`.
pub fn write_trace_csv<W: Write>(trace: &[EpochLoss], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "rec_loss", "pred_loss", "total_loss"])?;
    for r in trace {
        w.write_record([
            r.epoch.to_string(),
            r.rec.to_string(),
            r.pred.to_string(),
            r.total.to_string(),
        ])?;
    }
    w.flush()
}
