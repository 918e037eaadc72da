//! Prediction-head losses as runtime-selectable strategies.

use crate::entropy::{self, Alpha, BinaryBatch, LossValue, Result};
use crate::registry::Registry;

/// A binary classification loss with a closed-form derivative in the
/// predicted probabilities.
pub trait PredictionLoss: Send + Sync {
    fn name(&self) -> &'static str;

    /// The THC order this loss evaluates at (1 for Shannon).
    fn alpha(&self) -> Alpha;

    fn loss(&self, batch: &BinaryBatch) -> Result<LossValue>;

    /// `d loss / d probs[n]` for every item of the batch.
    fn grad(&self, batch: &BinaryBatch) -> Result<Vec<f64>>;
}

/// Binary Shannon cross-entropy. Ignores the alpha it is built with.
#[derive(Debug, Clone, Copy, Default)]
pub struct ShannonLoss;

impl PredictionLoss for ShannonLoss {
    fn name(&self) -> &'static str {
        "shannon"
    }

    fn alpha(&self) -> Alpha {
        Alpha::SHANNON
    }

    fn loss(&self, batch: &BinaryBatch) -> Result<LossValue> {
        entropy::binary_shannon_loss(batch)
    }

    fn grad(&self, batch: &BinaryBatch) -> Result<Vec<f64>> {
        entropy::binary_thc_loss_grad(batch, Alpha::SHANNON)
    }
}

/// Binary THC cross-entropy of order alpha.
#[derive(Debug, Clone, Copy)]
pub struct ThcLoss {
    pub alpha: Alpha,
}

impl PredictionLoss for ThcLoss {
    fn name(&self) -> &'static str {
        "thc"
    }

    fn alpha(&self) -> Alpha {
        self.alpha
    }

    fn loss(&self, batch: &BinaryBatch) -> Result<LossValue> {
        entropy::binary_thc_loss(batch, self.alpha)
    }

    fn grad(&self, batch: &BinaryBatch) -> Result<Vec<f64>> {
        entropy::binary_thc_loss_grad(batch, self.alpha)
    }
}

pub type LossFactory = fn(Alpha) -> Box<dyn PredictionLoss>;

/// Built-in losses: `shannon` and `thc`.
pub fn registry() -> Registry<LossFactory> {
    let mut reg: Registry<LossFactory> = Registry::new("prediction loss");
    reg.register("shannon", |_| Box::new(ShannonLoss))
        .register("thc", |alpha| Box::new(ThcLoss { alpha }));
    reg
}

/// Resolves `name` against the built-in registry.
pub fn by_name(
    name: &str,
    alpha: Alpha,
) -> std::result::Result<Box<dyn PredictionLoss>, crate::registry::UnknownStrategy> {
    registry().get(name).map(|f| f(alpha))
}
