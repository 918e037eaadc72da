//! A small multitask encoder/decoder network with hand-derived gradients.
//!
//! The backbone is a U-Net: each encoder level is a 3x3 convolution with
//! ReLU followed by 2x2 max-pooling; each decoder level upsamples, joins the
//! matching encoder features by channel concatenation and convolves. A
//! linear 3x3 convolution produces the reconstruction. The pooled
//! bottleneck, flattened and joined with the clinical vector, feeds a dense
//! ReLU branch ending in a sigmoid that predicts recurrence.

pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod model;
pub mod optim;
pub mod train;

pub use gradcheck::{gradient_check, gradient_check_against, GradientCheckReport};
pub use model::{BlockRole, Gradients, Model, ModelConfig, MultitaskOutput, Tape};
pub use optim::{Optimizer, OptimizerSettings};
pub use train::{train, EpochLoss, TrainConfig, TrainOutcome};

use crate::entropy::{EntropyError, LossValue};
use crate::registry::UnknownStrategy;
use crate::tensor::{Tensor, TensorError};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("invalid training config: {0}")]
    InvalidTrainConfig(String),
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },
    #[error("tape does not match this model and batch; run forward again")]
    StaleTape,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("non-finite loss in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    UnknownStrategy(#[from] UnknownStrategy),
}

pub type Result<T> = std::result::Result<T, NetError>;

/// One training or evaluation item.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// `(H, W, C)` volume; also the reconstruction target.
    pub volume: Tensor,
    pub clinical: Vec<f64>,
    pub label: u8,
}

/// Weights of the reconstruction and prediction terms in the total loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub rec: f64,
    pub pred: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { rec: 1.0, pred: 1.0 }
    }
}

impl LossWeights {
    pub fn new(rec: f64, pred: f64) -> Self {
        Self { rec, pred }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |w: f64| w.is_finite() && w >= 0.0;
        if !ok(self.rec) || !ok(self.pred) || (self.rec == 0.0 && self.pred == 0.0) {
            return Err(NetError::InvalidTrainConfig(format!(
                "loss weights must be non-negative and not both zero, got ({}, {})",
                self.rec, self.pred
            )));
        }
        Ok(())
    }
}

/// Reconstruction, prediction and weighted total loss of one batch.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub rec: LossValue,
    pub pred: LossValue,
    pub total: LossValue,
}

/// `(1/N) sum_n ||y_n - yhat_n||^2`, where the first axis indexes items.
pub fn mse_loss(target: &Tensor, prediction: &Tensor) -> Result<LossValue> {
    if target.shape() != prediction.shape() {
        return Err(NetError::ShapeMismatch {
            expected: target.shape().to_vec(),
            got: prediction.shape().to_vec(),
        });
    }
    let n = target.shape()[0] as f64;
    let ss: f64 = target
        .data()
        .iter()
        .zip(prediction.data())
        .map(|(y, p)| (y - p) * (y - p))
        .sum();
    Ok(LossValue::new(ss / n)?)
}

/// `w_rec * rec + w_pred * pred`.
pub fn total_loss(rec: LossValue, pred: LossValue, weights: LossWeights) -> LossValue {
    LossValue::new(weights.rec * rec.value() + weights.pred * pred.value())
        .unwrap_or(LossValue::ZERO)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn mse_examples() {
        let y = t(&[1, 2], &[1.0, 2.0]);
        assert_eq!(mse_loss(&y, &y).unwrap().value(), 0.0);
        assert_eq!(mse_loss(&y, &t(&[1, 2], &[0.0, 0.0])).unwrap().value(), 5.0);
        assert_eq!(
            mse_loss(&t(&[2, 1], &[1.0, 3.0]), &t(&[2, 1], &[0.0, 0.0])).unwrap().value(),
            5.0
        );
        assert!(matches!(
            mse_loss(&y, &t(&[2, 1], &[0.0, 0.0])),
            Err(NetError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn total_loss_examples() {
        let l = |v| LossValue::new(v).unwrap();
        let close = |a: LossValue, b: f64| (a.value() - b).abs() < 1e-15;
        assert!(close(total_loss(l(0.3), l(0.5), LossWeights::default()), 0.8));
        assert!(close(total_loss(l(0.3), l(0.5), LossWeights::new(0.0, 1.0)), 0.5));
        for (x, y) in [(0.1, 2.0), (3.5, 0.25), (0.0, 7.0)] {
            assert_eq!(
                total_loss(l(x), l(y), LossWeights::default()),
                total_loss(l(y), l(x), LossWeights::default())
            );
        }
    }

    #[test]
    fn weight_validation() {
        assert!(LossWeights::default().validate().is_ok());
        assert!(LossWeights::new(0.0, 1.0).validate().is_ok());
        assert!(LossWeights::new(0.0, 0.0).validate().is_err());
        assert!(LossWeights::new(-1.0, 1.0).validate().is_err());
    }
}
