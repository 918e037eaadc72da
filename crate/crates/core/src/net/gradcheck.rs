//! Exhaustive central-difference verification of [`Model::backward`].

use super::model::{Gradients, Model};
use super::{LossWeights, Result, Sample};
use crate::loss::PredictionLoss;

/// Perturbation applied to each parameter.
pub const STEP: f64 = 1e-4;

/// Smallest step tried when `STEP` carries a parameter across a ReLU or
/// max-pool switch.
pub const MIN_STEP: f64 = 1e-7;

/// Largest accepted relative error.
pub const THRESHOLD: f64 = 1e-4;

/// Magnitude below which errors are measured in absolute rather than
/// relative terms; central differences at `STEP` cannot resolve smaller
/// gradients to four digits.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockCheck {
    pub name: String,
    pub max_rel_error: f64,
    /// Flat index of the worst parameter within the block.
    pub worst_index: usize,
    /// Parameters whose difference needed a step below `STEP` to stay on
    /// one side of every kink.
    pub reduced_steps: usize,
    /// Parameters for which even `MIN_STEP` crossed a kink. Their errors
    /// still count towards `max_rel_error`.
    pub unresolved: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheckReport {
    pub blocks: Vec<BlockCheck>,
    pub threshold: f64,
    pub pass: bool,
}

impl GradientCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.blocks.iter().map(|b| b.max_rel_error).fold(0.0, f64::max)
    }

    pub fn reduced_steps(&self) -> usize {
        self.blocks.iter().map(|b| b.reduced_steps).sum()
    }

    pub fn unresolved(&self) -> usize {
        self.blocks.iter().map(|b| b.unresolved).sum()
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Runs `backward` on `batch` and compares it with central differences of
/// the total loss for every parameter.
pub fn gradient_check(
    model: &Model,
    batch: &[&Sample],
    loss: &dyn PredictionLoss,
    weights: LossWeights,
) -> Result<GradientCheckReport> {
    let tape = model.forward_tape(batch)?;
    let analytic = model.backward(&tape, batch, loss, weights)?;
    gradient_check_against(model, batch, loss, weights, &analytic)
}

/// Compares a supplied gradient with central differences.
pub fn gradient_check_against(
    model: &Model,
    batch: &[&Sample],
    loss: &dyn PredictionLoss,
    weights: LossWeights,
    analytic: &Gradients,
) -> Result<GradientCheckReport> {
    let mut probe = model.clone();
    let eval = |m: &Model| -> Result<(f64, u64)> {
        let tape = m.forward_tape(batch)?;
        Ok((m.losses(&tape, batch, loss, weights)?.total.value(), tape.activation_pattern()))
    };
    let mut blocks = Vec::with_capacity(model.blocks().len());
    for (b, info) in model.blocks().iter().enumerate() {
        let mut worst = (0.0f64, 0usize);
        let (mut reduced_steps, mut unresolved) = (0, 0);
        for i in 0..model.params()[b].len() {
            let orig = model.params()[b][i];
            let mut h = STEP;
            let numeric = loop {
                probe.params_mut()[b][i] = orig + h;
                let (up, up_pattern) = eval(&probe)?;
                probe.params_mut()[b][i] = orig - h;
                let (down, down_pattern) = eval(&probe)?;
                let numeric = (up - down) / (2.0 * h);
                if up_pattern == down_pattern {
                    break numeric;
                }
                if h / 10.0 < MIN_STEP * 0.5 {
                    unresolved += 1;
                    break numeric;
                }
                h /= 10.0;
            };
            probe.params_mut()[b][i] = orig;
            if h < STEP {
                reduced_steps += 1;
            }
            let err = relative_error(analytic.blocks()[b][i], numeric);
            if err > worst.0 || err.is_nan() {
                worst = (err, i);
            }
        }
        blocks.push(BlockCheck {
            name: info.name.clone(),
            max_rel_error: worst.0,
            worst_index: worst.1,
            reduced_steps,
            unresolved,
        });
    }
    let pass = blocks.iter().all(|b| b.max_rel_error < THRESHOLD);
    Ok(GradientCheckReport {
        blocks,
        threshold: THRESHOLD,
        pass,
    })
}
