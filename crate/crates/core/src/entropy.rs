//! Shannon and Tsallis-Havrda-Charvat (THC) entropies and cross-entropies.
//!
//! All quantities are in nats. The THC family is parametrised by `alpha > 0`
//! and recovers the Shannon forms as `alpha -> 1`; values of alpha within
//! [`SHANNON_LIMIT_TOL`] of 1 are evaluated with the Shannon formulas
//! directly, since `(1 - sum) / (alpha - 1)` cancels catastrophically there.
//!
//! Predicted probabilities are clamped away from the boundary before any
//! logarithm or negative power is taken (see [`clamp_probability`]).

use serde::{Deserialize, Serialize};
use std::fmt;

/// `|alpha - 1|` below which the Shannon formulas are used.
pub const SHANNON_LIMIT_TOL: f64 = 1e-6;

/// Absolute tolerance on `sum(p) == 1` for a [`ProbabilityVector`].
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Default clamping margin for predicted probabilities.
pub const DEFAULT_EPSILON: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EntropyError {
    #[error("invalid probability vector: {0}")]
    InvalidSimplex(String),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("argument {0} outside [0, 1]")]
    DomainError(f64),
    #[error("alpha must be a finite positive number, got {0}")]
    InvalidAlpha(f64),
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid batch: {0}")]
    InvalidBatch(String),
    #[error("loss evaluated to a non-finite value")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, EntropyError>;

/// A point on the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(EntropyError::InvalidSimplex("empty vector".into()));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(EntropyError::InvalidSimplex(format!(
                "element {v} outside [0, 1]"
            )));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(EntropyError::InvalidSimplex(format!(
                "elements sum to {sum}"
            )));
        }
        Ok(Self(values))
    }

    /// The uniform distribution on `k` outcomes.
    pub fn uniform(k: usize) -> Result<Self> {
        Self::new(vec![1.0 / k as f64; k])
    }

    /// All mass on outcome `index`.
    pub fn dirac(k: usize, index: usize) -> Result<Self> {
        if index >= k {
            return Err(EntropyError::InvalidSimplex(format!(
                "dirac index {index} out of range for k = {k}"
            )));
        }
        let mut v = vec![0.0; k];
        v[index] = 1.0;
        Self::new(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The THC order parameter.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Alpha(f64);

impl Alpha {
    pub const SHANNON: Alpha = Alpha(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 {
            Ok(Self(value))
        } else {
            Err(EntropyError::InvalidAlpha(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// True when alpha is close enough to 1 to use the Shannon formulas.
    pub fn is_shannon_limit(self) -> bool {
        (self.0 - 1.0).abs() < SHANNON_LIMIT_TOL
    }
}

impl TryFrom<f64> for Alpha {
    type Error = EntropyError;

    fn try_from(value: f64) -> Result<Self> {
        Alpha::new(value)
    }
}

impl From<Alpha> for f64 {
    fn from(a: Alpha) -> f64 {
        a.0
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Binary labels and predicted probabilities of the positive class.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryBatch {
    labels: Vec<u8>,
    probs: Vec<f64>,
}

impl BinaryBatch {
    pub fn new(labels: Vec<u8>, probs: Vec<f64>) -> Result<Self> {
        if labels.is_empty() && probs.is_empty() {
            return Err(EntropyError::EmptyBatch);
        }
        if labels.len() != probs.len() {
            return Err(EntropyError::DimensionMismatch {
                left: labels.len(),
                right: probs.len(),
            });
        }
        if let Some(l) = labels.iter().find(|l| **l > 1) {
            return Err(EntropyError::InvalidBatch(format!("label {l} not in {{0, 1}}")));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(EntropyError::InvalidBatch(format!(
                "probability {p} outside [0, 1]"
            )));
        }
        Ok(Self { labels, probs })
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.labels
            .iter()
            .zip(&self.probs)
            .map(|(&l, &q)| (f64::from(l), clamp_probability(q, DEFAULT_EPSILON)))
    }
}

/// A finite loss or entropy value in nats.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
pub struct LossValue(f64);

impl LossValue {
    pub const ZERO: LossValue = LossValue(0.0);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() {
            Ok(Self(value))
        } else {
            Err(EntropyError::NonFinite)
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for LossValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Clamps `q` into `[epsilon, 1 - epsilon]`.
pub fn clamp_probability(q: f64, epsilon: f64) -> f64 {
    debug_assert!(epsilon > 0.0 && epsilon < 0.5);
    q.max(epsilon).min(1.0 - epsilon)
}

fn check_same_len(q: &ProbabilityVector, p: &ProbabilityVector) -> Result<()> {
    if q.len() != p.len() {
        return Err(EntropyError::DimensionMismatch {
            left: q.len(),
            right: p.len(),
        });
    }
    Ok(())
}

fn xlogx(u: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        u * u.ln()
    }
}

/// `-sum p_i ln p_i`, with `0 ln 0 = 0`.
pub fn shannon_entropy(p: &ProbabilityVector) -> Result<LossValue> {
    let h = -p.as_slice().iter().copied().map(xlogx).sum::<f64>();
    LossValue::new(h.max(0.0))
}

/// `-sum p_i ln q_i`.
///
/// Only the lower bound of the clamp is applied here: `ln(1) = 0` needs no
/// guard, so a prediction equal to the Dirac target scores exactly 0.
pub fn shannon_cross_entropy(q: &ProbabilityVector, p: &ProbabilityVector) -> Result<LossValue> {
    check_same_len(q, p)?;
    let h = q
        .as_slice()
        .iter()
        .zip(p.as_slice())
        .filter(|(_, &pi)| pi > 0.0)
        .map(|(&qi, &pi)| -pi * qi.max(DEFAULT_EPSILON).ln())
        .sum::<f64>();
    LossValue::new(h)
}

/// The THC entropy generator `h(u) = (u^alpha - u) / (alpha - 1)`, or
/// `u ln u` in the Shannon limit.
pub fn h_alpha(u: f64, alpha: Alpha) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) {
        return Err(EntropyError::DomainError(u));
    }
    if alpha.is_shannon_limit() {
        return Ok(xlogx(u));
    }
    let a = alpha.value();
    Ok((u.powf(a) - u) / (a - 1.0))
}

/// `(1 - sum q_i^alpha) / (alpha - 1)`.
pub fn thc_entropy(q: &ProbabilityVector, alpha: Alpha) -> Result<LossValue> {
    if alpha.is_shannon_limit() {
        return shannon_entropy(q);
    }
    let a = alpha.value();
    let s: f64 = q.as_slice().iter().map(|qi| qi.powf(a)).sum();
    LossValue::new(((1.0 - s) / (a - 1.0)).max(0.0))
}

/// `(1 - sum q_i^(alpha - 1) p_i) / (alpha - 1)`.
pub fn thc_cross_entropy(
    q: &ProbabilityVector,
    p: &ProbabilityVector,
    alpha: Alpha,
) -> Result<LossValue> {
    if alpha.is_shannon_limit() {
        return shannon_cross_entropy(q, p);
    }
    check_same_len(q, p)?;
    let a = alpha.value();
    let s: f64 = q
        .as_slice()
        .iter()
        .zip(p.as_slice())
        .filter(|(_, &pi)| pi > 0.0)
        .map(|(&qi, &pi)| qi.max(DEFAULT_EPSILON).powf(a - 1.0) * pi)
        .sum();
    LossValue::new((1.0 - s) / (a - 1.0))
}

/// Mean binary Shannon cross-entropy over the batch.
pub fn binary_shannon_loss(batch: &BinaryBatch) -> Result<LossValue> {
    let n = batch.len() as f64;
    let sum: f64 = batch
        .pairs()
        .map(|(p, q)| p * q.ln() + (1.0 - p) * (1.0 - q).ln())
        .sum();
    LossValue::new(-sum / n)
}

/// Mean binary THC cross-entropy over the batch.
pub fn binary_thc_loss(batch: &BinaryBatch, alpha: Alpha) -> Result<LossValue> {
    if alpha.is_shannon_limit() {
        return binary_shannon_loss(batch);
    }
    let a = alpha.value();
    let n = batch.len() as f64;
    let sum: f64 = batch
        .pairs()
        .map(|(p, q)| q.powf(a - 1.0) * p + (1.0 - q).powf(a - 1.0) * (1.0 - p))
        .sum();
    LossValue::new((1.0 - sum / n) / (a - 1.0))
}

/// Derivative of [`binary_thc_loss`] with respect to each predicted
/// probability, evaluated at the clamped probabilities.
pub fn binary_thc_loss_grad(batch: &BinaryBatch, alpha: Alpha) -> Result<Vec<f64>> {
    let n = batch.len() as f64;
    let grad = if alpha.is_shannon_limit() {
        batch
            .pairs()
            .map(|(p, q)| -(p / q - (1.0 - p) / (1.0 - q)) / n)
            .collect::<Vec<_>>()
    } else {
        let e = alpha.value() - 2.0;
        batch
            .pairs()
            .map(|(p, q)| -(q.powf(e) * p - (1.0 - q).powf(e) * (1.0 - p)) / n)
            .collect()
    };
    if grad.iter().all(|g| g.is_finite()) {
        Ok(grad)
    } else {
        Err(EntropyError::NonFinite)
    }
}
