//! K-fold partitions, the accuracy metric and single-fold runs.

use super::{ExperimentError, Result};
use crate::data::{compute_normalization_stats, encode_record, NormalizationStats, PatientRecord};
use crate::net::{self, Model, ModelConfig, Sample, TrainConfig};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Assignment of every record to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    k: usize,
    assignments: Vec<usize>,
}

/// Shuffles `0..n` with `seed` and deals the indices round-robin into `k`
/// folds, so fold sizes differ by at most one.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<FoldSplit> {
    if k < 2 || k > n {
        return Err(ExperimentError::InvalidK { n, k });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignments = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assignments[i] = pos % k;
    }
    Ok(FoldSplit { k, assignments })
}

impl FoldSplit {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    /// Record indices of fold `fold`, ascending.
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.assignments[i] == fold).collect()
    }

    /// Record indices outside fold `fold`, ascending.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.assignments[i] != fold).collect()
    }

    /// FNV-1a hash of `k` and the assignments.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in std::iter::once(self.k).chain(self.assignments.iter().copied()) {
            for b in (v as u64).to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}

/// Share of items where `prob >= 0.5` agrees with the label.
pub fn accuracy(labels: &[u8], probs: &[f64]) -> Result<f64> {
    if labels.is_empty() {
        return Err(ExperimentError::EmptyInput);
    }
    if labels.len() != probs.len() {
        return Err(ExperimentError::LengthMismatch {
            labels: labels.len(),
            probs: probs.len(),
        });
    }
    let hits = labels
        .iter()
        .zip(probs)
        .filter(|(&l, &p)| u8::from(p >= 0.5) == l)
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold_index: usize,
    pub test_accuracy: f64,
    /// Mean total loss per epoch.
    pub train_loss_trace: Vec<f64>,
    /// Fingerprint of the split the fold was cut from.
    pub split_fingerprint: u64,
}

/// Training and test items of one fold, with the normalisation statistics
/// computed from the training records alone.
pub struct FoldData {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    pub stats: NormalizationStats,
}

fn sample(record: &PatientRecord, stats: &NormalizationStats) -> Sample {
    Sample {
        volume: record.volume.clone(),
        clinical: encode_record(record, stats).into_data(),
        label: record.recurrence,
    }
}

pub fn fold_data(cohort: &[PatientRecord], split: &FoldSplit, fold: usize) -> Result<FoldData> {
    if split.len() != cohort.len() {
        return Err(ExperimentError::InvalidConfig(format!(
            "split covers {} records but the cohort has {}",
            split.len(),
            cohort.len()
        )));
    }
    if fold >= split.k() {
        return Err(ExperimentError::InvalidConfig(format!(
            "fold {fold} out of range for k = {}",
            split.k()
        )));
    }
    let train_idx = split.train_indices(fold);
    let stats = compute_normalization_stats(train_idx.iter().map(|&i| &cohort[i].quantitative))?;
    let train = train_idx.iter().map(|&i| sample(&cohort[i], &stats)).collect();
    let test = split
        .test_indices(fold)
        .iter()
        .map(|&i| sample(&cohort[i], &stats))
        .collect();
    Ok(FoldData { train, test, stats })
}

/// Seed of fold `fold`: `base_seed XOR fold`.
pub fn fold_seed(base_seed: u64, fold: usize) -> u64 {
    base_seed ^ fold as u64
}

/// Trains a fresh model on every fold but `fold` and scores it on `fold`.
///
/// The model initialisation and the mini-batch order both use
/// [`fold_seed`]; the seeds in `model` and `train` are ignored.
pub fn run_fold(
    cohort: &[PatientRecord],
    split: &FoldSplit,
    fold: usize,
    model: &ModelConfig,
    train: &TrainConfig,
    base_seed: u64,
) -> Result<FoldResult> {
    let data = fold_data(cohort, split, fold)?;
    let seed = fold_seed(base_seed, fold);
    let net = Model::build(ModelConfig {
        seed,
        ..model.clone()
    })?;
    let config = TrainConfig {
        seed,
        ..train.clone()
    };
    let outcome = net::train(net, &data.train, &config)?;
    let test: Vec<&Sample> = data.test.iter().collect();
    let probs = outcome.model.predict(&test)?;
    let labels: Vec<u8> = data.test.iter().map(|s| s.label).collect();
    Ok(FoldResult {
        fold_index: fold,
        test_accuracy: accuracy(&labels, &probs)?,
        train_loss_trace: outcome.trace.iter().map(|e| e.total).collect(),
        split_fingerprint: split.fingerprint(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_sizes() {
        let sizes = |n, k| {
            let s = kfold_split(n, k, 1).unwrap();
            let mut v: Vec<usize> = (0..k).map(|f| s.test_indices(f).len()).collect();
            v.sort();
            v
        };
        assert_eq!(sizes(10, 5), [2, 2, 2, 2, 2]);
        assert_eq!(sizes(11, 5), [2, 2, 2, 2, 3]);
        assert!(matches!(kfold_split(5, 6, 0), Err(ExperimentError::InvalidK { n: 5, k: 6 })));
        assert!(matches!(kfold_split(5, 1, 0), Err(ExperimentError::InvalidK { .. })));
    }

    #[test]
    fn split_is_seeded() {
        assert_eq!(kfold_split(50, 5, 3).unwrap(), kfold_split(50, 5, 3).unwrap());
        let a = kfold_split(50, 5, 3).unwrap();
        let b = kfold_split(50, 5, 4).unwrap();
        assert_ne!(a, b);
        assert_ne!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[1, 0, 1, 0], &[0.9, 0.1, 0.8, 0.2]).unwrap(), 1.0);
        assert_eq!(accuracy(&[1, 0], &[0.1, 0.9]).unwrap(), 0.0);
        // a probability of exactly 0.5 predicts class 1
        assert_eq!(accuracy(&[1, 1, 0, 0], &[0.6, 0.4, 0.5, 0.4]).unwrap(), 0.5);
        assert!(matches!(accuracy(&[], &[]), Err(ExperimentError::EmptyInput)));
        assert!(matches!(
            accuracy(&[1], &[0.5, 0.5]),
            Err(ExperimentError::LengthMismatch { .. })
        ));
    }
}
