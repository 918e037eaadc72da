//! Logistic-regression reference classifier.
//!
//! Used to check how much signal a cohort carries, independently of the
//! network: features are the encoded clinical vector plus the mean and
//! maximum volume intensity.

use super::encode::{compute_normalization_stats, encode_record};
use super::{DataError, PatientRecord};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ITERATIONS: usize = 3000;
const LEARNING_RATE: f64 = 0.5;
const L2: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct LogisticModel {
    shift: Vec<f64>,
    scale: Vec<f64>,
    weights: Vec<f64>,
    bias: f64,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl LogisticModel {
    /// Full-batch gradient descent on standardised features.
    pub fn fit(x: &[Vec<f64>], y: &[u8]) -> Self {
        let n = x.len() as f64;
        let d = x[0].len();
        let mut shift = vec![0.0; d];
        let mut scale = vec![1.0; d];
        for j in 0..d {
            let m = x.iter().map(|r| r[j]).sum::<f64>() / n;
            let sd = (x.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n).sqrt();
            shift[j] = m;
            scale[j] = if sd > 1e-12 { sd } else { 1.0 };
        }
        let z: Vec<Vec<f64>> = x
            .iter()
            .map(|r| (0..d).map(|j| (r[j] - shift[j]) / scale[j]).collect())
            .collect();
        let mut w = vec![0.0; d];
        let mut b = 0.0;
        let mut gw = vec![0.0; d];
        for _ in 0..ITERATIONS {
            gw.iter_mut().for_each(|g| *g = 0.0);
            let mut gb = 0.0;
            for (row, &label) in z.iter().zip(y) {
                let p = sigmoid(b + row.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>());
                let e = p - f64::from(label);
                gb += e;
                for (g, a) in gw.iter_mut().zip(row) {
                    *g += e * a;
                }
            }
            for (wj, g) in w.iter_mut().zip(&gw) {
                *wj -= LEARNING_RATE * (g / n + L2 * *wj);
            }
            b -= LEARNING_RATE * gb / n;
        }
        Self {
            shift,
            scale,
            weights: w,
            bias: b,
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let z: f64 = x
            .iter()
            .zip(&self.shift)
            .zip(&self.scale)
            .zip(&self.weights)
            .map(|(((v, s), c), w)| (v - s) / c * w)
            .sum();
        sigmoid(self.bias + z)
    }
}

fn features(r: &PatientRecord, stats: &super::NormalizationStats) -> Vec<f64> {
    let mut f = encode_record(r, stats).into_data();
    let v = r.volume.data();
    f.push(v.iter().sum::<f64>() / v.len() as f64);
    f.push(v.iter().copied().fold(f64::MIN, f64::max));
    f
}

/// Accuracy on a held-out `1 - train_fraction` share of `records` after
/// fitting on the rest. Normalisation uses the training share only.
pub fn holdout_accuracy(
    records: &[PatientRecord],
    train_fraction: f64,
    seed: u64,
) -> Result<f64, DataError> {
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = ((records.len() as f64) * train_fraction).round() as usize;
    let (train, test) = order.split_at(cut.clamp(2, records.len() - 1));
    let stats = compute_normalization_stats(train.iter().map(|&i| &records[i].quantitative))?;
    let x: Vec<Vec<f64>> = train.iter().map(|&i| features(&records[i], &stats)).collect();
    let y: Vec<u8> = train.iter().map(|&i| records[i].recurrence).collect();
    let model = LogisticModel::fit(&x, &y);
    let hits = test
        .iter()
        .filter(|&&i| {
            let p = model.predict(&features(&records[i], &stats));
            u8::from(p >= 0.5) == records[i].recurrence
        })
        .count();
    Ok(hits as f64 / test.len() as f64)
}
