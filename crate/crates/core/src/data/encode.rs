//! Clinical feature vectors.
//!
//! Layout: 11 z-scored quantitative values, one-hot gender (M, F),
//! tabacology (smoker, non-smoker, former-smoker), induction chemo
//! (yes, no) and concomitant chemo (yes, no), then TNM as `t/4, n/3, m/1`.

use super::schema::{
    Gender, QualitativeClinical, QuantitativeClinical, Tabacology, Tnm, YesNo, NUM_QUANTITATIVE,
};
use super::{DataError, PatientRecord};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

pub const ENCODED_LEN: usize = NUM_QUANTITATIVE
    + Gender::ALL.len()
    + Tabacology::ALL.len()
    + 2 * YesNo::ALL.len()
    + 3;

/// Per-field mean and sample SD of the quantitative inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mean: [f64; NUM_QUANTITATIVE],
    pub sd: [f64; NUM_QUANTITATIVE],
}

/// Mean and sample SD (n - 1) of every quantitative field. A zero SD is
/// stored as 1 so that constant fields encode to 0.
pub fn compute_normalization_stats<'a, I>(records: I) -> Result<NormalizationStats, DataError>
where
    I: IntoIterator<Item = &'a QuantitativeClinical>,
{
    let rows: Vec<[f64; NUM_QUANTITATIVE]> = records.into_iter().map(|q| q.to_array()).collect();
    if rows.len() < 2 {
        return Err(DataError::InsufficientData {
            needed: 2,
            got: rows.len(),
        });
    }
    let n = rows.len() as f64;
    let mut mean = [0.0; NUM_QUANTITATIVE];
    let mut sd = [0.0; NUM_QUANTITATIVE];
    for j in 0..NUM_QUANTITATIVE {
        let m = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / (n - 1.0);
        mean[j] = m;
        sd[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
    }
    Ok(NormalizationStats { mean, sd })
}

fn one_hot(out: &mut Vec<f64>, index: usize, width: usize) {
    out.extend((0..width).map(|i| if i == index { 1.0 } else { 0.0 }));
}

pub fn encode_clinical(
    q: &QuantitativeClinical,
    c: &QualitativeClinical,
    stats: &NormalizationStats,
) -> Tensor {
    let mut v = Vec::with_capacity(ENCODED_LEN);
    for ((x, m), s) in q.to_array().iter().zip(&stats.mean).zip(&stats.sd) {
        v.push((x - m) / s);
    }
    one_hot(&mut v, c.gender.index(), Gender::ALL.len());
    one_hot(&mut v, c.tabacology.index(), Tabacology::ALL.len());
    one_hot(&mut v, c.induction_chemo.index(), YesNo::ALL.len());
    one_hot(&mut v, c.concomitant_chemo.index(), YesNo::ALL.len());
    let Tnm { t, n, m } = c.tnm;
    v.push(f64::from(t) / f64::from(Tnm::MAX.t));
    v.push(f64::from(n) / f64::from(Tnm::MAX.n));
    v.push(f64::from(m) / f64::from(Tnm::MAX.m));
    debug_assert_eq!(v.len(), ENCODED_LEN);
    Tensor::vector(v).expect("encoded clinical vector is finite")
}

pub fn encode_record(record: &PatientRecord, stats: &NormalizationStats) -> Tensor {
    encode_clinical(&record.quantitative, &record.qualitative, stats)
}
