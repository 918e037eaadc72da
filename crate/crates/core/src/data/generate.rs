//! Synthetic cohorts with a planted recurrence signal.
//!
//! Each patient gets clinical values drawn from the data card below and a
//! volume holding a noisy background plus one Gaussian-profile ellipse. An
//! image latent `u ~ N(0, 1)` sets the ellipse's peak intensity and radius.
//! The recurrence score is
//!
//! ```text
//! s = signal * (c + 0.2 u) + e,   e ~ N(0, 1)
//! ```
//!
//! where `c` is a cohort-standardised linear function of hemoglobin,
//! albumin, lymphocytes and TNM stage. The top half of scores is labelled 1
//! and labels are then flipped with probability `label_noise`.
//!
//! Data card (simulation inputs, not clinical claims):
//!
//! | field | head-neck-like | lung-like |
//! |---|---|---|
//! | hemoglobin g/dL | N(13.5, 1.5) | N(12.8, 1.6) |
//! | lymphocytes 10^9/L | logN(ln 1.5, 0.4) | logN(ln 1.4, 0.45) |
//! | leucocytes 10^9/L | logN(ln 7, 0.3) | logN(ln 8, 0.3) |
//! | thrombocytes 10^9/L | N(250, 60) | N(270, 70) |
//! | albumin g/L | N(40, 5) | N(38, 5) |
//! | fractions | 30..=35 | 20..=33 |
//! | dose/fraction Gy | N(2.0, 0.05) | N(2.1, 0.2) |
//! | weight start kg | N(70, 12) | N(68, 12) |
//! | weight loss | N(6%, 3%) | N(4%, 3%) |
//! | male | 75% | 65% |
//! | smoker/non/former | 40/20/40% | 50/10/40% |
//! | induction chemo | 30% | 20% |
//! | concomitant chemo | 60% | 70% |
//!
//! Total dose is fractions x dose/fraction perturbed by at most 3%;
//! treatment duration is `ceil(1.4 x fractions)` plus 0 to 7 days of breaks.

use super::schema::{
    Gender, PatientRecord, QualitativeClinical, QuantitativeClinical, Tabacology, Tnm, YesNo,
};
use super::DataError;
use crate::tensor::Tensor;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Smallest accepted cohort.
pub const MIN_PATIENTS: usize = 10;

/// Volumes must survive this many 2x2 poolings.
pub const SPATIAL_MULTIPLE: usize = 8;

/// Weight of the image latent relative to the clinical latent.
pub const IMAGE_WEIGHT: f64 = 0.2;

/// Accepted fraction of positive labels.
pub const CLASS_BALANCE: (f64, f64) = (0.35, 0.65);

pub const PRESETS: [&str; 3] = ["head-neck-like", "lung-like", "separable"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CohortKind {
    HeadNeckLike,
    LungLike,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortConfig {
    pub n_patients: usize,
    pub cohort_kind: CohortKind,
    /// `(H, W, C)`.
    pub image_shape: [usize; 3],
    pub signal_strength: f64,
    pub label_noise: f64,
    pub seed: u64,
}

impl CohortConfig {
    /// `head-neck-like` (434 patients), `lung-like` (146) or `separable`
    /// (200 patients, strong signal, no label noise).
    pub fn preset(name: &str) -> Result<Self, DataError> {
        let base = |n_patients, cohort_kind| CohortConfig {
            n_patients,
            cohort_kind,
            image_shape: [32, 32, 1],
            signal_strength: 1.0,
            label_noise: 0.1,
            seed: 0,
        };
        match name {
            "head-neck-like" => Ok(base(434, CohortKind::HeadNeckLike)),
            "lung-like" => Ok(base(146, CohortKind::LungLike)),
            "separable" => Ok(CohortConfig {
                signal_strength: 30.0,
                label_noise: 0.0,
                ..base(200, CohortKind::HeadNeckLike)
            }),
            other => Err(DataError::InvalidConfig(format!(
                "unknown preset {other:?}; expected one of {}",
                PRESETS.join(", ")
            ))),
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: String| Err(DataError::InvalidConfig(m));
        if self.n_patients < MIN_PATIENTS {
            return bad(format!(
                "n_patients must be at least {MIN_PATIENTS}, got {}",
                self.n_patients
            ));
        }
        let [h, w, c] = self.image_shape;
        if h == 0 || w == 0 || c == 0 || h % SPATIAL_MULTIPLE != 0 || w % SPATIAL_MULTIPLE != 0 {
            return bad(format!(
                "image height and width must be positive multiples of {SPATIAL_MULTIPLE}, got {:?}",
                self.image_shape
            ));
        }
        if !(self.signal_strength.is_finite() && self.signal_strength >= 0.0) {
            return bad(format!("signal_strength must be >= 0, got {}", self.signal_strength));
        }
        if !(0.0..=0.5).contains(&self.label_noise) {
            return bad(format!("label_noise must be in [0, 0.5], got {}", self.label_noise));
        }
        Ok(())
    }
}

struct KindParams {
    hemoglobin: (f64, f64),
    lymphocytes: (f64, f64),
    leucocytes: (f64, f64),
    thrombocytes: (f64, f64),
    albumin: (f64, f64),
    fractions: (u32, u32),
    dose_per_fraction: (f64, f64),
    weight: (f64, f64),
    weight_loss: (f64, f64),
    male: f64,
    tabacology: [f64; 3],
    induction: f64,
    concomitant: f64,
    t: [f64; 5],
    n: [f64; 4],
    m: f64,
}

fn params(kind: CohortKind) -> KindParams {
    match kind {
        CohortKind::HeadNeckLike => KindParams {
            hemoglobin: (13.5, 1.5),
            lymphocytes: (1.5f64.ln(), 0.4),
            leucocytes: (7f64.ln(), 0.3),
            thrombocytes: (250.0, 60.0),
            albumin: (40.0, 5.0),
            fractions: (30, 35),
            dose_per_fraction: (2.0, 0.05),
            weight: (70.0, 12.0),
            weight_loss: (0.06, 0.03),
            male: 0.75,
            tabacology: [0.4, 0.2, 0.4],
            induction: 0.3,
            concomitant: 0.6,
            t: [0.05, 0.2, 0.3, 0.25, 0.2],
            n: [0.3, 0.2, 0.35, 0.15],
            m: 0.05,
        },
        CohortKind::LungLike => KindParams {
            hemoglobin: (12.8, 1.6),
            lymphocytes: (1.4f64.ln(), 0.45),
            leucocytes: (8f64.ln(), 0.3),
            thrombocytes: (270.0, 70.0),
            albumin: (38.0, 5.0),
            fractions: (20, 33),
            dose_per_fraction: (2.1, 0.2),
            weight: (68.0, 12.0),
            weight_loss: (0.04, 0.03),
            male: 0.65,
            tabacology: [0.5, 0.1, 0.4],
            induction: 0.2,
            concomitant: 0.7,
            t: [0.05, 0.25, 0.3, 0.25, 0.15],
            n: [0.3, 0.25, 0.3, 0.15],
            m: 0.1,
        },
    }
}

fn normal(rng: &mut ChaCha8Rng, (mean, sd): (f64, f64)) -> f64 {
    Normal::new(mean, sd).expect("valid normal").sample(rng)
}

fn pick(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let u: f64 = rng.random::<f64>() * weights.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

fn yes_no(rng: &mut ChaCha8Rng, p: f64) -> YesNo {
    if rng.random_bool(p) {
        YesNo::Yes
    } else {
        YesNo::No
    }
}

fn clinical(rng: &mut ChaCha8Rng, p: &KindParams) -> (QuantitativeClinical, QualitativeClinical) {
    let num_fractions = rng.random_range(p.fractions.0..=p.fractions.1);
    let avg_dose_per_fraction = normal(rng, p.dose_per_fraction).clamp(1.5, 3.0);
    let total_dose = avg_dose_per_fraction
        * f64::from(num_fractions)
        * (1.0 + rng.random_range(-0.03..=0.03));
    let treatment_duration =
        (1.4 * f64::from(num_fractions)).ceil() + f64::from(rng.random_range(0..=7u32));
    let weight_start = normal(rng, p.weight).max(35.0);
    let weight_end = weight_start * (1.0 - normal(rng, p.weight_loss).clamp(-0.05, 0.25));
    let q = QuantitativeClinical {
        hemoglobin: normal(rng, p.hemoglobin).max(6.0),
        lymphocytes: normal(rng, p.lymphocytes).exp(),
        leucocytes: normal(rng, p.leucocytes).exp(),
        thrombocytes: normal(rng, p.thrombocytes).max(20.0),
        albumin: normal(rng, p.albumin).max(15.0),
        treatment_duration,
        total_dose,
        num_fractions,
        avg_dose_per_fraction,
        weight_start,
        weight_end,
    };
    let c = QualitativeClinical {
        gender: if rng.random_bool(p.male) {
            Gender::Male
        } else {
            Gender::Female
        },
        tabacology: Tabacology::ALL[pick(rng, &p.tabacology)],
        induction_chemo: yes_no(rng, p.induction),
        concomitant_chemo: yes_no(rng, p.concomitant),
        tnm: Tnm {
            t: pick(rng, &p.t) as u8,
            n: pick(rng, &p.n) as u8,
            m: u8::from(rng.random_bool(p.m)),
        },
    };
    (q, c)
}

/// Unstandardised clinical risk: anaemia, hypoalbuminaemia, lymphopenia
/// and advanced stage all raise it.
fn clinical_risk(q: &QuantitativeClinical, c: &QualitativeClinical) -> f64 {
    let stage = f64::from(c.tnm.t) / 4.0 + f64::from(c.tnm.n) / 3.0 + f64::from(c.tnm.m);
    -q.hemoglobin / 1.5 - q.albumin / 5.0 - q.lymphocytes / 0.6 + stage / 0.5
}

/// Background noise plus one elliptical Gaussian blob centred on a pixel,
/// whose peak and radius grow linearly with `u` (clipped). Values are
/// clipped to `[0, 1]` and rounded to `f32` so that volume files store
/// them exactly.
fn volume(rng: &mut ChaCha8Rng, shape: [usize; 3], u: f64) -> Tensor {
    let [h, w, ch] = shape;
    let amplitude = (0.55 + 0.12 * u).clamp(0.15, 0.85);
    let radius = h.min(w) as f64 * (0.09 + 0.02 * u).clamp(0.04, 0.14);
    let aspect: f64 = rng.random_range(0.7..1.4);
    let (ry, rx) = (radius * aspect.sqrt(), radius / aspect.sqrt());
    let cy = (h as f64 * rng.random_range(0.3..0.7)).floor() + 0.5;
    let cx = (w as f64 * rng.random_range(0.3..0.7)).floor() + 0.5;
    let background = Normal::new(0.1, 0.03).expect("valid normal");
    let mut data = Vec::with_capacity(h * w * ch);
    for y in 0..h {
        for x in 0..w {
            let dy = (y as f64 + 0.5 - cy) / ry;
            let dx = (x as f64 + 0.5 - cx) / rx;
            let blob = amplitude * (-0.5 * (dy * dy + dx * dx)).exp();
            for c in 0..ch {
                let atten = 1.0 - 0.2 * c as f64 / ch as f64;
                let v: f64 = background.sample(rng) + atten * blob;
                data.push(f64::from(v.clamp(0.0, 1.0) as f32));
            }
        }
    }
    Tensor::new(shape.to_vec(), data).expect("generated volume is finite")
}

fn standardise(values: &mut [f64]) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let sd = if sd > 0.0 { sd } else { 1.0 };
    for v in values {
        *v = (*v - mean) / sd;
    }
}

/// Labels: top half of `scores` is 1, then each label flips with
/// probability `noise`. Flips are redrawn until the class balance lies in
/// [`CLASS_BALANCE`].
fn labels(rng: &mut ChaCha8Rng, scores: &[f64], noise: f64) -> Vec<u8> {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut base = vec![0u8; n];
    for &i in &order[n - n / 2..] {
        base[i] = 1;
    }
    loop {
        let out: Vec<u8> = base
            .iter()
            .map(|&l| if rng.random_bool(noise) { 1 - l } else { l })
            .collect();
        let frac = out.iter().map(|&l| f64::from(l)).sum::<f64>() / n as f64;
        if (CLASS_BALANCE.0..=CLASS_BALANCE.1).contains(&frac) {
            return out;
        }
    }
}

pub fn generate_cohort(config: &CohortConfig) -> Result<Vec<PatientRecord>, DataError> {
    config.validate()?;
    let p = params(config.cohort_kind);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.n_patients;
    let mut clin = Vec::with_capacity(n);
    let mut volumes = Vec::with_capacity(n);
    let mut image_latent = Vec::with_capacity(n);
    let mut risk = Vec::with_capacity(n);
    for _ in 0..n {
        let (q, c) = clinical(&mut rng, &p);
        let u = normal(&mut rng, (0.0, 1.0));
        volumes.push(volume(&mut rng, config.image_shape, u));
        risk.push(clinical_risk(&q, &c));
        clin.push((q, c));
        image_latent.push(u);
    }
    standardise(&mut risk);
    let scores: Vec<f64> = risk
        .iter()
        .zip(&image_latent)
        .map(|(c, u)| config.signal_strength * (c + IMAGE_WEIGHT * u) + normal(&mut rng, (0.0, 1.0)))
        .collect();
    let labels = labels(&mut rng, &scores, config.label_noise);
    let width = n.to_string().len().max(4);
    Ok(clin
        .into_iter()
        .zip(volumes)
        .zip(labels)
        .enumerate()
        .map(|(i, (((quantitative, qualitative), volume), recurrence))| PatientRecord {
            id: format!("P{i:0width$}"),
            volume,
            quantitative,
            qualitative,
            recurrence,
        })
        .collect())
}
