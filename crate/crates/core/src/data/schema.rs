//! Clinical feature schema and patient records.

use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use super::DataError;

/// Number of quantitative clinical inputs.
pub const NUM_QUANTITATIVE: usize = 11;

/// Quantitative field names in encoding order.
pub const QUANTITATIVE_FIELDS: [&str; NUM_QUANTITATIVE] = [
    "hemoglobin",
    "lymphocytes",
    "leucocytes",
    "thrombocytes",
    "albumin",
    "treatment_duration",
    "total_dose",
    "num_fractions",
    "avg_dose_per_fraction",
    "weight_start",
    "weight_end",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantitativeClinical {
    /// g/dL
    pub hemoglobin: f64,
    /// 10^9/L
    pub lymphocytes: f64,
    /// 10^9/L
    pub leucocytes: f64,
    /// 10^9/L
    pub thrombocytes: f64,
    /// g/L
    pub albumin: f64,
    /// days
    pub treatment_duration: f64,
    /// Gy
    pub total_dose: f64,
    pub num_fractions: u32,
    /// Gy
    pub avg_dose_per_fraction: f64,
    /// kg
    pub weight_start: f64,
    /// kg
    pub weight_end: f64,
}

impl QuantitativeClinical {
    /// Values in [`QUANTITATIVE_FIELDS`] order.
    pub fn to_array(&self) -> [f64; NUM_QUANTITATIVE] {
        [
            self.hemoglobin,
            self.lymphocytes,
            self.leucocytes,
            self.thrombocytes,
            self.albumin,
            self.treatment_duration,
            self.total_dose,
            f64::from(self.num_fractions),
            self.avg_dose_per_fraction,
            self.weight_start,
            self.weight_end,
        ]
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let values = self.to_array();
        if let Some((name, v)) = QUANTITATIVE_FIELDS
            .iter()
            .zip(values)
            .find(|(_, v)| !(v.is_finite() && *v >= 0.0))
        {
            return Err(DataError::InvalidRecord(format!("{name} = {v}")));
        }
        if self.num_fractions == 0 {
            return Err(DataError::InvalidRecord("num_fractions must be >= 1".into()));
        }
        Ok(())
    }
}

macro_rules! category {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "&'static str")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            /// All categories in one-hot order.
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }

            pub fn index(self) -> usize {
                Self::ALL.iter().position(|c| *c == self).unwrap()
            }
        }

        impl FromStr for $name {
            type Err = DataError;

            fn from_str(s: &str) -> Result<Self, DataError> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(DataError::InvalidRecord(format!(
                        "unknown {} {other:?}",
                        stringify!($name)
                    ))),
                }
            }
        }

        impl TryFrom<String> for $name {
            type Error = DataError;

            fn try_from(s: String) -> Result<Self, DataError> {
                s.parse()
            }
        }

        impl From<$name> for &'static str {
            fn from(c: $name) -> &'static str {
                c.as_str()
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

category!(Gender { Male => "M", Female => "F" });

category!(Tabacology {
    Smoker => "smoker",
    NonSmoker => "non-smoker",
    FormerSmoker => "former-smoker",
});

category!(
    /// Yes/no treatment flag.
    YesNo { Yes => "yes", No => "no" }
);

/// TNM staging: tumour 0-4, node 0-3, metastasis 0-1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tnm {
    pub t: u8,
    pub n: u8,
    pub m: u8,
}

impl Tnm {
    pub const MAX: Tnm = Tnm { t: 4, n: 3, m: 1 };

    pub fn new(t: u8, n: u8, m: u8) -> Result<Self, DataError> {
        if t > Self::MAX.t || n > Self::MAX.n || m > Self::MAX.m {
            return Err(DataError::InvalidRecord(format!("TNM T{t} N{n} M{m} out of range")));
        }
        Ok(Self { t, n, m })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualitativeClinical {
    pub gender: Gender,
    pub tabacology: Tabacology,
    pub induction_chemo: YesNo,
    pub concomitant_chemo: YesNo,
    pub tnm: Tnm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatientRecord {
    pub id: String,
    /// `(H, W, C)` intensities in `[0, 1]`.
    pub volume: Tensor,
    pub quantitative: QuantitativeClinical,
    pub qualitative: QualitativeClinical,
    pub recurrence: u8,
}

impl PatientRecord {
    pub fn validate(&self) -> Result<(), DataError> {
        self.quantitative.validate()?;
        Tnm::new(
            self.qualitative.tnm.t,
            self.qualitative.tnm.n,
            self.qualitative.tnm.m,
        )?;
        if self.recurrence > 1 {
            return Err(DataError::InvalidRecord(format!(
                "{}: recurrence {} not in {{0, 1}}",
                self.id, self.recurrence
            )));
        }
        if self.volume.shape().len() != 3 {
            return Err(DataError::InvalidRecord(format!(
                "{}: volume must be H x W x C, got {:?}",
                self.id,
                self.volume.shape()
            )));
        }
        if self.volume.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(DataError::InvalidRecord(format!(
                "{}: volume intensities outside [0, 1]",
                self.id
            )));
        }
        Ok(())
    }
}
