//! Synthetic patient cohorts: clinical schema, generator, feature encoding
//! and on-disk formats.

pub mod baseline;
pub mod cohort_io;
pub mod encode;
pub mod generate;
pub mod schema;
pub mod volume;

pub use cohort_io::{load_cohort, save_cohort};
pub use encode::{
    compute_normalization_stats, encode_clinical, encode_record, NormalizationStats, ENCODED_LEN,
};
pub use generate::{generate_cohort, CohortConfig, CohortKind};
pub use schema::{
    Gender, PatientRecord, QualitativeClinical, QuantitativeClinical, Tabacology, Tnm, YesNo,
};
pub use volume::{load_volume, save_volume};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("invalid cohort config: {0}")]
    InvalidConfig(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("insufficient data: need at least {needed} records, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a volume file (bad magic)")]
    BadMagic,
    #[error("unsupported volume version {0}")]
    VersionMismatch(u16),
    #[error("corrupt file: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
