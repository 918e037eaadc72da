//! Cross-validated evaluation of the prediction loss over a grid of alpha
//! values, with significance tests against the Shannon baseline.

pub mod folds;
pub mod report;
pub mod sweep;

pub use folds::{accuracy, fold_data, kfold_split, run_fold, FoldData, FoldResult, FoldSplit};
pub use report::{format_report, parse_sweep_csv, ReportFormat};
pub use sweep::{
    default_alpha_grid, highlight, parse_alpha_list, parse_grid, run_sweep, SweepConfig,
    SweepOutcome, SweepRow,
};

use crate::data::DataError;
use crate::net::NetError;
use crate::stats::StatsError;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid fold count k = {k} for {n} records")]
    InvalidK { n: usize, k: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("{labels} labels but {probs} probabilities")]
    LengthMismatch { labels: usize, probs: usize },
    #[error("baseline required: the alpha grid must contain 1.0")]
    MissingBaseline,
    #[error("{0}")]
    InvalidConfig(String),
    #[error("corrupt sweep file: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;
