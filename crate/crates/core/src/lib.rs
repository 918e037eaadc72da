//! Generalized-entropy losses for binary outcome prediction.
//!
//! - [`entropy`]: Shannon and Tsallis-Havrda-Charvat entropies,
//!   cross-entropies and the binary batch losses with their gradients.
//! - [`loss`], [`net::optim`], [`stats`]: strategy families resolved by
//!   name through [`registry::Registry`].
//! - [`net`]: the multitask encoder/decoder network and its training loop.
//! - [`data`]: synthetic patient cohorts, clinical feature encoding and
//!   file formats.
//! - [`experiment`]: k-fold cross-validation, alpha sweeps and reports.

pub mod data;
pub mod entropy;
pub mod experiment;
pub mod loss;
pub mod net;
pub mod registry;
pub mod stats;
pub mod tensor;

pub use entropy::{Alpha, BinaryBatch, LossValue, ProbabilityVector};
pub use tensor::Tensor;
