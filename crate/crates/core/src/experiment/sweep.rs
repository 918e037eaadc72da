//! Alpha sweeps: every alpha is cross-validated on the same split and
//! compared with the Shannon (alpha = 1) row.

use super::folds::{kfold_split, run_fold, FoldResult, FoldSplit};
use super::{ExperimentError, Result};
use crate::data::{PatientRecord, ENCODED_LEN};
use crate::entropy::Alpha;
use crate::net::{ModelConfig, TrainConfig};
use crate::stats::{self, mean_sd};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

/// Significance level of the highlight rule.
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

/// Grid points within this distance of 1 are the Shannon baseline.
pub const BASELINE_TOL: f64 = 1e-9;

const MAX_GRID_POINTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub alpha_grid: Vec<Alpha>,
    /// Number of folds.
    pub k: usize,
    pub base_seed: u64,
    /// Name in [`crate::stats::registry`].
    pub test: String,
    /// Cohort directory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    pub model: ModelConfig,
    /// `alpha` and `seed` are overridden per run.
    pub train: TrainConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            alpha_grid: default_alpha_grid(),
            k: 5,
            base_seed: 0,
            test: stats::DEFAULT_TEST.into(),
            data: None,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

/// 0.1, 0.3, ..., 3.9 with 1.0 inserted.
pub fn default_alpha_grid() -> Vec<Alpha> {
    let mut v: Vec<f64> = (0..20).map(|i| f64::from(1 + 2 * i) / 10.0).collect();
    v.push(1.0);
    v.sort_by(f64::total_cmp);
    v.into_iter().map(|a| Alpha::new(a).unwrap()).collect()
}

fn is_baseline(a: Alpha) -> bool {
    (a.value() - 1.0).abs() < BASELINE_TOL
}

/// Parses `start:stop:step`, inclusive of `stop` within 1e-9.
pub fn parse_grid(spec: &str) -> Result<Vec<Alpha>> {
    let bad = |m: &str| ExperimentError::InvalidConfig(format!("grid {spec:?}: {m}"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad("expected start:stop:step"))?;
    let [start, stop, step] = parts[..] else {
        return Err(bad("expected start:stop:step"));
    };
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 {
        return Err(bad("step must be positive and all values finite"));
    }
    if stop < start {
        return Err(bad("stop is below start"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if count > MAX_GRID_POINTS {
        return Err(bad("too many grid points"));
    }
    (0..count)
        .map(|i| {
            let v = ((start + i as f64 * step) * 1e9).round() / 1e9;
            Alpha::new(v).map_err(|e| bad(&e.to_string()))
        })
        .collect()
}

/// Parses a comma-separated alpha list.
pub fn parse_alpha_list(spec: &str) -> Result<Vec<Alpha>> {
    spec.split(',')
        .map(|p| {
            let v: f64 = p.trim().parse().map_err(|_| {
                ExperimentError::InvalidConfig(format!("not a number: {p:?}"))
            })?;
            Alpha::new(v).map_err(|e| ExperimentError::InvalidConfig(e.to_string()))
        })
        .collect()
}

impl SweepConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| ExperimentError::InvalidConfig(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("sweep config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha_grid.is_empty() {
            return Err(ExperimentError::InvalidConfig("alpha grid is empty".into()));
        }
        if !self.alpha_grid.iter().any(|a| is_baseline(*a)) {
            return Err(ExperimentError::MissingBaseline);
        }
        if self.k < 2 {
            return Err(ExperimentError::InvalidK { n: 0, k: self.k });
        }
        if self.model.clinical_dim != ENCODED_LEN {
            return Err(ExperimentError::InvalidConfig(format!(
                "model clinical_dim must be {ENCODED_LEN}, got {}",
                self.model.clinical_dim
            )));
        }
        stats::registry()
            .get(&self.test)
            .map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
        self.model.validate()?;
        self.train.validate()?;
        Ok(())
    }
}

/// One line of a sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub alpha: Alpha,
    pub fold_accuracies: Vec<f64>,
    pub average: f64,
    /// Sample standard deviation.
    pub sd: f64,
    /// `None` for the baseline row.
    pub p_value: Option<f64>,
    pub better_and_significant: bool,
}

/// True when the row beats the baseline on average and the difference is
/// significant.
pub fn highlight(average: f64, baseline_average: f64, p_value: Option<f64>) -> bool {
    matches!(p_value, Some(p) if average > baseline_average && p < SIGNIFICANCE_LEVEL)
}

impl SweepRow {
    /// Aggregates fold accuracies; `baseline` is `None` for the baseline
    /// row itself.
    pub fn new(alpha: Alpha, folds: Vec<f64>, baseline: Option<&[f64]>, test: &str) -> Result<Self> {
        let (average, sd) = mean_sd(&folds)?;
        let (p_value, better_and_significant) = match baseline {
            None => (None, false),
            Some(base) => {
                let p = stats::significance_test(&folds, base, test)?;
                let base_avg = stats::mean(base)?;
                (Some(p), highlight(average, base_avg, Some(p)))
            }
        };
        Ok(Self {
            alpha,
            fold_accuracies: folds,
            average,
            sd,
            p_value,
            better_and_significant,
        })
    }

    pub fn is_baseline(&self) -> bool {
        self.p_value.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    /// `folds[a][f]` is fold `f` of grid point `a`.
    pub folds: Vec<Vec<FoldResult>>,
    pub split: FoldSplit,
}

/// Runs every (alpha, fold) pair and aggregates the rows in grid order.
///
/// With `threads > 1` the runs execute on a dedicated pool of that size;
/// each run is a pure function of its inputs, so the result does not
/// depend on scheduling.
pub fn run_sweep(
    config: &SweepConfig,
    cohort: &[PatientRecord],
    threads: usize,
) -> Result<SweepOutcome> {
    config.validate()?;
    if let Some(r) = cohort.iter().find(|r| r.volume.shape() != config.model.input_shape) {
        return Err(ExperimentError::InvalidConfig(format!(
            "volume shape {:?} of {} does not match the model input {:?}",
            r.volume.shape(),
            r.id,
            config.model.input_shape
        )));
    }
    let split = kfold_split(cohort.len(), config.k, config.base_seed)?;
    let jobs: Vec<(usize, usize)> = (0..config.alpha_grid.len())
        .flat_map(|a| (0..config.k).map(move |f| (a, f)))
        .collect();
    let run = |&(a, f): &(usize, usize)| {
        let alpha = config.alpha_grid[a];
        log::info!("alpha {alpha}: fold {}/{}", f + 1, config.k);
        let train = TrainConfig {
            alpha,
            ..config.train.clone()
        };
        run_fold(cohort, &split, f, &config.model, &train, config.base_seed)
    };
    let results: Vec<Result<FoldResult>> = if threads > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?
            .install(|| jobs.par_iter().map(run).collect())
    } else {
        jobs.iter().map(run).collect()
    };
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;

    let fingerprint = split.fingerprint();
    assert!(
        results.iter().all(|r| r.split_fingerprint == fingerprint),
        "every alpha must see the same split"
    );
    let folds: Vec<Vec<FoldResult>> = results.chunks(config.k).map(<[_]>::to_vec).collect();
    let accs = |a: usize| folds[a].iter().map(|r| r.test_accuracy).collect::<Vec<_>>();
    let base = config
        .alpha_grid
        .iter()
        .position(|a| is_baseline(*a))
        .ok_or(ExperimentError::MissingBaseline)?;
    let base_accs = accs(base);
    let rows = config
        .alpha_grid
        .iter()
        .enumerate()
        .map(|(a, &alpha)| {
            let baseline = (!is_baseline(alpha)).then_some(base_accs.as_slice());
            SweepRow::new(alpha, accs(a), baseline, &config.test)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepOutcome { rows, folds, split })
}
