use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thc_core::data::{generate_cohort, CohortConfig, PatientRecord};
use thc_core::experiment::{
    fold_data, kfold_split, parse_alpha_list, run_fold, run_sweep, ExperimentError, SweepConfig,
};
use thc_core::net::{ModelConfig, TrainConfig};
use thc_core::stats::significance_test;

fn tiny_model() -> ModelConfig {
    ModelConfig {
        input_shape: [8, 8, 1],
        encoder_levels: 1,
        channels_per_level: vec![2],
        dense_widths: vec![],
        ..ModelConfig::default()
    }
}

fn tiny_train(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        learning_rate: 1e-2,
        ..TrainConfig::default()
    }
}

fn cohort(n: usize, signal: f64, seed: u64) -> Vec<PatientRecord> {
    generate_cohort(&CohortConfig {
        n_patients: n,
        image_shape: [8, 8, 1],
        signal_strength: signal,
        seed,
        ..CohortConfig::preset("head-neck-like").unwrap()
    })
    .unwrap()
}

fn sweep_config(alphas: &str, epochs: usize, seed: u64) -> SweepConfig {
    SweepConfig {
        alpha_grid: parse_alpha_list(alphas).unwrap(),
        base_seed: seed,
        model: tiny_model(),
        train: tiny_train(epochs),
        ..SweepConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn folds_partition_the_records(
        (n, k) in (2usize..400).prop_flat_map(|n| (Just(n), 2..=n.min(25))),
        seed in any::<u64>(),
    ) {
        let split = kfold_split(n, k, seed).unwrap();
        let mut seen = vec![0u32; n];
        let mut sizes = Vec::new();
        for f in 0..k {
            let test = split.test_indices(f);
            let train = split.train_indices(f);
            prop_assert_eq!(test.len() + train.len(), n);
            prop_assert!(test.iter().all(|i| !train.contains(i)));
            for &i in &test {
                seen[i] += 1;
            }
            sizes.push(test.len());
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        prop_assert_eq!(kfold_split(n, k, seed).unwrap(), split);
    }
}

#[test]
fn invalid_fold_counts() {
    assert!(matches!(kfold_split(5, 6, 0), Err(ExperimentError::InvalidK { n: 5, k: 6 })));
    assert!(matches!(kfold_split(5, 1, 0), Err(ExperimentError::InvalidK { .. })));
    let mut sizes: Vec<usize> = {
        let s = kfold_split(11, 5, 0).unwrap();
        (0..5).map(|f| s.test_indices(f).len()).collect()
    };
    sizes.sort();
    assert_eq!(sizes, [2, 2, 2, 2, 3]);
}

#[test]
fn test_records_never_reach_the_statistics() {
    let records = cohort(30, 1.0, 4);
    let split = kfold_split(records.len(), 5, 9).unwrap();
    let clean = fold_data(&records, &split, 2).unwrap();
    let mut poisoned = records.clone();
    for i in split.test_indices(2) {
        let q = &mut poisoned[i].quantitative;
        q.hemoglobin = 1e9;
        q.albumin = -1e9;
        q.weight_start = 1e12;
    }
    let dirty = fold_data(&poisoned, &split, 2).unwrap();
    assert_eq!(clean.stats, dirty.stats);
    assert_eq!(clean.train, dirty.train);
    assert_ne!(clean.test, dirty.test);
}

#[test]
fn run_fold_is_deterministic() {
    let records = cohort(25, 1.0, 2);
    let split = kfold_split(records.len(), 5, 1).unwrap();
    let run = || run_fold(&records, &split, 3, &tiny_model(), &tiny_train(3), 7).unwrap();
    let a = run();
    assert_eq!(a, run());
    assert_eq!(a.fold_index, 3);
    assert_eq!(a.train_loss_trace.len(), 3);
    assert_eq!(a.split_fingerprint, split.fingerprint());
    let other = run_fold(&records, &split, 3, &tiny_model(), &tiny_train(3), 8).unwrap();
    assert_ne!(a.train_loss_trace, other.train_loss_trace);
}

#[test]
fn baseline_only_sweep() {
    let records = cohort(20, 1.0, 3);
    let out = run_sweep(&sweep_config("1.0", 1, 0), &records, 1).unwrap();
    assert_eq!(out.rows.len(), 1);
    assert!(out.rows[0].p_value.is_none());
    assert!(!out.rows[0].better_and_significant);
}

#[test]
fn every_alpha_shares_the_split() {
    let records = cohort(30, 1.0, 5);
    let out = run_sweep(&sweep_config("0.5,1.0,1.5,2.3,3.1", 1, 6), &records, 1).unwrap();
    let alphas: Vec<f64> = out.rows.iter().map(|r| r.alpha.value()).collect();
    assert_eq!(alphas, [0.5, 1.0, 1.5, 2.3, 3.1]);
    assert_eq!(out.folds.len(), 5);
    for per_alpha in &out.folds {
        assert_eq!(per_alpha.len(), 5);
        for (f, r) in per_alpha.iter().enumerate() {
            assert_eq!(r.fold_index, f);
            assert_eq!(r.split_fingerprint, out.split.fingerprint());
        }
    }
    assert_eq!(out.split, kfold_split(30, 5, 6).unwrap());
    for row in &out.rows {
        assert_eq!(row.is_baseline(), row.alpha.value() == 1.0);
        let p = row.p_value.unwrap_or(0.5);
        assert!((0.0..=1.0).contains(&p));
    }
}

#[test]
fn sweep_needs_a_baseline_and_matching_shapes() {
    let records = cohort(20, 1.0, 3);
    assert!(matches!(
        run_sweep(&sweep_config("0.5,2.0", 1, 0), &records, 1),
        Err(ExperimentError::MissingBaseline)
    ));
    let mut config = sweep_config("1.0", 1, 0);
    config.model.input_shape = [16, 16, 1];
    assert!(run_sweep(&config, &records, 1).is_err());
}

#[test]
fn sweep_result_ignores_thread_count() {
    let records = cohort(20, 1.0, 8);
    let config = sweep_config("1.0,2.0", 2, 4);
    let one = run_sweep(&config, &records, 1).unwrap();
    let three = run_sweep(&config, &records, 3).unwrap();
    assert_eq!(one.rows, three.rows);
}

// Under the null (no signal), an alpha row beats the baseline
// significantly only by chance: about 2.5 % of sweeps with a two-sided
// test at 0.05. Thirty sweeps with more than five flags would have
// probability below 1e-3.
#[test]
fn null_cohorts_are_rarely_flagged() {
    let mut flagged = 0;
    let sweeps = 30;
    for seed in 0..sweeps {
        let records = cohort(40, 0.0, 100 + seed);
        let out = run_sweep(&sweep_config("1.0,2.0", 2, seed), &records, 1).unwrap();
        for row in &out.rows {
            assert!((0.2..=0.8).contains(&row.average), "{row:?}");
        }
        flagged += usize::from(out.rows[1].better_and_significant);
    }
    assert!(flagged <= 5, "{flagged} of {sweeps} null sweeps flagged");
}

// Welch, pooled and paired tests hold their size on normal samples of
// five, the fold count used by the sweeps.
#[test]
fn tests_hold_their_level_under_the_null() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let trials = 4000;
    for kind in ["welch", "student", "paired"] {
        let mut rejections = 0;
        for _ in 0..trials {
            let a: Vec<f64> = (0..5).map(|_| normal.sample(&mut rng)).collect();
            let b: Vec<f64> = (0..5).map(|_| normal.sample(&mut rng)).collect();
            if significance_test(&a, &b, kind).unwrap() < 0.05 {
                rejections += 1;
            }
        }
        let rate = rejections as f64 / trials as f64;
        // Welch is slightly conservative at n = 5
        assert!((0.03..=0.065).contains(&rate), "{kind}: {rate}");
    }
}

proptest! {
    #[test]
    fn p_values_are_probabilities_and_symmetric(
        a in prop::collection::vec(0.0f64..1.0, 5),
        b in prop::collection::vec(0.0f64..1.0, 5),
    ) {
        for kind in ["welch", "student", "paired"] {
            let p = significance_test(&a, &b, kind).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
            let q = significance_test(&b, &a, kind).unwrap();
            prop_assert!((p - q).abs() < 1e-12);
        }
        prop_assert!((significance_test(&a, &a, "welch").unwrap() - 1.0).abs() < 1e-12);
    }
}
