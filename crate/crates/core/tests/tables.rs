//! Published cross-validation tables: the fold accuracies, the printed
//! averages and SDs, the printed p-values and which rows are highlighted.

use thc_core::experiment::highlight;
use thc_core::stats::mean_sd;

struct Row {
    alpha: f64,
    folds: [f64; 5],
    average: f64,
    sd: f64,
    /// `None` for the Shannon row.
    p: Option<f64>,
    highlighted: bool,
}

const fn row(alpha: f64, folds: [f64; 5], average: f64, sd: f64, p: f64, highlighted: bool) -> Row {
    Row { alpha, folds, average, sd, p: Some(p), highlighted }
}

const fn base(folds: [f64; 5], average: f64, sd: f64) -> Row {
    Row { alpha: 1.0, folds, average, sd, p: None, highlighted: false }
}

// Head and neck.
const TABLE_3: [Row; 21] = [
    row(0.1, [0.68, 0.53, 0.6, 0.58, 0.63], 0.60, 0.06, 0.01, false),
    row(0.3, [0.60, 0.70, 0.70, 0.70, 0.43], 0.63, 0.12, 0.28, false),
    row(0.5, [0.58, 0.58, 0.60, 0.70, 0.73], 0.64, 0.07, 0.27, false),
    row(0.7, [0.85, 0.70, 0.60, 0.70, 0.65], 0.70, 0.09, 0.25, false),
    row(0.9, [0.58, 0.60, 0.60, 0.60, 0.68], 0.61, 0.04, 0.07, false),
    base([0.75, 0.65, 0.68, 0.58, 0.70], 0.67, 0.06),
    row(1.1, [0.68, 0.75, 0.75, 0.73, 0.75], 0.73, 0.03, 0.09, false),
    row(1.3, [0.63, 0.73, 0.68, 0.75, 0.70], 0.70, 0.05, 0.32, false),
    row(1.5, [0.70, 0.78, 0.85, 0.80, 0.88], 0.80, 0.07, 0.03, true),
    // fifth fold printed as "078"
    row(1.7, [0.80, 0.73, 0.63, 0.75, 0.78], 0.74, 0.07, 0.07, false),
    row(1.9, [0.75, 0.73, 0.73, 0.75, 0.83], 0.76, 0.05, 0.02, true),
    row(2.1, [0.68, 0.63, 0.60, 0.62, 0.575], 0.63, 0.04, 0.12, false),
    row(2.3, [0.73, 0.73, 0.73, 0.73, 0.7], 0.72, 0.01, 0.09, false),
    row(2.5, [0.75, 0.58, 0.68, 0.68, 0.6], 0.66, 0.07, 0.34, false),
    row(2.7, [0.68, 0.53, 0.45, 0.63, 0.6], 0.58, 0.09, 0.04, false),
    row(2.9, [0.73, 0.73, 0.73, 0.75, 0.73], 0.73, 0.01, 0.07, false),
    row(3.1, [0.7, 0.55, 0.65, 0.57, 0.63], 0.62, 0.06, 0.02, false),
    row(3.3, [0.65, 0.65, 0.65, 0.58, 0.55], 0.62, 0.05, 0.07, false),
    row(3.5, [0.73, 0.75, 0.73, 0.75, 0.70], 0.73, 0.02, 0.08, false),
    row(3.7, [0.73, 0.70, 0.60, 0.60, 0.58], 0.64, 0.07, 0.20, false),
    row(3.9, [0.68, 0.70, 0.55, 0.58, 0.53], 0.61, 0.08, 0.09, false),
];

// Lung.
const TABLE_4: [Row; 21] = [
    row(0.1, [0.58, 0.58, 0.47, 0.58, 0.63], 0.57, 0.06, 0.23, false),
    row(0.3, [0.58, 0.58, 0.58, 0.58, 0.68], 0.60, 0.04, 0.13, false),
    row(0.5, [0.63, 0.58, 0.52, 0.58, 0.52], 0.56, 0.03, 0.26, false),
    row(0.7, [0.58, 0.58, 0.63, 0.63, 0.58], 0.60, 0.03, 0.13, false),
    // average printed as "057"
    row(0.9, [0.63, 0.53, 0.68, 0.47, 0.53], 0.57, 0.08, 0.21, false),
    base([0.73, 0.47, 0.47, 0.47, 0.47], 0.52, 0.12),
    row(1.1, [0.63, 0.63, 0.52, 0.52, 0.52], 0.56, 0.06, 0.18, false),
    row(1.3, [0.68, 0.53, 0.53, 0.47, 0.53], 0.55, 0.08, 0.15, false),
    row(1.5, [0.58, 0.53, 0.53, 0.47, 0.53], 0.53, 0.04, 0.44, false),
    row(1.7, [0.73, 0.47, 0.63, 0.57, 0.42], 0.56, 0.12, 0.37, false),
    row(1.9, [0.69, 0.63, 0.58, 0.53, 0.68], 0.62, 0.07, 0.04, true),
    // second and fourth folds printed as "0..84" and "0..79"
    row(2.1, [0.79, 0.84, 0.73, 0.79, 0.79], 0.79, 0.04, 0.004, true),
    row(2.3, [0.84, 0.78, 0.84, 0.73, 0.84], 0.81, 0.05, 0.002, true),
    row(2.5, [0.79, 0.84, 0.74, 0.68, 0.63], 0.74, 0.08, 0.007, true),
    row(2.7, [0.79, 0.74, 0.69, 0.74, 0.74], 0.74, 0.04, 0.003, true),
    row(2.9, [0.79, 0.79, 0.79, 0.79, 0.73], 0.78, 0.03, 0.004, true),
    row(3.1, [0.74, 0.74, 0.78, 0.78, 0.68], 0.74, 0.04, 0.008, true),
    row(3.3, [0.79, 0.79, 0.74, 0.74, 0.74], 0.76, 0.03, 0.003, true),
    row(3.5, [0.74, 0.73, 0.68, 0.33, 0.58], 0.61, 0.17, 0.12, false),
    row(3.7, [0.68, 0.63, 0.47, 0.63, 0.73], 0.63, 0.09, 0.07, false),
    row(3.9, [0.78, 0.53, 0.47, 0.47, 0.63], 0.58, 0.13, 0.07, false),
];

/// Rows whose printed cells are typographically damaged.
const CORRUPT: [(u8, f64); 3] = [(3, 1.7), (4, 0.9), (4, 2.1)];

/// Rows whose printed average or SD does not follow from their own
/// printed folds, by more than rounding.
const INCONSISTENT: [(u8, f64); 4] = [(3, 1.9), (3, 2.1), (4, 0.5), (4, 3.7)];

fn tables() -> [(u8, &'static [Row]); 2] {
    [(3, &TABLE_3), (4, &TABLE_4)]
}

fn listed(list: &[(u8, f64)], table: u8, alpha: f64) -> bool {
    list.iter().any(|&(t, a)| t == table && (a - alpha).abs() < 1e-9)
}

#[test]
fn printed_statistics_follow_from_the_folds() {
    let mut checked = 0;
    for (t, rows) in tables() {
        for r in rows {
            let (m, s) = mean_sd(&r.folds).unwrap();
            let ok = (m - r.average).abs() <= 0.005 + 1e-9 && (s - r.sd).abs() <= 0.005 + 1e-9;
            if listed(&INCONSISTENT, t, r.alpha) {
                assert!(!ok, "table {t} alpha {} is consistent after all", r.alpha);
            } else if !listed(&CORRUPT, t, r.alpha) {
                assert!(ok, "table {t} alpha {}: ({m:.4}, {s:.4}) vs ({}, {})", r.alpha, r.average, r.sd);
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 35);
}

#[test]
fn highlight_rule_reproduces_the_marked_rows() {
    for (t, rows) in tables() {
        let baseline = rows.iter().find(|r| r.p.is_none()).unwrap();
        let base_avg = mean_sd(&baseline.folds).unwrap().0;
        for r in rows.iter().filter(|r| r.p.is_some()) {
            let avg = if listed(&CORRUPT, t, r.alpha) { r.average } else { mean_sd(&r.folds).unwrap().0 };
            assert_eq!(highlight(avg, base_avg, r.p), r.highlighted, "table {t} alpha {}", r.alpha);
        }
    }
}

#[test]
fn significant_but_worse_rows_stay_plain() {
    let worse: Vec<f64> = TABLE_3
        .iter()
        .filter(|r| r.p.is_some_and(|p| p < 0.05) && !r.highlighted)
        .map(|r| r.alpha)
        .collect();
    assert_eq!(worse, [0.1, 2.7, 3.1]);
}
