//! Summary statistics and two-sample t-tests.
//!
//! The Student t distribution is evaluated through the regularized
//! incomplete beta function, computed with the modified Lentz continued
//! fraction. Tests are exposed as [`SignificanceTest`] strategies in a
//! name-keyed registry (`welch`, `student`, `paired`).

use crate::registry::{Registry, UnknownStrategy};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("insufficient data: need at least {needed} values, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("paired test needs equal sample sizes ({left} vs {right})")]
    UnequalLengths { left: usize, right: usize },
    #[error("non-finite sample value")]
    NonFinite,
    #[error(transparent)]
    UnknownTest(#[from] UnknownStrategy),
}

pub type Result<T> = std::result::Result<T, StatsError>;

/// Convergence tolerance of the incomplete-beta continued fraction.
const CF_TOL: f64 = 1e-15;
const CF_MAX_ITER: usize = 500;
const CF_TINY: f64 = 1e-300;

/// Variances at or below this (relative to the squared mean scale) are
/// treated as exactly zero by the degenerate-case rules.
const ZERO_VARIANCE: f64 = 1e-24;

/// Lanczos coefficients for g = 7, n = 9.
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let mut a = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_TOL {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Two-sided tail probability `P(|T| >= |t|)` of Student's t with `df`
/// degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

pub fn mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(StatsError::InsufficientData { needed: 1, got: 0 });
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Sample variance (n - 1 denominator).
pub fn sample_variance(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(StatsError::InsufficientData {
            needed: 2,
            got: values.len(),
        });
    }
    let m = mean(values)?;
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    Ok(ss / (values.len() - 1) as f64)
}

/// Arithmetic mean and sample standard deviation.
pub fn mean_sd(values: &[f64]) -> Result<(f64, f64)> {
    let var = sample_variance(values)?;
    Ok((mean(values)?, var.sqrt()))
}

fn is_zero_variance(var: f64, mean: f64) -> bool {
    var <= ZERO_VARIANCE * (1.0 + mean * mean)
}

fn check_sample(values: &[f64]) -> Result<()> {
    if values.len() < 2 {
        return Err(StatsError::InsufficientData {
            needed: 2,
            got: values.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

/// p-value when every variance term vanishes: equal means are
/// indistinguishable, different means are certainly different.
fn degenerate_p(mean_diff: f64, scale: f64) -> f64 {
    if mean_diff.abs() <= 1e-12 * (1.0 + scale.abs()) {
        1.0
    } else {
        0.0
    }
}

/// A two-sided two-sample location test.
pub trait SignificanceTest: Send + Sync {
    fn name(&self) -> &'static str;

    fn p_value(&self, a: &[f64], b: &[f64]) -> Result<f64>;
}

/// Welch's unequal-variance t-test.
#[derive(Debug, Clone, Copy, Default)]
pub struct Welch;

impl SignificanceTest for Welch {
    fn name(&self) -> &'static str {
        "welch"
    }

    fn p_value(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        check_sample(a)?;
        check_sample(b)?;
        let (ma, mb) = (mean(a)?, mean(b)?);
        let (va, vb) = (sample_variance(a)?, sample_variance(b)?);
        let (za, zb) = (is_zero_variance(va, ma), is_zero_variance(vb, mb));
        if za && zb {
            return Ok(degenerate_p(ma - mb, ma.abs().max(mb.abs())));
        }
        let (na, nb) = (a.len() as f64, b.len() as f64);
        let sa = if za { 0.0 } else { va / na };
        let sb = if zb { 0.0 } else { vb / nb };
        let se2 = sa + sb;
        let t = (ma - mb) / se2.sqrt();
        let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
        Ok(student_t_two_sided(t, df))
    }
}

/// Student's pooled-variance t-test.
#[derive(Debug, Clone, Copy, Default)]
pub struct Student;

impl SignificanceTest for Student {
    fn name(&self) -> &'static str {
        "student"
    }

    fn p_value(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        check_sample(a)?;
        check_sample(b)?;
        let (ma, mb) = (mean(a)?, mean(b)?);
        let (na, nb) = (a.len() as f64, b.len() as f64);
        let pooled = ((na - 1.0) * sample_variance(a)? + (nb - 1.0) * sample_variance(b)?)
            / (na + nb - 2.0);
        if is_zero_variance(pooled, ma.abs().max(mb.abs())) {
            return Ok(degenerate_p(ma - mb, ma.abs().max(mb.abs())));
        }
        let t = (ma - mb) / (pooled * (1.0 / na + 1.0 / nb)).sqrt();
        Ok(student_t_two_sided(t, na + nb - 2.0))
    }
}

/// Paired t-test on the element-wise differences.
#[derive(Debug, Clone, Copy, Default)]
pub struct Paired;

impl SignificanceTest for Paired {
    fn name(&self) -> &'static str {
        "paired"
    }

    fn p_value(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(StatsError::UnequalLengths {
                left: a.len(),
                right: b.len(),
            });
        }
        check_sample(a)?;
        check_sample(b)?;
        let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        let (md, vd) = (mean(&diffs)?, sample_variance(&diffs)?);
        let scale = mean(a)?.abs().max(mean(b)?.abs());
        if is_zero_variance(vd, scale) {
            return Ok(degenerate_p(md, scale));
        }
        let n = diffs.len() as f64;
        Ok(student_t_two_sided(md / (vd / n).sqrt(), n - 1.0))
    }
}

pub type TestFactory = fn() -> Box<dyn SignificanceTest>;

/// Built-in tests: `welch` (default), `student`, `paired`.
pub fn registry() -> Registry<TestFactory> {
    let mut reg: Registry<TestFactory> = Registry::new("significance test");
    reg.register("welch", || Box::new(Welch))
        .register("student", || Box::new(Student))
        .register("paired", || Box::new(Paired));
    reg
}

pub const DEFAULT_TEST: &str = "welch";

/// Two-sided p-value of the named test.
pub fn significance_test(a: &[f64], b: &[f64], kind: &str) -> Result<f64> {
    let test = registry().get(kind)?();
    test.p_value(a, b)
}
