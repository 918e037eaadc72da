//! Sweep tables as CSV (full precision) or markdown (display rounding).

use super::sweep::SweepRow;
use super::{ExperimentError, Result};
use crate::entropy::Alpha;
use std::fmt::Write;
use std::str::FromStr;

/// Text of the p-value cell of the baseline row.
pub const BASELINE_CELL: &str = "N/A (Shannon entropy)";

/// Highlight marker in CSV output.
pub const CSV_MARKER: &str = "*";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "markdown" | "md" => Ok(Self::Markdown),
            other => Err(ExperimentError::InvalidConfig(format!(
                "unknown report format {other:?}; expected csv or markdown"
            ))),
        }
    }
}

pub fn format_report(rows: &[SweepRow], format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => format_csv(rows),
        ReportFormat::Markdown => format_markdown(rows),
    }
}

fn fold_count(rows: &[SweepRow]) -> usize {
    rows.iter().map(|r| r.fold_accuracies.len()).max().unwrap_or(0)
}

fn format_csv(rows: &[SweepRow]) -> String {
    let k = fold_count(rows);
    let mut out = String::from("alpha");
    for i in 1..=k {
        write!(out, ",fold{i}").unwrap();
    }
    out.push_str(",average,sd,p_value,highlight\n");
    for r in rows {
        write!(out, "{:.6}", r.alpha.value()).unwrap();
        for a in &r.fold_accuracies {
            write!(out, ",{a:.6}").unwrap();
        }
        write!(out, ",{:.6},{:.6},", r.average, r.sd).unwrap();
        match r.p_value {
            Some(p) => write!(out, "{p:.6}").unwrap(),
            None => out.push_str(BASELINE_CELL),
        }
        out.push(',');
        if r.better_and_significant {
            out.push_str(CSV_MARKER);
        }
        out.push('\n');
    }
    out
}

/// Shortest decimal form of alpha (`1.5`, not `1.500000`).
fn alpha_text(a: Alpha) -> String {
    let s = format!("{:.6}", a.value());
    let s = s.trim_end_matches('0');
    if s.ends_with('.') {
        format!("{s}0")
    } else {
        s.to_string()
    }
}

fn p_text(p: f64) -> String {
    if p < 0.01 {
        format!("{p:.3}")
    } else {
        format!("{p:.2}")
    }
}

fn format_markdown(rows: &[SweepRow]) -> String {
    let k = fold_count(rows);
    let mut out = String::from("| α |");
    for i in 1..=k {
        write!(out, " Fold {i} |").unwrap();
    }
    out.push_str(" Average | SD | p-value |\n|");
    for _ in 0..k + 4 {
        out.push_str("---|");
    }
    out.push('\n');
    for r in rows {
        let mut cells = vec![alpha_text(r.alpha)];
        cells.extend(r.fold_accuracies.iter().map(|a| format!("{a:.2}")));
        cells.push(format!("{:.2}", r.average));
        cells.push(format!("{:.2}", r.sd));
        cells.push(r.p_value.map_or_else(|| BASELINE_CELL.to_string(), p_text));
        out.push('|');
        for c in cells {
            if r.better_and_significant {
                write!(out, " **{c}** |").unwrap();
            } else {
                write!(out, " {c} |").unwrap();
            }
        }
        out.push('\n');
    }
    out
}

fn corrupt(line: usize, msg: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Corrupt(format!("line {line}: {msg}"))
}

/// Reads a table written by [`format_report`] with [`ReportFormat::Csv`].
pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = records
        .next()
        .ok_or_else(|| corrupt(1, "empty file"))?
        .map_err(|e| corrupt(1, e))?;
    let cols: Vec<&str> = header.iter().collect();
    let k = cols.len().saturating_sub(5);
    let expected: Vec<String> = std::iter::once("alpha".to_string())
        .chain((1..=k).map(|i| format!("fold{i}")))
        .chain(["average", "sd", "p_value", "highlight"].map(String::from))
        .collect();
    if k < 2 || cols != expected {
        return Err(corrupt(1, format!("unexpected header {cols:?}")));
    }
    let mut rows = Vec::new();
    for (i, rec) in records.enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| corrupt(line, e))?;
        if rec.len() != cols.len() {
            return Err(corrupt(line, format!("{} fields, expected {}", rec.len(), cols.len())));
        }
        let num = |j: usize| -> Result<f64> {
            rec[j]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| corrupt(line, format!("bad number {:?}", &rec[j])))
        };
        let alpha = Alpha::new(num(0)?).map_err(|e| corrupt(line, e))?;
        let fold_accuracies = (1..=k).map(num).collect::<Result<Vec<_>>>()?;
        if fold_accuracies.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(corrupt(line, "accuracy outside [0, 1]"));
        }
        let p_value = match &rec[k + 3] {
            BASELINE_CELL => None,
            _ => {
                let p = num(k + 3)?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(corrupt(line, "p-value outside [0, 1]"));
                }
                Some(p)
            }
        };
        let better_and_significant = match &rec[k + 4] {
            CSV_MARKER => true,
            "" => false,
            other => return Err(corrupt(line, format!("bad highlight {other:?}"))),
        };
        rows.push(SweepRow {
            alpha,
            fold_accuracies,
            average: num(k + 1)?,
            sd: num(k + 2)?,
            p_value,
            better_and_significant,
        });
    }
    if rows.is_empty() {
        return Err(corrupt(2, "no rows"));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<SweepRow> {
        let base = [0.75, 0.65, 0.68, 0.58, 0.70];
        vec![
            SweepRow::new(
                Alpha::new(0.1).unwrap(),
                vec![0.68, 0.60, 0.64, 0.62, 0.66],
                Some(&base),
                "welch",
            )
            .unwrap(),
            SweepRow::new(Alpha::SHANNON, base.to_vec(), None, "welch").unwrap(),
            SweepRow::new(
                Alpha::new(1.5).unwrap(),
                vec![0.70, 0.78, 0.85, 0.80, 0.88],
                Some(&base),
                "welch",
            )
            .unwrap(),
        ]
    }

    #[test]
    fn csv_layout() {
        let text = format_report(&rows(), ReportFormat::Csv);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "alpha,fold1,fold2,fold3,fold4,fold5,average,sd,p_value,highlight"
        );
        assert!(lines[2].starts_with("1.000000,0.750000,"));
        assert!(lines[2].ends_with(",N/A (Shannon entropy),"));
        assert!(lines[3].ends_with(",*"));
        assert!(lines[3].contains(",0.802000,"));
    }

    #[test]
    fn csv_round_trip() {
        let text = format_report(&rows(), ReportFormat::Csv);
        let back = parse_sweep_csv(&text).unwrap();
        assert_eq!(back.len(), 3);
        for (a, b) in back.iter().zip(rows()) {
            assert!((a.average - b.average).abs() <= 5e-7);
            assert_eq!(a.p_value.is_some(), b.p_value.is_some());
            assert_eq!(a.better_and_significant, b.better_and_significant);
        }
        assert_eq!(format_report(&back, ReportFormat::Csv), text);
    }

    #[test]
    fn markdown_layout() {
        let text = format_report(&rows(), ReportFormat::Markdown);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "| α | Fold 1 | Fold 2 | Fold 3 | Fold 4 | Fold 5 | Average | SD | p-value |"
        );
        assert_eq!(
            lines[3],
            "| 1.0 | 0.75 | 0.65 | 0.68 | 0.58 | 0.70 | 0.67 | 0.06 | N/A (Shannon entropy) |"
        );
        assert!(lines[4].starts_with("| **1.5** | **0.70** |"));
        assert!(lines[4].ends_with("| **0.80** | **0.07** | **0.01** |"));
        assert!(!lines[2].contains("**"));
        assert_eq!(p_text(0.0042), "0.004");
        assert_eq!(p_text(0.03), "0.03");
    }

    #[test]
    fn corrupt_csv_is_rejected() {
        let good = format_report(&rows(), ReportFormat::Csv);
        let cases = [
            String::new(),
            "alpha,fold1\n".to_string(),
            good.lines().next().unwrap().to_string() + "\n",
            good.replace("0.802000", "0..80"),
            good.replacen(",*", ",!", 1),
            good.replace("0.750000", "1.750000"),
            good.lines().take(2).collect::<Vec<_>>().join("\n") + "\n1.0,0.5\n",
        ];
        for c in cases {
            assert!(parse_sweep_csv(&c).is_err(), "{c:?}");
        }
    }
}
