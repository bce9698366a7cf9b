use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::experiment::{best_per_validation, ExperimentResult, SelectBy};

pub const COLUMNS: [&str; 9] = [
    "Model",
    "Fine-Tuning Dataset",
    "Validation Dataset",
    "Acc(%)",
    "Pr(%)",
    "Rec(%)",
    "F1(%)",
    "Macro-F1(%)",
    "Best",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
}

/// One report line with percentages rounded to two decimals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    #[serde(rename = "Model")]
    pub model: String,
    #[serde(rename = "Fine-Tuning Dataset")]
    pub fine_tuning: String,
    #[serde(rename = "Validation Dataset")]
    pub validation: String,
    #[serde(rename = "Acc(%)")]
    pub accuracy: f64,
    #[serde(rename = "Pr(%)")]
    pub precision: f64,
    #[serde(rename = "Rec(%)")]
    pub recall: f64,
    #[serde(rename = "F1(%)")]
    pub f1: f64,
    #[serde(rename = "Macro-F1(%)")]
    pub f1_macro: f64,
    #[serde(rename = "Best", with = "yes_no")]
    pub best: bool,
}

mod yes_no {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(if *v { "*" } else { "" })
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        let s = String::deserialize(d)?;
        match s.as_str() {
            "*" => Ok(true),
            "" => Ok(false),
            other => Err(serde::de::Error::custom(format!("bad Best flag {other:?}"))),
        }
    }
}

fn pct(x: f64) -> f64 {
    (x * 10_000.0).round() / 100.0
}

/// Rows in result order; the best row of each validation set is flagged.
pub fn report_rows(results: &[ExperimentResult], by: SelectBy) -> Vec<ReportRow> {
    let best: Vec<usize> = best_per_validation(results, by)
        .into_iter()
        .map(|(_, i)| i)
        .collect();
    results
        .iter()
        .enumerate()
        .map(|(i, r)| ReportRow {
            model: r.spec.name.clone(),
            fine_tuning: r.spec.fine_tuning_label(),
            validation: r.spec.validation.clone(),
            accuracy: pct(r.metrics.accuracy),
            precision: pct(r.metrics.precision),
            recall: pct(r.metrics.recall),
            f1: pct(r.metrics.f1_positive),
            f1_macro: pct(r.metrics.f1_macro),
            best: best.contains(&i),
        })
        .collect()
}

pub fn render_rows(rows: &[ReportRow], format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Markdown => {
            let mut out = String::new();
            let _ = writeln!(out, "| {} |", COLUMNS.join(" | "));
            let _ = writeln!(out, "|{}", ["---|"; COLUMNS.len()].concat());
            for r in rows {
                let md = |s: &str| s.replace('|', "\\|");
                let (b0, b1) = if r.best { ("**", "**") } else { ("", "") };
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {:.2} | {:.2} | {:.2} | {b0}{:.2}{b1} | {:.2} | {} |",
                    md(&r.model),
                    md(&r.fine_tuning),
                    md(&r.validation),
                    r.accuracy,
                    r.precision,
                    r.recall,
                    r.f1,
                    r.f1_macro,
                    if r.best { "*" } else { "" },
                );
            }
            Ok(out)
        }
        ReportFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(Vec::new());
            w.write_record(COLUMNS).map_err(csv_err)?;
            for r in rows {
                w.write_record([
                    r.model.clone(),
                    r.fine_tuning.clone(),
                    r.validation.clone(),
                    format!("{:.2}", r.accuracy),
                    format!("{:.2}", r.precision),
                    format!("{:.2}", r.recall),
                    format!("{:.2}", r.f1),
                    format!("{:.2}", r.f1_macro),
                    if r.best { "*".into() } else { String::new() },
                ])
                .map_err(csv_err)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
        }
    }
}

pub fn render_report(
    results: &[ExperimentResult],
    format: ReportFormat,
    by: SelectBy,
) -> Result<String> {
    render_rows(&report_rows(results, by), format)
}

/// Parses a CSV report back into rows.
pub fn parse_report_csv(text: &str) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().map_err(csv_err)?.clone();
    if headers.iter().ne(COLUMNS) {
        return Err(Error::invalid(
            "report header does not match the expected columns",
        ));
    }
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::parse(line, e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::experiment::tests::result;

    #[test]
    fn csv_round_trip_and_single_best() {
        let mut rows = vec![
            result(0.91234, 0.9, "v"),
            result(0.95, 0.8, "v"),
            result(0.2, 0.5, "v"),
        ];
        rows[0].spec.fine_tuning = vec!["Off_en_train".into(), "set a, set b".into()];
        let csv = render_report(&rows, ReportFormat::Csv, SelectBy::F1Positive).unwrap();
        let back = parse_report_csv(&csv).unwrap();
        assert_eq!(back, report_rows(&rows, SelectBy::F1Positive));
        assert_eq!(back[0].f1, 91.23);
        assert_eq!(back[0].fine_tuning, "Off_en_train + set a, set b");
        assert_eq!(back.iter().filter(|r| r.best).count(), 1);
        assert!(back[1].best);
    }

    #[test]
    fn markdown_layout() {
        let md = render_report(
            &[result(0.5, 0.75, "v")],
            ReportFormat::Markdown,
            SelectBy::F1Positive,
        )
        .unwrap();
        let lines: Vec<&str> = md.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("| Model | Fine-Tuning Dataset |"));
        assert!(lines[2].contains("| 75.00 |") && lines[2].contains("**50.00**"));
    }
}
