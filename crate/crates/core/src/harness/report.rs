//! Aggregation of cell results and the on-disk report files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::Result;

use super::runner::{CellResult, ExperimentOutcome};

pub const REPORT_JSON: &str = "report.json";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const SUMMARY_MD: &str = "summary.md";
pub const PROVENANCE_JSON: &str = "provenance.json";

/// Fold statistics of one (pipeline, components) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub pipeline: String,
    pub pipeline_index: usize,
    pub components: Option<usize>,
    /// Folds that produced a report.
    pub folds: usize,
    /// Folds that failed.
    pub errors: usize,
    pub mean_f1_macro: f64,
    /// Sample standard deviation (n − 1) over folds; 0 for a single fold.
    pub std_f1_macro: f64,
    pub mean_accuracy: f64,
}

impl SummaryRow {
    pub fn is_error(&self) -> bool {
        self.errors > 0
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One row per requested (pipeline, components) cell, in the order the cells
/// appear (pipeline order, then ascending components).
pub fn summarize(cells: &[CellResult]) -> Vec<SummaryRow> {
    let mut rows: Vec<SummaryRow> = Vec::new();
    let mut i = 0;
    while i < cells.len() {
        let head = &cells[i];
        let mut j = i;
        while j < cells.len()
            && cells[j].pipeline_index == head.pipeline_index
            && cells[j].components == head.components
        {
            j += 1;
        }
        let group = &cells[i..j];
        let f1: Vec<f64> = group
            .iter()
            .filter_map(|c| c.report.as_ref().map(|r| r.f1_macro))
            .collect();
        let acc: Vec<f64> = group
            .iter()
            .filter_map(|c| c.report.as_ref().map(|r| r.accuracy))
            .collect();
        let (mean_f1_macro, std_f1_macro) = mean_std(&f1);
        rows.push(SummaryRow {
            pipeline: head.pipeline.clone(),
            pipeline_index: head.pipeline_index,
            components: head.components,
            folds: f1.len(),
            errors: group.len() - f1.len(),
            mean_f1_macro,
            std_f1_macro,
            mean_accuracy: mean_std(&acc).0,
        });
        i = j;
    }
    rows
}

fn components_cell(c: Option<usize>) -> String {
    c.map_or_else(|| "-".to_string(), |k| k.to_string())
}

/// Long-format CSV: one line per summary row. Failed cells read `ERR`.
pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out =
        String::from("pipeline,components,folds,errors,mean_f1_macro,std_f1_macro,mean_accuracy\n");
    for r in rows {
        let comps = components_cell(r.components);
        if r.is_error() {
            let _ = writeln!(
                out,
                "{},{comps},{},{},ERR,ERR,ERR",
                r.pipeline, r.folds, r.errors
            );
        } else {
            let _ = writeln!(
                out,
                "{},{comps},{},{},{},{},{}",
                r.pipeline, r.folds, r.errors, r.mean_f1_macro, r.std_f1_macro, r.mean_accuracy
            );
        }
    }
    out
}

/// Wide table: rows are component counts (`-` for reducer-free pipelines),
/// columns are pipelines, cells are `mean ± std` of F1-macro.
pub fn summary_markdown(rows: &[SummaryRow]) -> String {
    let mut pipelines: Vec<(usize, &str)> = Vec::new();
    let mut comps: Vec<Option<usize>> = Vec::new();
    for r in rows {
        if !pipelines.iter().any(|(i, _)| *i == r.pipeline_index) {
            pipelines.push((r.pipeline_index, &r.pipeline));
        }
        if !comps.contains(&r.components) {
            comps.push(r.components);
        }
    }
    pipelines.sort_by_key(|(i, _)| *i);
    comps.sort();

    let mut out = String::from("| components |");
    for (_, name) in &pipelines {
        let _ = write!(out, " {name} |");
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(pipelines.len()));
    out.push('\n');
    for c in comps {
        let _ = write!(out, "| {} |", components_cell(c));
        for (pi, _) in &pipelines {
            let cell = match rows
                .iter()
                .find(|r| r.pipeline_index == *pi && r.components == c)
            {
                None => "n/a".to_string(),
                Some(r) if r.is_error() => "ERR".to_string(),
                Some(r) => format!("{:.4} ± {:.4}", r.mean_f1_macro, r.std_f1_macro),
            };
            let _ = write!(out, " {cell} |");
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct ReportFile<'a> {
    reports: Vec<&'a crate::classify::EvalReport>,
    errors: Vec<&'a CellResult>,
}

/// Write `report.json`, `summary.csv`, `summary.md` and `provenance.json`
/// into `dir` (created if missing). Returns the written paths.
pub fn emit_report(outcome: &ExperimentOutcome, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let rows = summarize(&outcome.cells);
    let body = ReportFile {
        reports: outcome.reports().collect(),
        errors: outcome.errors().collect(),
    };
    let files = [
        (REPORT_JSON, serde_json::to_string_pretty(&body)? + "\n"),
        (SUMMARY_CSV, summary_csv(&rows)),
        (SUMMARY_MD, summary_markdown(&rows)),
        (
            PROVENANCE_JSON,
            serde_json::to_string_pretty(&outcome.provenance)? + "\n",
        ),
    ];
    let mut written = Vec::new();
    for (name, text) in files {
        let path = dir.join(name);
        fs::write(&path, text)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::EvalReport;

    fn cell(
        pi: usize,
        k: Option<usize>,
        fold: usize,
        f1_ok: Option<(&[u32], &[u32])>,
    ) -> CellResult {
        let report =
            f1_ok.map(|(t, p)| EvalReport::score(format!("p{pi}"), k, fold, 1, t, p).unwrap());
        CellResult {
            pipeline: format!("p{pi}"),
            pipeline_index: pi,
            components: k,
            fold,
            error: if report.is_none() {
                Some("reduce stage failed".into())
            } else {
                None
            },
            report,
        }
    }

    #[test]
    fn single_report_gives_one_row() {
        let cells = [cell(0, Some(3), 0, Some((&[1, 2], &[1, 2])))];
        let rows = summarize(&cells);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].mean_f1_macro, 1.0);
        assert_eq!(rows[0].std_f1_macro, 0.0);
        let md = summary_markdown(&rows);
        assert_eq!(md.lines().count(), 3);
        assert!(md.contains("| 3 | 1.0000 ± 0.0000 |"));
    }

    #[test]
    fn mean_and_std_over_folds() {
        let cells = [
            cell(0, None, 0, Some((&[1, 2], &[1, 2]))),
            cell(0, None, 1, Some((&[1, 1, 2, 2], &[1, 2, 2, 2]))),
        ];
        let rows = summarize(&cells);
        let second = 0.5 * (2.0 / 3.0 + 0.8);
        assert!((rows[0].mean_f1_macro - 0.5 * (1.0 + second)).abs() < 1e-15);
        let sd = ((1.0 - second) / 2.0_f64.sqrt()).abs();
        assert!((rows[0].std_f1_macro - sd).abs() < 1e-15);
    }

    #[test]
    fn failed_cells_are_marked_not_dropped() {
        let cells = [
            cell(0, Some(3), 0, Some((&[1, 2], &[1, 2]))),
            cell(1, Some(3), 0, None),
            cell(2, None, 0, Some((&[1, 2], &[2, 1]))),
        ];
        let rows = summarize(&cells);
        assert_eq!(rows.len(), 3);
        let csv = summary_csv(&rows);
        assert!(csv.contains("p1,3,0,1,ERR,ERR,ERR"));
        let md = summary_markdown(&rows);
        assert!(md.contains("ERR"));
        assert!(md.contains("| - | n/a | n/a | 0.0000 ± 0.0000 |"));
    }
}
