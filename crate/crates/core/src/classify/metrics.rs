use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

fn check_square(confusion: &[Vec<u64>]) -> Result<()> {
    let c = confusion.len();
    if confusion.iter().any(|r| r.len() != c) {
        return Err(Error::arg("confusion matrix must be square"));
    }
    Ok(())
}

/// Per-class F1 = 2PR/(P+R) with precision from column sums and recall from
/// row sums (rows are truth). Undefined ratios count as 0.
pub fn per_class_f1(confusion: &[Vec<u64>]) -> Result<Vec<f64>> {
    check_square(confusion)?;
    let c = confusion.len();
    Ok((0..c)
        .map(|k| {
            let tp = confusion[k][k] as f64;
            let row: u64 = confusion[k].iter().sum();
            let col: u64 = confusion.iter().map(|r| r[k]).sum();
            let p = if col > 0 { tp / col as f64 } else { 0.0 };
            let r = if row > 0 { tp / row as f64 } else { 0.0 };
            if p + r > 0.0 {
                2.0 * p * r / (p + r)
            } else {
                0.0
            }
        })
        .collect())
}

/// Unweighted mean of per-class F1 over the classes present in the truth rows.
pub fn f1_macro(confusion: &[Vec<u64>]) -> Result<f64> {
    let f1 = per_class_f1(confusion)?;
    let present: Vec<f64> = f1
        .iter()
        .zip(confusion)
        .filter(|(_, row)| row.iter().sum::<u64>() > 0)
        .map(|(f, _)| *f)
        .collect();
    if present.is_empty() {
        return Ok(0.0);
    }
    Ok(present.iter().sum::<f64>() / present.len() as f64)
}

/// Trace over total; 0 for an empty matrix.
pub fn accuracy(confusion: &[Vec<u64>]) -> Result<f64> {
    check_square(confusion)?;
    let total: u64 = confusion.iter().flatten().sum();
    if total == 0 {
        return Ok(0.0);
    }
    let trace: u64 = (0..confusion.len()).map(|k| confusion[k][k]).sum();
    Ok(trace as f64 / total as f64)
}

/// Confusion counts with rows = truth and columns = prediction, indexed by
/// position in `classes`.
pub fn confusion_matrix(
    truth: &[u32],
    predicted: &[u32],
    classes: &[u32],
) -> Result<Vec<Vec<u64>>> {
    if truth.len() != predicted.len() {
        return Err(Error::arg(format!(
            "{} truths for {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let pos = |l: u32| {
        classes
            .iter()
            .position(|&c| c == l)
            .ok_or_else(|| Error::arg(format!("label {l} not among classes {classes:?}")))
    };
    let mut m = vec![vec![0u64; classes.len()]; classes.len()];
    for (&t, &p) in truth.iter().zip(predicted) {
        m[pos(t)?][pos(p)?] += 1;
    }
    Ok(m)
}

/// Result of evaluating one pipeline on one test fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub pipeline: String,
    /// Reducer output width, `None` when no reducer ran.
    pub components: Option<usize>,
    pub fold: usize,
    pub seed: u64,
    pub classes: Vec<u32>,
    pub confusion: Vec<Vec<u64>>,
    pub per_class_f1: Vec<f64>,
    pub f1_macro: f64,
    pub accuracy: f64,
    /// Free-form echo of the configuration that produced this report.
    #[serde(default)]
    pub config: serde_json::Value,
}

impl EvalReport {
    /// Score `predicted` against `truth`. The class list is the sorted union of
    /// both label sets.
    pub fn score(
        pipeline: impl Into<String>,
        components: Option<usize>,
        fold: usize,
        seed: u64,
        truth: &[u32],
        predicted: &[u32],
    ) -> Result<Self> {
        let mut classes: Vec<u32> = truth.iter().chain(predicted).copied().collect();
        classes.sort_unstable();
        classes.dedup();
        let confusion = confusion_matrix(truth, predicted, &classes)?;
        Ok(EvalReport {
            pipeline: pipeline.into(),
            components,
            fold,
            seed,
            per_class_f1: per_class_f1(&confusion)?,
            f1_macro: f1_macro(&confusion)?,
            accuracy: accuracy(&confusion)?,
            classes,
            confusion,
            config: serde_json::Value::Null,
        })
    }

    /// Aligned text rendering of the confusion matrix.
    pub fn confusion_table(&self) -> ConfusionTable<'_> {
        ConfusionTable(self)
    }
}

pub struct ConfusionTable<'a>(&'a EvalReport);

impl fmt::Display for ConfusionTable<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.0;
        let width = r
            .confusion
            .iter()
            .flatten()
            .map(|v| v.to_string().len())
            .chain(r.classes.iter().map(|c| c.to_string().len()))
            .chain([5])
            .max()
            .unwrap_or(5);
        write!(f, "{:>width$}", "truth")?;
        for c in &r.classes {
            write!(f, " {c:>width$}")?;
        }
        writeln!(f, " {:>width$}", "f1")?;
        for (i, row) in r.confusion.iter().enumerate() {
            write!(f, "{:>width$}", r.classes[i])?;
            for v in row {
                write!(f, " {v:>width$}")?;
            }
            writeln!(f, " {:>width$.4}", r.per_class_f1[i])?;
        }
        writeln!(f, "f1_macro {:.4}  accuracy {:.4}", r.f1_macro, r.accuracy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_hopeless() {
        let perfect = vec![vec![3, 0], vec![0, 4]];
        assert_eq!(f1_macro(&perfect).unwrap(), 1.0);
        assert_eq!(accuracy(&perfect).unwrap(), 1.0);
        let wrong = vec![vec![0, 3], vec![4, 0]];
        assert_eq!(f1_macro(&wrong).unwrap(), 0.0);
        assert_eq!(accuracy(&wrong).unwrap(), 0.0);
    }

    #[test]
    fn worked_example() {
        let m = vec![vec![5, 1], vec![2, 2]];
        let f1 = per_class_f1(&m).unwrap();
        assert!((f1[0] - 10.0 / 13.0).abs() < 1e-15);
        assert!((f1[1] - 4.0 / 7.0).abs() < 1e-15);
        assert!((f1_macro(&m).unwrap() - 0.5 * (10.0 / 13.0 + 4.0 / 7.0)).abs() < 1e-12);
        assert!((accuracy(&m).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn non_square_rejected() {
        assert!(f1_macro(&[vec![1, 2]]).is_err());
        assert!(accuracy(&[vec![1], vec![1, 2]]).is_err());
    }

    #[test]
    fn report_invariants_and_table() {
        let truth = [1, 1, 2, 2, 3, 3, 3];
        let pred = [1, 2, 2, 2, 3, 1, 3];
        let r = EvalReport::score("knn", Some(3), 0, 42, &truth, &pred).unwrap();
        let rows: Vec<u64> = r.confusion.iter().map(|row| row.iter().sum()).collect();
        assert_eq!(rows, vec![2, 2, 3]);
        let mean = r.per_class_f1.iter().sum::<f64>() / 3.0;
        assert_eq!(r.f1_macro, mean);
        assert!((r.accuracy - 5.0 / 7.0).abs() < 1e-15);
        let text = r.confusion_table().to_string();
        assert!(text.starts_with("truth"));
        assert_eq!(text.lines().count(), 5);
    }
}
