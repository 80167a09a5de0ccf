use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::{Error, Result};

pub const DEFAULT_NEIGHBORS: usize = 10;

/// Brute-force Euclidean k-nearest-neighbour classifier.
///
/// Distance ties are broken by the smaller training-row index and vote ties
/// by the smaller class code, so predictions are fully deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub train: Matrix,
    pub labels: Vec<u32>,
    pub k: usize,
    /// Sorted distinct training labels.
    classes: Vec<u32>,
    /// `labels` mapped to positions in `classes`.
    label_idx: Vec<u32>,
}

impl KnnModel {
    pub fn fit(x: &Matrix, y: &[u32], k: usize) -> Result<Self> {
        if y.len() != x.rows() {
            return Err(Error::arg(format!(
                "{} labels for {} rows",
                y.len(),
                x.rows()
            )));
        }
        if y.is_empty() {
            return Err(Error::arg("KNN needs at least one training row"));
        }
        if k == 0 || k > x.rows() {
            return Err(Error::arg(format!("k = {k} outside 1..={}", x.rows())));
        }
        let mut classes = y.to_vec();
        classes.sort_unstable();
        classes.dedup();
        let label_idx = y
            .iter()
            .map(|l| classes.binary_search(l).unwrap() as u32)
            .collect();
        Ok(KnnModel {
            train: x.clone(),
            labels: y.to_vec(),
            k,
            classes,
            label_idx,
        })
    }

    /// Indices of the `k` nearest training rows, nearest first.
    pub fn neighbors(&self, q: &[f64]) -> Vec<usize> {
        let mut d: Vec<(f64, u32)> = self
            .train
            .iter_rows()
            .enumerate()
            .map(|(i, r)| {
                (
                    r.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
                    i as u32,
                )
            })
            .collect();
        let cmp = |a: &(f64, u32), b: &(f64, u32)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, cmp);
            d.truncate(self.k);
        }
        d.sort_unstable_by(cmp);
        d.into_iter().map(|(_, i)| i as usize).collect()
    }

    fn predict_one(&self, q: &[f64], votes: &mut [u32]) -> u32 {
        votes.iter_mut().for_each(|v| *v = 0);
        for i in self.neighbors(q) {
            votes[self.label_idx[i] as usize] += 1;
        }
        let mut best = 0;
        for (c, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = c;
            }
        }
        self.classes[best]
    }

    pub fn predict(&self, q: &Matrix) -> Result<Vec<u32>> {
        q.check_cols(self.train.cols(), "KNN query")?;
        Ok((0..q.rows())
            .into_par_iter()
            .map_init(
                || vec![0u32; self.classes.len()],
                |votes, i| self.predict_one(q.row(i), votes),
            )
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k1_returns_matching_row_label() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0], [5.0, 5.0]]).unwrap();
        let m = KnnModel::fit(&x, &[7, 8, 9], 1).unwrap();
        assert_eq!(m.predict(&x).unwrap(), vec![7, 8, 9]);
    }

    #[test]
    fn majority_vote() {
        let x = Matrix::from_rows(&[[0.0], [0.1], [0.2], [10.0]]).unwrap();
        let m = KnnModel::fit(&x, &[1, 1, 2, 2], 3).unwrap();
        assert_eq!(
            m.predict(&Matrix::from_rows(&[[0.05]]).unwrap()).unwrap(),
            vec![1]
        );
    }

    #[test]
    fn ties_go_to_smaller_index_then_smaller_class() {
        // both rows at distance 1: k = 1 takes row 0
        let x = Matrix::from_rows(&[[1.0], [-1.0]]).unwrap();
        let m = KnnModel::fit(&x, &[5, 3], 1).unwrap();
        assert_eq!(
            m.predict(&Matrix::from_rows(&[[0.0]]).unwrap()).unwrap(),
            vec![5]
        );
        // k = 2: one vote each, smaller class code wins
        let m = KnnModel::fit(&x, &[5, 3], 2).unwrap();
        assert_eq!(
            m.predict(&Matrix::from_rows(&[[0.0]]).unwrap()).unwrap(),
            vec![3]
        );
    }

    #[test]
    fn argument_errors() {
        let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(KnnModel::fit(&x, &[1, 2], 3).is_err());
        assert!(KnnModel::fit(&x, &[1], 1).is_err());
        let m = KnnModel::fit(&x, &[1, 2], 1).unwrap();
        assert!(m.predict(&Matrix::zeros(1, 2)).is_err());
    }
}
