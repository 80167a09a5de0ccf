//! Independent reference implementations used as test oracles. None of these
//! share code with the library routines they check.

#![allow(dead_code)]

use prodcoef::cloud::Point;
use prodcoef::rng::{seeded, Rng};
use rand::Rng as _;

pub fn rng(seed: u64) -> Rng {
    seeded(seed)
}

pub fn uniform_points(n: usize, seed: u64) -> Vec<Point> {
    let mut r = rng(seed);
    (0..n).map(|_| [r.gen(), r.gen(), r.gen()]).collect()
}

/// Cyclic Jacobi eigensolver for a small symmetric matrix. Returns
/// eigenvalues in descending order and the matching unit eigenvectors.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| f64::from(i == j)).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| m[i][i] * m[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q] == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| m[j][j].partial_cmp(&m[i][i]).unwrap());
    let values = idx.iter().map(|&i| m[i][i]).collect();
    let vectors = idx
        .iter()
        .map(|&i| (0..n).map(|k| v[k][i]).collect())
        .collect();
    (values, vectors)
}

/// Sample covariance (divisor n − 1) of row-major data.
pub fn covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len() as f64;
    let p = rows[0].len();
    let mean: Vec<f64> = (0..p)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n)
        .collect();
    (0..p)
        .map(|a| {
            (0..p)
                .map(|b| {
                    rows.iter()
                        .map(|r| (r[a] - mean[a]) * (r[b] - mean[b]))
                        .sum::<f64>()
                        / (n - 1.0)
                })
                .collect()
        })
        .collect()
}

/// KNN by materialising the full query × train distance matrix and fully
/// sorting each row. Distance ties go to the lower training index and vote
/// ties to the smaller class code.
pub fn knn_oracle(train: &[Vec<f64>], labels: &[u32], queries: &[Vec<f64>], k: usize) -> Vec<u32> {
    let dist: Vec<Vec<f64>> = queries
        .iter()
        .map(|q| {
            train
                .iter()
                .map(|t| t.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum())
                .collect()
        })
        .collect();
    dist.iter()
        .map(|row| {
            let mut order: Vec<usize> = (0..row.len()).collect();
            order.sort_by(|&a, &b| row[a].partial_cmp(&row[b]).unwrap().then(a.cmp(&b)));
            let mut votes = std::collections::BTreeMap::<u32, usize>::new();
            for &i in &order[..k] {
                *votes.entry(labels[i]).or_default() += 1;
            }
            let top = *votes.values().max().unwrap();
            *votes.iter().find(|(_, &v)| v == top).unwrap().0
        })
        .collect()
}

/// F1 per class straight from the definition 2·TP / (2·TP + FP + FN).
pub fn f1_from_confusion(c: &[Vec<u64>]) -> Vec<f64> {
    (0..c.len())
        .map(|i| {
            let tp = c[i][i] as f64;
            let fn_: f64 = (0..c.len())
                .filter(|&j| j != i)
                .map(|j| c[i][j] as f64)
                .sum();
            let fp: f64 = (0..c.len())
                .filter(|&j| j != i)
                .map(|j| c[j][i] as f64)
                .sum();
            if tp + fp + fn_ == 0.0 {
                0.0
            } else {
                2.0 * tp / (2.0 * tp + fp + fn_)
            }
        })
        .collect()
}

/// Max relative discrepancy between analytic and central-difference
/// gradients. Entries where both are below `floor` are compared absolutely
/// against `floor`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}
