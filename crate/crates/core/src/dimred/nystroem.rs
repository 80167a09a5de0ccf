use nalgebra::DMatrix;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::pca::sorted_eigen;
use crate::matrix::Matrix;
use crate::rng;
use crate::{Error, Result};

/// Eigenvalues of the landmark Gram matrix at or below this are dropped.
pub const EIGEN_FLOOR: f64 = 1e-10;

/// How the RBF bandwidth is chosen at fit time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaRule {
    Fixed(f64),
    /// `1 / p` for `p` input columns.
    #[default]
    InverseFeatures,
    /// `1 / median` of squared pairwise landmark distances.
    Median,
}

/// Nystroem feature map for the RBF kernel `exp(−γ‖x − y‖²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NystroemModel {
    pub landmarks: Matrix,
    pub gamma: f64,
    /// `m × k'`: landmark Gram eigenvectors scaled by `λ^{-1/2}`.
    pub whitener: Matrix,
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d).exp()
}

fn median_gamma(landmarks: &Matrix) -> f64 {
    let m = landmarks.rows();
    let mut d = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in i + 1..m {
            let (a, b) = (landmarks.row(i), landmarks.row(j));
            d.push(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum());
        }
    }
    d.retain(|v| *v > 0.0);
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    1.0 / d[d.len() / 2]
}

impl NystroemModel {
    /// Sample `m` landmark rows without replacement and build a map with at
    /// most `k` output columns.
    pub fn fit(x: &Matrix, m: usize, gamma: GammaRule, k: usize, seed: u64) -> Result<Self> {
        if m == 0 || m > x.rows() {
            return Err(Error::arg(format!(
                "landmark count {m} outside 1..={}",
                x.rows()
            )));
        }
        if k == 0 {
            return Err(Error::arg("component count must be positive"));
        }
        let mut r = rng::seeded(seed);
        let mut idx = sample(&mut r, x.rows(), m).into_vec();
        idx.sort_unstable();
        let landmarks = x.select_rows(&idx);
        let gamma = match gamma {
            GammaRule::Fixed(g) => g,
            GammaRule::InverseFeatures => 1.0 / x.cols().max(1) as f64,
            GammaRule::Median => median_gamma(&landmarks),
        };
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::arg(format!("gamma must be positive, got {gamma}")));
        }

        let gram = DMatrix::from_fn(m, m, |i, j| rbf(landmarks.row(i), landmarks.row(j), gamma));
        let (values, vectors) = sorted_eigen(gram);
        let kept: Vec<usize> = (0..m)
            .filter(|&i| values[i] > EIGEN_FLOOR)
            .take(k)
            .collect();
        let kk = kept.len();
        let mut w = Matrix::zeros(m, kk);
        for (c, &i) in kept.iter().enumerate() {
            let s = values[i].sqrt();
            for j in 0..m {
                w.row_mut(j)[c] = vectors[i][j] / s;
            }
        }
        Ok(NystroemModel {
            landmarks,
            gamma,
            whitener: w,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.whitener.cols()
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        x.check_cols(self.landmarks.cols(), "Nystroem transform")?;
        let (m, k) = (self.landmarks.rows(), self.output_dim());
        let mut out = Matrix::zeros(x.rows(), k);
        let mut kv = vec![0.0; m];
        for (i, r) in x.iter_rows().enumerate() {
            for (j, kj) in kv.iter_mut().enumerate() {
                *kj = rbf(r, self.landmarks.row(j), self.gamma);
            }
            let o = out.row_mut(i);
            for (j, kj) in kv.iter().enumerate() {
                for (oc, wc) in o.iter_mut().zip(self.whitener.row(j)) {
                    *oc += kj * wc;
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random(n: usize, p: usize, seed: u64) -> Matrix {
        let mut r = rng::seeded(seed);
        Matrix::new(n, p, (0..n * p).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn full_landmarks_reproduce_gram() {
        let x = random(30, 4, 1);
        let model = NystroemModel::fit(&x, 30, GammaRule::Fixed(0.5), 30, 9).unwrap();
        let z = model.transform(&x).unwrap();
        for i in 0..30 {
            for j in 0..30 {
                let approx: f64 = z.row(i).iter().zip(z.row(j)).map(|(a, b)| a * b).sum();
                let exact = rbf(x.row(i), x.row(j), 0.5);
                assert!(
                    (approx - exact).abs() < 1e-6,
                    "({i},{j}) {approx} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn tiny_gamma_has_rank_one() {
        let x = random(20, 3, 2);
        let model = NystroemModel::fit(&x, 20, GammaRule::Fixed(1e-14), 20, 0).unwrap();
        assert_eq!(model.output_dim(), 1);
    }

    #[test]
    fn duplicates_map_identically() {
        let x = random(10, 3, 3);
        let model = NystroemModel::fit(&x, 5, GammaRule::InverseFeatures, 4, 0).unwrap();
        let dup = x.select_rows(&[2, 2]);
        let z = model.transform(&dup).unwrap();
        assert_eq!(z.row(0), z.row(1));
        assert!(model.output_dim() <= 4);
    }

    #[test]
    fn too_many_landmarks() {
        let x = random(5, 2, 4);
        assert!(NystroemModel::fit(&x, 6, GammaRule::InverseFeatures, 2, 0).is_err());
        assert!(
            NystroemModel::fit(&x, 3, GammaRule::Median, 2, 0)
                .unwrap()
                .gamma
                > 0.0
        );
    }
}
