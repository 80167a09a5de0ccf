use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::{Error, Result};

/// Principal components of the sample covariance (divisor `n − 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k × p`, orthonormal rows in descending eigenvalue order.
    pub components: Matrix,
    pub explained_variance: Vec<f64>,
}

/// Symmetric eigendecomposition sorted by descending eigenvalue; eigenvectors
/// are returned as rows.
pub(crate) fn sorted_eigen(sym: DMatrix<f64>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = sym.nrows();
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    (values, vectors)
}

/// Flip `v` so that its largest-magnitude entry (first on ties) is positive.
fn sign_normalize(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Sample covariance matrix of the rows of `x`.
pub(crate) fn covariance(x: &Matrix, mean: &[f64]) -> DMatrix<f64> {
    let p = x.cols();
    let mut cov = DMatrix::<f64>::zeros(p, p);
    let mut centred = vec![0.0; p];
    for r in x.iter_rows() {
        for j in 0..p {
            centred[j] = r[j] - mean[j];
        }
        for a in 0..p {
            for b in a..p {
                cov[(a, b)] += centred[a] * centred[b];
            }
        }
    }
    let d = (x.rows() - 1) as f64;
    for a in 0..p {
        for b in a..p {
            cov[(a, b)] /= d;
            cov[(b, a)] = cov[(a, b)];
        }
    }
    cov
}

pub(crate) fn column_means(x: &Matrix) -> Vec<f64> {
    let mut mean = vec![0.0; x.cols()];
    for r in x.iter_rows() {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= x.rows() as f64);
    mean
}

impl PcaModel {
    pub fn fit(x: &Matrix, k: usize) -> Result<Self> {
        let p = x.cols();
        if x.rows() < 2 {
            return Err(Error::arg("PCA needs at least two rows"));
        }
        if k == 0 || k > p {
            return Err(Error::arg(format!("component count {k} outside 1..={p}")));
        }
        let mean = column_means(x);
        let (values, vectors) = sorted_eigen(covariance(x, &mean));
        let mut data = Vec::with_capacity(k * p);
        for mut v in vectors.into_iter().take(k) {
            sign_normalize(&mut v);
            data.extend(v);
        }
        Ok(PcaModel {
            mean,
            components: Matrix::new(k, p, data)?,
            explained_variance: values.into_iter().take(k).map(|v| v.max(0.0)).collect(),
        })
    }

    pub fn n_components(&self) -> usize {
        self.components.rows()
    }

    fn project(&self, row: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(self.components.iter_rows()) {
            *o = c
                .iter()
                .zip(row)
                .zip(&self.mean)
                .map(|((c, x), m)| c * (x - m))
                .sum();
        }
    }

    /// Rows `components · (x − mean)`.
    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        x.check_cols(self.mean.len(), "PCA transform")?;
        let k = self.n_components();
        let mut out = Matrix::zeros(x.rows(), k);
        for (i, r) in x.iter_rows().enumerate() {
            self.project(r, out.row_mut(i));
        }
        Ok(out)
    }

    /// Map latent rows back to feature space: `mean + componentsᵀ · z`.
    pub fn inverse_transform(&self, z: &Matrix) -> Result<Matrix> {
        z.check_cols(self.n_components(), "PCA inverse transform")?;
        let p = self.mean.len();
        let mut out = Matrix::zeros(z.rows(), p);
        for (i, zr) in z.iter_rows().enumerate() {
            let o = out.row_mut(i);
            o.copy_from_slice(&self.mean);
            for (zc, c) in zr.iter().zip(self.components.iter_rows()) {
                for (oj, cj) in o.iter_mut().zip(c) {
                    *oj += zc * cj;
                }
            }
        }
        Ok(out)
    }
}
