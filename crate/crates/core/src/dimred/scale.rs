use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::{Error, Result};

/// Per-column standardisation to mean 0 and unit (population) standard
/// deviation. Constant columns are only centred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Result<Self> {
        let n = x.rows();
        if n == 0 {
            return Err(Error::arg("cannot fit a scaler on zero rows"));
        }
        let p = x.cols();
        let mut mean = vec![0.0; p];
        let mut scale = vec![1.0; p];
        for j in 0..p {
            let first = x.get(0, j);
            if x.iter_rows().all(|r| r[j] == first) {
                mean[j] = first;
                continue;
            }
            let m = x.iter_rows().map(|r| r[j]).sum::<f64>() / n as f64;
            let var = x.iter_rows().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n as f64;
            mean[j] = m;
            let sd = var.sqrt();
            if sd > 1e-12 * (1.0 + m.abs()) {
                scale[j] = sd;
            }
        }
        Ok(Standardizer { mean, scale })
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        x.check_cols(self.mean.len(), "standardize")?;
        let mut out = x.clone();
        let p = self.mean.len();
        if p > 0 {
            for row in out.data_mut().chunks_exact_mut(p) {
                for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
                    *v = (*v - m) / s;
                }
            }
        }
        Ok(out)
    }

    pub fn fit_apply(x: &Matrix) -> Result<(Self, Matrix)> {
        let s = Self::fit(x)?;
        let y = s.apply(x)?;
        Ok((s, y))
    }
}
