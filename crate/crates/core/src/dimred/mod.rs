//! Feature-space reducers: PCA, Nystroem and a small autoencoder, plus the
//! column standardiser that precedes them.

mod autoencoder;
mod nystroem;
mod pca;
mod scale;

pub use autoencoder::{Activation, AeModel, Dense, TrainConfig};
pub use nystroem::{GammaRule, NystroemModel, EIGEN_FLOOR};
pub use pca::PcaModel;
pub use scale::Standardizer;

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::Result;

/// Version tag written into serialised reducer blobs.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Landmarks used when a configuration does not say.
pub const DEFAULT_LANDMARKS: usize = 200;

fn default_landmarks() -> usize {
    DEFAULT_LANDMARKS
}

/// Which reducer to fit, with its hyperparameters (component count aside).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReducerSpec {
    None,
    Pca,
    Nystroem {
        /// Landmark count; capped at the number of training rows.
        #[serde(default = "default_landmarks")]
        landmarks: usize,
        #[serde(default)]
        gamma: GammaRule,
    },
    #[serde(rename = "ae", alias = "autoencoder")]
    Autoencoder(TrainConfig),
}

impl ReducerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ReducerSpec::None => "none",
            ReducerSpec::Pca => "pca",
            ReducerSpec::Nystroem { .. } => "nystroem",
            ReducerSpec::Autoencoder(_) => "ae",
        }
    }

    /// Fit on `x` with `k` output components; `seed` drives any sampling.
    pub fn fit(&self, x: &Matrix, k: usize, seed: u64) -> Result<FittedReducer> {
        Ok(match self {
            ReducerSpec::None => FittedReducer::Identity { cols: x.cols() },
            ReducerSpec::Pca => FittedReducer::Pca(PcaModel::fit(x, k)?),
            ReducerSpec::Nystroem { landmarks, gamma } => {
                let m = (*landmarks).min(x.rows());
                FittedReducer::Nystroem(NystroemModel::fit(x, m, *gamma, k, seed)?)
            }
            ReducerSpec::Autoencoder(cfg) => {
                let cfg = TrainConfig {
                    seed,
                    ..cfg.clone()
                };
                FittedReducer::Autoencoder(AeModel::fit(x, k, &cfg)?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "kebab-case")]
pub enum FittedReducer {
    Identity { cols: usize },
    Pca(PcaModel),
    Nystroem(NystroemModel),
    Autoencoder(AeModel),
}

impl FittedReducer {
    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        match self {
            FittedReducer::Identity { cols } => {
                x.check_cols(*cols, "identity reducer")?;
                Ok(x.clone())
            }
            FittedReducer::Pca(m) => m.transform(x),
            FittedReducer::Nystroem(m) => m.transform(x),
            FittedReducer::Autoencoder(m) => m.encode(x),
        }
    }
}

/// A scaler plus reducer, as written to disk by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedReducer {
    pub format_version: u32,
    pub input_columns: Vec<String>,
    pub scaler: Option<Standardizer>,
    pub reducer: FittedReducer,
    pub seed: u64,
}

impl SavedReducer {
    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        match &self.scaler {
            Some(s) => self.reducer.transform(&s.apply(x)?),
            None => self.reducer.transform(x),
        }
    }
}
