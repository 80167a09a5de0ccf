//! KNN and random-forest classifiers, stratified folds and F1 metrics.

mod cv;
mod forest;
mod knn;
mod metrics;

pub use cv::{split_fold, stratified_kfold, DEFAULT_FOLDS};
pub use forest::{
    balanced_weights, ClassWeight, DecisionTree, ForestParams, MaxFeatures, Node, RfModel,
};
pub use knn::{KnnModel, DEFAULT_NEIGHBORS};
pub use metrics::{accuracy, confusion_matrix, f1_macro, per_class_f1, ConfusionTable, EvalReport};

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::Result;

fn default_neighbors() -> usize {
    DEFAULT_NEIGHBORS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ClassifierSpec {
    Knn {
        #[serde(default = "default_neighbors")]
        k: usize,
    },
    Rf(ForestParams),
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        ClassifierSpec::Knn {
            k: DEFAULT_NEIGHBORS,
        }
    }
}

impl ClassifierSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ClassifierSpec::Knn { .. } => "knn",
            ClassifierSpec::Rf(_) => "rf",
        }
    }

    /// [`name`](Self::name), suffixed with the neighbour or tree count when
    /// it differs from the default (`knn5`, `rf100`).
    pub fn label(&self) -> String {
        match self {
            ClassifierSpec::Knn { k } if *k != DEFAULT_NEIGHBORS => format!("knn{k}"),
            ClassifierSpec::Rf(p) if p.n_estimators != ForestParams::default().n_estimators => {
                format!("rf{}", p.n_estimators)
            }
            _ => self.name().to_string(),
        }
    }

    pub fn fit(&self, x: &Matrix, y: &[u32], seed: u64) -> Result<FittedClassifier> {
        Ok(match self {
            ClassifierSpec::Knn { k } => FittedClassifier::Knn(KnnModel::fit(x, y, *k)?),
            ClassifierSpec::Rf(p) => FittedClassifier::Rf(RfModel::fit(x, y, p, seed)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "kebab-case")]
pub enum FittedClassifier {
    Knn(KnnModel),
    Rf(RfModel),
}

impl FittedClassifier {
    pub fn predict(&self, x: &Matrix) -> Result<Vec<u32>> {
        match self {
            FittedClassifier::Knn(m) => m.predict(x),
            FittedClassifier::Rf(m) => m.predict(x),
        }
    }
}
