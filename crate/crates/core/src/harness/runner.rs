//! Cross-validated execution of the pipeline grid.
//!
//! Every learned transform is fitted through [`TransformStage::fit`] or
//! [`FittedPipeline::fit`], both of which only ever receive training rows;
//! [`FoldData`] is the one place where a fold is split, and it hands out the
//! test rows solely for prediction.

use std::fs::File;
use std::io::BufReader;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{split_fold, stratified_kfold, ClassifierSpec, EvalReport, FittedClassifier};
use crate::cloud::{normalize_unit_cube, NormalizedCloud, PointCloud, UnitCubeTransform};
use crate::dimred::{FittedReducer, ReducerSpec, Standardizer};
use crate::features::extract_all;
use crate::io::{read_csv, read_las};
use crate::matrix::{FeatureMatrix, Matrix};
use crate::rng::derive_seed;
use crate::{Error, Result};

use super::config::{ExperimentConfig, FitScope, InputSpec, PipelineSpec};
use super::scene::generate_scene;

const FOLD_STREAM: u64 = 0xF01D;

/// Stable 64-bit FNV-1a hash, used to turn cell identities into RNG streams.
fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Seed for a named cell of the grid; independent of scheduling.
pub fn cell_seed(seed: u64, cell: &str) -> u64 {
    derive_seed(seed, fnv1a(cell))
}

/// One fold's rows. Fitting code gets [`FoldData::train`]; only
/// [`FoldData::test`] exposes held-out rows and nothing fits on its output.
pub struct FoldData {
    train_x: Matrix,
    train_y: Vec<u32>,
    test_x: Matrix,
    test_y: Vec<u32>,
}

impl FoldData {
    pub fn new(x: &Matrix, y: &[u32], train: &[usize], test: &[usize]) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::arg("feature rows and labels differ in length"));
        }
        Ok(FoldData {
            train_x: x.select_rows(train),
            train_y: train.iter().map(|&i| y[i]).collect(),
            test_x: x.select_rows(test),
            test_y: test.iter().map(|&i| y[i]).collect(),
        })
    }

    pub fn train(&self) -> (&Matrix, &[u32]) {
        (&self.train_x, &self.train_y)
    }

    pub fn test(&self) -> (&Matrix, &[u32]) {
        (&self.test_x, &self.test_y)
    }
}

/// Optional standardiser followed by a reducer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformStage {
    pub scaler: Option<Standardizer>,
    pub reducer: FittedReducer,
}

impl TransformStage {
    pub fn fit(
        train: &Matrix,
        reducer: &ReducerSpec,
        components: Option<usize>,
        standardize: bool,
        seed: u64,
    ) -> Result<Self> {
        let (scaler, z) = if standardize {
            let (s, z) = Standardizer::fit_apply(train)?;
            (Some(s), z)
        } else {
            (None, train.clone())
        };
        let k = components.unwrap_or(z.cols());
        let reducer = reducer.fit(&z, k, seed).map_err(|e| e.in_stage("reduce"))?;
        Ok(TransformStage { scaler, reducer })
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        match &self.scaler {
            Some(s) => self.reducer.transform(&s.apply(x)?),
            None => self.reducer.transform(x),
        }
    }
}

/// Everything a pipeline learned from one training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline {
    pub stage: TransformStage,
    pub latent_scaler: Option<Standardizer>,
    pub classifier: FittedClassifier,
}

impl FittedPipeline {
    /// Fit the classifier (and optional latent scaler) on training rows,
    /// reusing an already fitted transform stage.
    pub fn fit(
        stage: TransformStage,
        train: &Matrix,
        train_y: &[u32],
        standardize_latent: bool,
        classifier: &ClassifierSpec,
        seed: u64,
    ) -> Result<Self> {
        let z = stage.transform(train)?;
        let (latent_scaler, z) = if standardize_latent {
            let (s, z) = Standardizer::fit_apply(&z)?;
            (Some(s), z)
        } else {
            (None, z)
        };
        let classifier = classifier
            .fit(&z, train_y, seed)
            .map_err(|e| e.in_stage("classify"))?;
        Ok(FittedPipeline {
            stage,
            latent_scaler,
            classifier,
        })
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<u32>> {
        let z = self.stage.transform(x)?;
        let z = match &self.latent_scaler {
            Some(s) => s.apply(&z)?,
            None => z,
        };
        self.classifier.predict(&z)
    }
}

/// Fit `pipeline` on one fold's training rows and score it on the test rows.
pub fn run_fold_cell(
    fold: &FoldData,
    pipeline: &PipelineSpec,
    components: Option<usize>,
    seed: u64,
) -> Result<(FittedPipeline, Vec<u32>)> {
    let (x, y) = fold.train();
    let stage = TransformStage::fit(
        x,
        &pipeline.reducer,
        components,
        scales_features(pipeline),
        seed,
    )?;
    let fitted = FittedPipeline::fit(
        stage,
        x,
        y,
        pipeline.standardize_latent && pipeline.has_reducer(),
        &pipeline.classifier,
        seed,
    )?;
    let predicted = fitted.predict(fold.test().0)?;
    Ok((fitted, predicted))
}

/// Outcome of one (pipeline, components, fold) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub pipeline: String,
    pub pipeline_index: usize,
    pub components: Option<usize>,
    pub fold: usize,
    pub report: Option<EvalReport>,
    /// Stage-tagged diagnostic when the cell failed.
    pub error: Option<String>,
}

/// Record of the data side of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunProvenance {
    pub crate_version: String,
    pub config: ExperimentConfig,
    pub n_points: usize,
    /// `(class, count)` pairs, ascending by class.
    pub class_counts: Vec<(u32, usize)>,
    pub transform: UnitCubeTransform,
    pub feature_columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    /// Sorted by pipeline order, then components, then fold.
    pub cells: Vec<CellResult>,
    pub provenance: RunProvenance,
}

impl ExperimentOutcome {
    pub fn reports(&self) -> impl Iterator<Item = &EvalReport> + '_ {
        self.cells.iter().filter_map(|c| c.report.as_ref())
    }

    pub fn errors(&self) -> impl Iterator<Item = &CellResult> + '_ {
        self.cells.iter().filter(|c| c.error.is_some())
    }
}

/// Read, normalise and label-check the configured input.
pub fn load_input(config: &ExperimentConfig) -> Result<PointCloud> {
    let cloud = match &config.input {
        InputSpec::Synthetic { .. } => {
            let spec = config.scene_spec().expect("synthetic input has a scene");
            generate_scene(&spec)?
        }
        InputSpec::Csv { path, schema } => read_csv(BufReader::new(File::open(path)?), schema)?,
        InputSpec::Las { path } => read_las(BufReader::new(File::open(path)?))?,
    };
    if cloud.labels().is_none() {
        return Err(Error::Schema(
            "experiment input carries no class labels".into(),
        ));
    }
    Ok(cloud)
}

/// Full run from the configured input.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let cloud = load_input(config).map_err(|e| e.in_stage("ingest"))?;
    let normalized =
        normalize_unit_cube(&cloud, config.normalization).map_err(|e| e.in_stage("normalize"))?;
    run_on_cloud(config, &normalized)
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::arg(format!("thread pool: {e}")))
}

fn scales_features(p: &PipelineSpec) -> bool {
    // the reducer-free path standardises too, so KNN distances stay comparable
    p.standardize_features || !p.has_reducer()
}

/// A reducer fit shared by every pipeline with the same features, scaling,
/// reducer and component count.
struct Group {
    features_idx: usize,
    standardize: bool,
    reducer: ReducerSpec,
    components: Option<usize>,
    members: Vec<usize>,
}

impl Group {
    fn key(&self, sets: &[FeatureMatrix]) -> String {
        format!(
            "reducer|{}|{}|{:?}{}",
            sets[self.features_idx].column_names.join(","),
            serde_json::to_string(&self.reducer).unwrap_or_default(),
            self.components,
            if self.standardize { "" } else { "|raw" }
        )
    }
}

/// Run the grid on an already normalised, labelled cloud.
pub fn run_on_cloud(
    config: &ExperimentConfig,
    cloud: &NormalizedCloud,
) -> Result<ExperimentOutcome> {
    config.validate()?;
    let labels = cloud
        .labels()
        .ok_or_else(|| Error::Schema("experiment input carries no class labels".into()))?
        .to_vec();
    let mut extraction = config.extraction.clone();
    extraction.include_xyz = true;
    let mut features =
        extract_all(cloud, &extraction, config.threads).map_err(|e| e.in_stage("extract"))?;
    if let Some(p) = features.provenance.as_mut() {
        p.seed = Some(config.seed);
    }

    // distinct feature sets, in first-use order
    let mut set_of = Vec::with_capacity(config.pipelines.len());
    let mut sets: Vec<(super::config::FeatureSet, FeatureMatrix)> = Vec::new();
    for p in &config.pipelines {
        let idx = match sets.iter().position(|(f, _)| *f == p.features) {
            Some(i) => i,
            None => {
                let cols = p.features.columns(extraction.depth)?;
                let names: Vec<&str> = cols.iter().map(String::as_str).collect();
                sets.push((p.features, features.select(&names)?));
                sets.len() - 1
            }
        };
        set_of.push(idx);
    }
    let set_matrices: Vec<FeatureMatrix> = sets.into_iter().map(|(_, m)| m).collect();

    let mut groups: Vec<Group> = Vec::new();
    for (pi, p) in config.pipelines.iter().enumerate() {
        let ks: Vec<Option<usize>> = if p.has_reducer() {
            config.components.iter().map(|&k| Some(k)).collect()
        } else {
            vec![None]
        };
        let standardize = scales_features(p);
        for k in ks {
            match groups.iter_mut().find(|g| {
                g.features_idx == set_of[pi]
                    && g.standardize == standardize
                    && g.reducer == p.reducer
                    && g.components == k
            }) {
                Some(g) => g.members.push(pi),
                None => groups.push(Group {
                    features_idx: set_of[pi],
                    standardize,
                    reducer: p.reducer.clone(),
                    components: k,
                    members: vec![pi],
                }),
            }
        }
    }

    let assign = stratified_kfold(&labels, config.folds, derive_seed(config.seed, FOLD_STREAM))?;
    let splits: Vec<(Vec<usize>, Vec<usize>)> =
        (0..config.folds).map(|f| split_fold(&assign, f)).collect();

    // global scope: one transform per group, fitted on every row
    let global: Vec<Option<Result<TransformStage, String>>> = match config.fit_scope {
        FitScope::PerFold => groups.iter().map(|_| None).collect(),
        FitScope::Global => pool(config.threads)?.install(|| {
            groups
                .par_iter()
                .map(|g| {
                    let seed = cell_seed(config.seed, &g.key(&set_matrices));
                    Some(
                        TransformStage::fit(
                            &set_matrices[g.features_idx].matrix,
                            &g.reducer,
                            g.components,
                            g.standardize,
                            seed,
                        )
                        .map_err(|e| e.to_string()),
                    )
                })
                .collect()
        }),
    };

    let jobs: Vec<(usize, usize)> = (0..groups.len())
        .flat_map(|g| (0..config.folds).map(move |f| (g, f)))
        .collect();

    let run_job = |&(gi, fold): &(usize, usize)| -> Vec<CellResult> {
        let g = &groups[gi];
        let x = &set_matrices[g.features_idx].matrix;
        let (train, test) = &splits[fold];
        let mut cells = Vec::with_capacity(g.members.len());
        let fail = |pi: usize, msg: String| CellResult {
            pipeline: config.pipelines[pi].label(),
            pipeline_index: pi,
            components: g.components,
            fold,
            report: None,
            error: Some(msg),
        };
        let data = match FoldData::new(x, &labels, train, test) {
            Ok(d) => d,
            Err(e) => {
                return g
                    .members
                    .iter()
                    .map(|&pi| fail(pi, e.to_string()))
                    .collect()
            }
        };
        let (train_x, train_y) = data.train();
        let stage_seed = cell_seed(config.seed, &format!("{}|fold{fold}", g.key(&set_matrices)));
        let stage = match &global[gi] {
            Some(Ok(s)) => Ok(s.clone()),
            Some(Err(e)) => Err(e.clone()),
            None => {
                TransformStage::fit(train_x, &g.reducer, g.components, g.standardize, stage_seed)
                    .map_err(|e| e.to_string())
            }
        };
        for &pi in &g.members {
            let p = &config.pipelines[pi];
            let stage = match &stage {
                Ok(s) => s.clone(),
                Err(e) => {
                    cells.push(fail(pi, e.clone()));
                    continue;
                }
            };
            let label = p.label();
            let clf_seed = cell_seed(
                config.seed,
                &format!("classifier|{label}|{:?}|fold{fold}", g.components),
            );
            let result = FittedPipeline::fit(
                stage,
                train_x,
                train_y,
                p.standardize_latent && p.has_reducer(),
                &p.classifier,
                clf_seed,
            )
            .and_then(|fitted| {
                fitted
                    .predict(data.test().0)
                    .map_err(|e| e.in_stage("predict"))
            })
            .and_then(|pred| {
                EvalReport::score(
                    label.clone(),
                    g.components,
                    fold,
                    config.seed,
                    data.test().1,
                    &pred,
                )
            });
            cells.push(match result {
                Ok(mut report) => {
                    report.config = serde_json::json!({
                        "pipeline": p,
                        "fit_scope": config.fit_scope,
                        "reducer_seed": stage_seed,
                        "classifier_seed": clf_seed,
                    });
                    CellResult {
                        pipeline: label,
                        pipeline_index: pi,
                        components: g.components,
                        fold,
                        report: Some(report),
                        error: None,
                    }
                }
                Err(e) => fail(pi, e.to_string()),
            });
        }
        cells
    };

    let mut cells: Vec<CellResult> =
        pool(config.threads)?.install(|| jobs.par_iter().flat_map_iter(run_job).collect());
    cells.sort_by_key(|c| (c.pipeline_index, c.components, c.fold));

    let mut class_counts: Vec<(u32, usize)> = Vec::new();
    let mut sorted = labels.clone();
    sorted.sort_unstable();
    for l in sorted {
        match class_counts.last_mut() {
            Some((c, n)) if *c == l => *n += 1,
            _ => class_counts.push((l, 1)),
        }
    }
    Ok(ExperimentOutcome {
        cells,
        provenance: RunProvenance {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            n_points: cloud.len(),
            class_counts,
            transform: cloud.transform,
            feature_columns: features.column_names.clone(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::FeatureSet;

    #[test]
    fn fnv_is_stable() {
        assert_eq!(fnv1a(""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a("a"), 0xaf63_dc4c_8601_ec8c);
    }

    #[test]
    fn fold_data_splits_rows() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        let d = FoldData::new(&x, &[1, 2, 1, 2], &[0, 3], &[1, 2]).unwrap();
        assert_eq!(d.train().0.data(), &[0.0, 3.0]);
        assert_eq!(d.train().1, &[1, 2]);
        assert_eq!(d.test().0.data(), &[1.0, 2.0]);
    }

    #[test]
    fn fold_cell_without_reducer_is_identity_stage() {
        let x = Matrix::from_rows(&[[0.0], [0.1], [5.0], [5.1], [0.05], [5.05]]).unwrap();
        let y = [1, 1, 2, 2, 1, 2];
        let d = FoldData::new(&x, &y, &[0, 1, 2, 3], &[4, 5]).unwrap();
        let p = PipelineSpec::new(
            FeatureSet::Xyz,
            ReducerSpec::None,
            ClassifierSpec::Knn { k: 1 },
        );
        let (fitted, pred) = run_fold_cell(&d, &p, None, 0).unwrap();
        assert_eq!(pred, [1, 2]);
        assert!(fitted.latent_scaler.is_none());
    }
}
