//! Declarative experiment configuration (TOML) with dotted-key overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classify::{ClassifierSpec, ForestParams, DEFAULT_FOLDS};
use crate::cloud::NormalizationMode;
use crate::dimred::{ReducerSpec, TrainConfig};
use crate::features::{coefficient_names, ExtractionConfig};
use crate::io::CsvSchema;
use crate::{Error, Result};

use super::scene::SyntheticSceneSpec;

/// Point count of the default synthetic scene.
pub const DEFAULT_SCENE_POINTS: usize = 30_000;

/// Which columns of the extracted matrix a pipeline sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FeatureSet {
    /// Coordinates only.
    Xyz,
    /// Coordinates plus every coefficient.
    XyzPc,
    /// Coefficients only.
    Pc,
    /// Coordinates plus the coefficients of the first `L` tree levels.
    Levels(u32),
}

impl FeatureSet {
    /// Column names selected from a matrix extracted at `depth`.
    pub fn columns(&self, depth: u32) -> Result<Vec<String>> {
        let xyz = || vec!["x".to_string(), "y".into(), "z".into()];
        let n_all = (1usize << depth) - 1;
        Ok(match *self {
            FeatureSet::Xyz => xyz(),
            FeatureSet::XyzPc => {
                let mut c = xyz();
                c.extend(coefficient_names(n_all));
                c
            }
            FeatureSet::Pc => coefficient_names(n_all),
            FeatureSet::Levels(l) => {
                if l == 0 || l > depth {
                    return Err(Error::Config(format!(
                        "feature set levels:{l} needs 1 <= L <= extraction depth {depth}"
                    )));
                }
                let mut c = xyz();
                c.extend(coefficient_names((1 << l) - 1));
                c
            }
        })
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureSet::Xyz => f.write_str("xyz"),
            FeatureSet::XyzPc => f.write_str("xyz+pc"),
            FeatureSet::Pc => f.write_str("pc"),
            FeatureSet::Levels(l) => write!(f, "levels:{l}"),
        }
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "xyz" => Ok(FeatureSet::Xyz),
            "xyz+pc" => Ok(FeatureSet::XyzPc),
            "pc" => Ok(FeatureSet::Pc),
            other => other
                .strip_prefix("levels:")
                .and_then(|l| l.parse().ok())
                .map(FeatureSet::Levels)
                .ok_or_else(|| {
                    Error::Config(format!(
                        "unknown feature set {other:?} (expected xyz, xyz+pc, pc or levels:L)"
                    ))
                }),
        }
    }
}

impl TryFrom<String> for FeatureSet {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FeatureSet> for String {
    fn from(f: FeatureSet) -> String {
        f.to_string()
    }
}

/// Where the learned transforms (scaler, reducer) are fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitScope {
    /// On each training fold only (no leakage).
    #[default]
    PerFold,
    /// Once on the full feature matrix, as a single global transformation.
    Global,
}

/// One column of the results table: features → reducer → classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    /// Column label; derived from the other fields when omitted.
    #[serde(default)]
    pub name: Option<String>,
    pub features: FeatureSet,
    #[serde(default = "no_reducer")]
    pub reducer: ReducerSpec,
    #[serde(default)]
    pub classifier: ClassifierSpec,
    /// Standardise the selected feature columns (on the training rows)
    /// before the reducer. Ignored when there is no reducer.
    #[serde(default = "yes")]
    pub standardize_features: bool,
    /// Re-standardise the reducer output (on the training rows) before the
    /// classifier sees it. Ignored when there is no reducer.
    #[serde(default = "yes")]
    pub standardize_latent: bool,
}

fn no_reducer() -> ReducerSpec {
    ReducerSpec::None
}

fn yes() -> bool {
    true
}

impl PipelineSpec {
    pub fn new(features: FeatureSet, reducer: ReducerSpec, classifier: ClassifierSpec) -> Self {
        PipelineSpec {
            name: None,
            features,
            reducer,
            classifier,
            standardize_features: true,
            standardize_latent: true,
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn has_reducer(&self) -> bool {
        self.reducer != ReducerSpec::None
    }

    pub fn label(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        let mut reducer = self.reducer.name().to_string();
        if self.has_reducer() && !self.standardize_features {
            reducer.push_str("-raw");
        }
        if self.has_reducer() && !self.standardize_latent {
            reducer.push_str("-direct");
        }
        format!("{}/{}/{}", self.features, reducer, self.classifier.label())
    }
}

/// The reducer × classifier grid on enriched features, plus the two
/// reducer-free baselines, for KNN and for forests of 200 and 100 trees.
pub fn default_pipelines() -> Vec<PipelineSpec> {
    let classifiers = [
        ClassifierSpec::default(),
        ClassifierSpec::Rf(ForestParams::default()),
        ClassifierSpec::Rf(ForestParams {
            n_estimators: 100,
            ..ForestParams::default()
        }),
    ];
    let mut out = Vec::new();
    for clf in classifiers {
        out.push(PipelineSpec::new(
            FeatureSet::Xyz,
            ReducerSpec::None,
            clf.clone(),
        ));
        out.push(PipelineSpec::new(
            FeatureSet::XyzPc,
            ReducerSpec::None,
            clf.clone(),
        ));
        let ae = ReducerSpec::Autoencoder(TrainConfig::default());
        out.push(PipelineSpec {
            standardize_latent: false,
            ..PipelineSpec::new(FeatureSet::XyzPc, ae.clone(), clf.clone())
        });
        out.push(PipelineSpec::new(FeatureSet::XyzPc, ae, clf.clone()));
        out.push(PipelineSpec::new(
            FeatureSet::XyzPc,
            ReducerSpec::Nystroem {
                landmarks: crate::dimred::DEFAULT_LANDMARKS,
                gamma: Default::default(),
            },
            clf.clone(),
        ));
        out.push(PipelineSpec::new(FeatureSet::XyzPc, ReducerSpec::Pca, clf));
    }
    out
}

/// Point source of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "kebab-case")]
pub enum InputSpec {
    /// Generated scene. Without an explicit `scene` table the standard scene
    /// with `points` points and the experiment seed is used.
    Synthetic {
        #[serde(default = "default_points")]
        points: usize,
        #[serde(default)]
        scene: Option<SyntheticSceneSpec>,
    },
    Csv {
        path: PathBuf,
        #[serde(default = "labelled_schema")]
        schema: CsvSchema,
    },
    Las {
        path: PathBuf,
    },
}

fn default_points() -> usize {
    DEFAULT_SCENE_POINTS
}

fn labelled_schema() -> CsvSchema {
    CsvSchema::default().with_label(crate::io::LABEL_COLUMN)
}

impl Default for InputSpec {
    fn default() -> Self {
        InputSpec::Synthetic {
            points: DEFAULT_SCENE_POINTS,
            scene: None,
        }
    }
}

impl InputSpec {
    pub fn path(&self) -> Option<&Path> {
        match self {
            InputSpec::Synthetic { .. } => None,
            InputSpec::Csv { path, .. } | InputSpec::Las { path } => Some(path),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub input: InputSpec,
    pub normalization: NormalizationMode,
    pub extraction: ExtractionConfig,
    pub components: Vec<usize>,
    pub folds: usize,
    pub fit_scope: FitScope,
    /// Worker threads for extraction and the cell grid; 0 = all cores.
    pub threads: usize,
    pub output_dir: PathBuf,
    pub pipelines: Vec<PipelineSpec>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 42,
            input: InputSpec::default(),
            normalization: NormalizationMode::default(),
            extraction: ExtractionConfig::default(),
            components: (3..=10).collect(),
            folds: DEFAULT_FOLDS,
            fit_scope: FitScope::default(),
            threads: 0,
            output_dir: PathBuf::from("results"),
            pipelines: default_pipelines(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_toml_with_overrides(text, &[])
    }

    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_with_overrides(&text, overrides)
    }

    /// Parse `text`, then apply `key=value` overrides. Keys are dotted paths
    /// into the document (`extraction.radius=0.05`); values are TOML
    /// literals, falling back to a bare string (`fit_scope=global`).
    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: ExperimentConfig = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Check everything that can be checked before touching data. Path
    /// existence is checked here too, so a run fails before any work.
    pub fn validate(&self) -> Result<()> {
        self.extraction
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.folds < 2 {
            return Err(Error::Config(format!(
                "folds must be at least 2, got {}",
                self.folds
            )));
        }
        if self.pipelines.is_empty() {
            return Err(Error::Config("no pipelines configured".into()));
        }
        if self.pipelines.iter().any(|p| p.has_reducer()) && self.components.is_empty() {
            return Err(Error::Config(
                "reducer pipelines need a non-empty component list".into(),
            ));
        }
        if let Some(&k) = self.components.iter().find(|&&k| k == 0) {
            return Err(Error::Config(format!(
                "component count {k} must be positive"
            )));
        }
        let mut labels: Vec<String> = Vec::new();
        for p in &self.pipelines {
            let cols = p.features.columns(self.extraction.depth)?.len();
            if p.has_reducer() {
                if let Some(&k) = self.components.iter().find(|&&k| k > cols) {
                    return Err(Error::Config(format!(
                        "pipeline {}: {k} components exceed its {cols} feature columns",
                        p.label()
                    )));
                }
            }
            if let ReducerSpec::Nystroem { landmarks, .. } = &p.reducer {
                if let Some(&k) = self.components.iter().find(|&&k| k > *landmarks) {
                    return Err(Error::Config(format!(
                        "pipeline {}: {k} components exceed {landmarks} landmarks",
                        p.label()
                    )));
                }
            }
            let label = p.label();
            if labels.contains(&label) {
                return Err(Error::Config(format!("duplicate pipeline label {label:?}")));
            }
            labels.push(label);
        }
        if let Some(path) = self.input.path() {
            if !path.exists() {
                return Err(Error::Config(format!(
                    "input {} does not exist",
                    path.display()
                )));
            }
        }
        if let InputSpec::Synthetic { scene: Some(s), .. } = &self.input {
            s.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// The scene an unconfigured synthetic input resolves to.
    pub fn scene_spec(&self) -> Option<SyntheticSceneSpec> {
        match &self.input {
            InputSpec::Synthetic { scene: Some(s), .. } => Some(s.clone()),
            InputSpec::Synthetic {
                points,
                scene: None,
            } => Some(SyntheticSceneSpec::standard(*points, self.seed)),
            _ => None,
        }
    }
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("malformed override key {key:?}")));
    }
    let (last, parents) = parts.split_last().expect("split yields at least one part");
    let mut table = doc;
    for p in parents {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override {key:?}: {p:?} is not a table")))?;
    }
    table.insert(last.to_string(), parse_value(raw.trim()));
    Ok(())
}
