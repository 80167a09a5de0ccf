//! Experiment grid: synthetic scenes, configuration, cross-validated runs
//! and report files.

mod config;
mod report;
mod runner;
pub mod scene;

pub use config::{
    default_pipelines, ExperimentConfig, FeatureSet, FitScope, InputSpec, PipelineSpec,
    DEFAULT_SCENE_POINTS,
};
pub use report::{
    emit_report, summarize, summary_csv, summary_markdown, SummaryRow, PROVENANCE_JSON,
    REPORT_JSON, SUMMARY_CSV, SUMMARY_MD,
};
pub use runner::{
    cell_seed, load_input, run_experiment, run_fold_cell, run_on_cloud, CellResult,
    ExperimentOutcome, FittedPipeline, FoldData, RunProvenance, TransformStage,
};
pub use scene::{generate_scene, SyntheticSceneSpec};
