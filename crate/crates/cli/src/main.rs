use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use prodcoef::classify::{
    ClassifierSpec, EvalReport, FittedClassifier, ForestParams, DEFAULT_NEIGHBORS,
};
use prodcoef::cloud::{normalize_unit_cube, NormalizationMode, NormalizedCloud, PointCloud};
use prodcoef::dimred::{
    GammaRule, ReducerSpec, SavedReducer, Standardizer, TrainConfig, MODEL_FORMAT_VERSION,
};
use prodcoef::features::{extract_all, Axis, ExtractionConfig, DEFAULT_RADIUS};
use prodcoef::harness::{self, ExperimentConfig, SyntheticSceneSpec};
use prodcoef::io::{read_csv, read_las, read_table, write_table, CsvSchema, Table};
use prodcoef::measure::{coefficients_from_leaves, LeafMassVector};
use prodcoef::{FeatureMatrix, Matrix};

#[derive(Parser)]
#[command(
    name = "prodcoef",
    version,
    about = "Product-coefficient features for labelled point clouds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read LAS or CSV points and write them (optionally normalised) as CSV.
    Ingest(IngestArgs),
    /// Generate a labelled synthetic tree scene.
    Synth(SynthArgs),
    /// Compute xyz + product-coefficient features for every point.
    Features(FeaturesArgs),
    /// Fit (or apply) a scaler + reducer on a feature table.
    Reduce(ReduceArgs),
    /// Fit a classifier on a labelled feature table.
    Train(TrainArgs),
    /// Score a trained classifier on a labelled feature table.
    Eval(EvalArgs),
    /// Run a cross-validated experiment grid and write its reports.
    Experiment(ExperimentArgs),
    /// Print the coefficient tree of a leaf-mass vector or of one point.
    TreeDump(TreeDumpArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Las,
}

#[derive(Args)]
struct IngestArgs {
    input: PathBuf,
    /// Input format; guessed from the extension when omitted.
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long, default_value = "x")]
    x: String,
    #[arg(long, default_value = "y")]
    y: String,
    #[arg(long, default_value = "z")]
    z: String,
    /// CSV column holding class codes.
    #[arg(long)]
    label: Option<String>,
    /// Map the points into the unit cube.
    #[arg(long)]
    normalize: Option<NormalizationMode>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = harness::DEFAULT_SCENE_POINTS)]
    points: usize,
    #[arg(long)]
    seed: u64,
    /// TOML file with a full scene description (overrides --points).
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct FeaturesArgs {
    /// Headed CSV with x, y, z and optionally label columns.
    input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_RADIUS)]
    radius: f64,
    #[arg(long, default_value_t = 3)]
    depth: u32,
    #[arg(long, default_value = "xyz")]
    axis_order: String,
    /// Leave the normalised coordinates out of the output.
    #[arg(long)]
    no_xyz: bool,
    #[arg(long, default_value = "isotropic")]
    normalization: NormalizationMode,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Pca,
    Nystroem,
    Ae,
}

#[derive(Args)]
struct ReduceArgs {
    /// Feature table (a `label` column is passed through).
    input: PathBuf,
    /// Apply this saved model instead of fitting a new one.
    #[arg(long, conflicts_with_all = ["method", "model_out"])]
    model: Option<PathBuf>,
    #[arg(long, value_enum, required_unless_present = "model")]
    method: Option<Method>,
    #[arg(long, short = 'k', default_value_t = 3)]
    components: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated subset of feature columns to use.
    #[arg(long, value_delimiter = ',')]
    columns: Vec<String>,
    #[arg(long, default_value_t = prodcoef::dimred::DEFAULT_LANDMARKS)]
    landmarks: usize,
    /// Fixed RBF gamma for Nystroem (default 1/p).
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Feed the raw columns to the reducer instead of standardising them.
    #[arg(long, conflicts_with = "model")]
    no_scale: bool,
    #[arg(long)]
    model_out: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassifierKind {
    Knn,
    Rf,
}

#[derive(Args)]
struct TrainArgs {
    /// Feature table with a `label` column.
    input: PathBuf,
    #[arg(long, value_enum, default_value = "knn")]
    classifier: ClassifierKind,
    #[arg(long, default_value_t = DEFAULT_NEIGHBORS)]
    neighbors: usize,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',')]
    columns: Vec<String>,
    #[arg(long)]
    model_out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Feature table with a `label` column.
    input: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Write the report JSON here instead of stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML configuration; defaults apply to every key it omits.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    /// `key=value` override of a configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct TreeDumpArgs {
    /// Comma-separated non-negative leaf masses (length a power of two).
    #[arg(long, value_delimiter = ',', conflicts_with = "input")]
    leaves: Vec<f64>,
    /// Headed CSV of points; dump the tree of the point at --point.
    #[arg(long, requires = "point")]
    input: Option<PathBuf>,
    #[arg(long)]
    point: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_RADIUS)]
    radius: f64,
    #[arg(long, default_value_t = 3)]
    depth: u32,
}

#[derive(Serialize, Deserialize)]
struct SavedClassifier {
    format_version: u32,
    input_columns: Vec<String>,
    classifier: FittedClassifier,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = sink(Some(path))?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(open(path)?)
        .with_context(|| format!("reading {}", path.display()))?)
}

fn points_table(cloud: &PointCloud) -> Result<FeatureMatrix> {
    let data = cloud.points().iter().flatten().copied().collect();
    Ok(FeatureMatrix::new(
        Matrix::new(cloud.len(), 3, data)?,
        vec!["x".into(), "y".into(), "z".into()],
    )?)
}

fn read_points_table(path: &Path) -> Result<PointCloud> {
    let table = read_table(open(path)?)?;
    let xyz = table.features.select(&["x", "y", "z"])?;
    let points = xyz.matrix.iter_rows().map(|r| [r[0], r[1], r[2]]).collect();
    Ok(PointCloud::new(points, table.labels)?)
}

fn select_columns(table: Table, columns: &[String]) -> Result<Table> {
    if columns.is_empty() {
        return Ok(table);
    }
    let names: Vec<&str> = columns.iter().map(String::as_str).collect();
    Ok(Table {
        features: table.features.select(&names)?,
        labels: table.labels,
    })
}

fn ingest(a: IngestArgs) -> Result<()> {
    let format = match a.format {
        Some(f) => f,
        None => match a
            .input
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
        {
            Some(e) if e == "las" => Format::Las,
            Some(e) if e == "csv" || e == "txt" => Format::Csv,
            _ => bail!(
                "cannot guess the format of {}; pass --format",
                a.input.display()
            ),
        },
    };
    let cloud = match format {
        Format::Las => read_las(open(&a.input)?)?,
        Format::Csv => {
            let mut schema = CsvSchema {
                x: a.x.as_str().into(),
                y: a.y.as_str().into(),
                z: a.z.as_str().into(),
                ..CsvSchema::default()
            };
            if let Some(l) = &a.label {
                schema = schema.with_label(l.as_str());
            }
            read_csv(open(&a.input)?, &schema)?
        }
    };
    let cloud = match a.normalize {
        Some(mode) => {
            let n = normalize_unit_cube(&cloud, mode)?;
            eprintln!("normalised with {:?}", n.transform);
            PointCloud::new(n.points().to_vec(), n.labels().map(<[u32]>::to_vec))?
        }
        None => cloud,
    };
    eprintln!("{} points", cloud.len());
    let mut w = sink(a.output.as_deref())?;
    write_table(&mut w, &points_table(&cloud)?, cloud.labels())?;
    w.flush()?;
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let spec = match &a.scene {
        Some(p) => {
            let mut s: SyntheticSceneSpec = toml::from_str(&std::fs::read_to_string(p)?)
                .with_context(|| format!("parsing {}", p.display()))?;
            s.seed = a.seed;
            s
        }
        None => SyntheticSceneSpec::standard(a.points, a.seed),
    };
    let cloud = harness::generate_scene(&spec)?;
    let mut w = sink(a.output.as_deref())?;
    write_table(&mut w, &points_table(&cloud)?, cloud.labels())?;
    w.flush()?;
    Ok(())
}

fn features(a: FeaturesArgs) -> Result<()> {
    let config = ExtractionConfig {
        radius: a.radius,
        depth: a.depth,
        axis_order: Axis::parse_order(&a.axis_order)?,
        include_xyz: !a.no_xyz,
    };
    let cloud = read_points_table(&a.input)?;
    let normalized: NormalizedCloud = normalize_unit_cube(&cloud, a.normalization)?;
    let fm = extract_all(&normalized, &config, a.threads)?;
    let mut w = sink(a.output.as_deref())?;
    write_table(&mut w, &fm, normalized.labels())?;
    w.flush()?;
    Ok(())
}

fn reduce(a: ReduceArgs) -> Result<()> {
    let table = read_table(open(&a.input)?)?;
    let saved = match &a.model {
        Some(path) => {
            let saved: SavedReducer = read_json(path)?;
            if saved.format_version != MODEL_FORMAT_VERSION {
                bail!("model format {} is not supported", saved.format_version);
            }
            saved
        }
        None => {
            let table = select_columns(table.clone(), &a.columns)?;
            let spec = match a.method.expect("clap enforces --method") {
                Method::Pca => ReducerSpec::Pca,
                Method::Nystroem => ReducerSpec::Nystroem {
                    landmarks: a.landmarks,
                    gamma: a.gamma.map_or(GammaRule::InverseFeatures, GammaRule::Fixed),
                },
                Method::Ae => ReducerSpec::Autoencoder(TrainConfig {
                    epochs: a.epochs.unwrap_or(TrainConfig::default().epochs),
                    ..TrainConfig::default()
                }),
            };
            let (scaler, z) = if a.no_scale {
                (None, table.features.matrix.clone())
            } else {
                let (s, z) = Standardizer::fit_apply(&table.features.matrix)?;
                (Some(s), z)
            };
            let reducer = spec.fit(&z, a.components, a.seed)?;
            SavedReducer {
                format_version: MODEL_FORMAT_VERSION,
                input_columns: table.features.column_names.clone(),
                scaler,
                reducer,
                seed: a.seed,
            }
        }
    };
    let names: Vec<&str> = saved.input_columns.iter().map(String::as_str).collect();
    let x = table.features.select(&names)?;
    let z = saved.transform(&x.matrix)?;
    let cols = (0..z.cols()).map(|i| format!("z{i}")).collect();
    let out = FeatureMatrix::new(z, cols)?;
    if let Some(p) = &a.model_out {
        write_json(p, &saved)?;
    }
    let mut w = sink(a.output.as_deref())?;
    write_table(&mut w, &out, table.labels.as_deref())?;
    w.flush()?;
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let table = select_columns(read_table(open(&a.input)?)?, &a.columns)?;
    let Some(labels) = &table.labels else {
        bail!("{} has no label column", a.input.display());
    };
    let spec = match a.classifier {
        ClassifierKind::Knn => ClassifierSpec::Knn { k: a.neighbors },
        ClassifierKind::Rf => ClassifierSpec::Rf(ForestParams {
            n_estimators: a.trees.unwrap_or(ForestParams::default().n_estimators),
            ..ForestParams::default()
        }),
    };
    let classifier = spec.fit(&table.features.matrix, labels, a.seed)?;
    write_json(
        &a.model_out,
        &SavedClassifier {
            format_version: MODEL_FORMAT_VERSION,
            input_columns: table.features.column_names.clone(),
            classifier,
        },
    )
}

fn eval(a: EvalArgs) -> Result<()> {
    let saved: SavedClassifier = read_json(&a.model)?;
    let table = read_table(open(&a.input)?)?;
    let Some(labels) = &table.labels else {
        bail!("{} has no label column", a.input.display());
    };
    let names: Vec<&str> = saved.input_columns.iter().map(String::as_str).collect();
    let x = table.features.select(&names)?;
    let predicted = saved.classifier.predict(&x.matrix)?;
    let name = match &saved.classifier {
        FittedClassifier::Knn(_) => "knn",
        FittedClassifier::Rf(_) => "rf",
    };
    let report = EvalReport::score(name, None, 0, 0, labels, &predicted)?;
    eprintln!("{}", report.confusion_table());
    eprintln!(
        "f1_macro {:.4}  accuracy {:.4}",
        report.f1_macro, report.accuracy
    );
    let mut w = sink(a.output.as_deref())?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let mut overrides = a.overrides.clone();
    overrides.push(format!("seed={}", a.seed));
    if let Some(d) = &a.output_dir {
        overrides.push(format!(
            "output_dir={}",
            toml::Value::String(d.display().to_string())
        ));
    }
    if let Some(t) = a.threads {
        overrides.push(format!("threads={t}"));
    }
    let text = match &a.config {
        Some(p) => {
            std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?
        }
        None => String::new(),
    };
    let config = ExperimentConfig::from_toml_with_overrides(&text, &overrides)?;
    if a.dry_run {
        print!("{}", config.to_toml_string()?);
        return Ok(());
    }
    let outcome = harness::run_experiment(&config)?;
    let written = harness::emit_report(&outcome, &config.output_dir)?;
    for p in &written {
        eprintln!("wrote {}", p.display());
    }
    print!(
        "{}",
        harness::summary_markdown(&harness::summarize(&outcome.cells))
    );
    let failed = outcome.errors().count();
    if failed > 0 {
        for c in outcome.errors() {
            eprintln!(
                "cell {} k={:?} fold {}: {}",
                c.pipeline,
                c.components,
                c.fold,
                c.error.as_deref().unwrap_or_default()
            );
        }
        bail!("{failed} cells failed");
    }
    Ok(())
}

fn tree_dump(a: TreeDumpArgs) -> Result<()> {
    let leaves = if let Some(path) = &a.input {
        let cloud = read_points_table(path)?;
        let normalized = normalize_unit_cube(&cloud, NormalizationMode::Isotropic)?;
        let id = a.point.expect("clap enforces --point");
        if id >= normalized.len() {
            bail!(
                "point {id} out of range (cloud has {} points)",
                normalized.len()
            );
        }
        let config = ExtractionConfig {
            radius: a.radius,
            depth: a.depth,
            ..ExtractionConfig::default()
        };
        let index = prodcoef::spatial::build_index(&normalized)?;
        LeafMassVector::from_counts(&prodcoef::features::leaf_counts(&index, id, &config)?)?
    } else if !a.leaves.is_empty() {
        LeafMassVector::new(a.leaves.clone())?
    } else {
        bail!("pass --leaves or --input with --point");
    };
    let tree = coefficients_from_leaves(&leaves);
    let dump = serde_json::json!({
        "leaves": leaves.masses(),
        "tree": tree,
        "violations": tree.constraint_violations(),
    });
    println!("{}", serde_json::to_string_pretty(&dump)?);
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Ingest(a) => ingest(a),
        Command::Synth(a) => synth(a),
        Command::Features(a) => features(a),
        Command::Reduce(a) => reduce(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Experiment(a) => experiment(a),
        Command::TreeDump(a) => tree_dump(a),
    }
}
