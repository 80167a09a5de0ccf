//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria 1–7, 9 and 10 are correctness, determinism and throughput checks
//! and make the binary exit non-zero when they fail. Criterion 8 is an
//! empirical trend reproduction on a synthetic stand-in scene; its lines are
//! reported but do not affect the exit status.

mod common;

use std::path::PathBuf;
use std::time::Instant;

use prodcoef::classify::{f1_macro, ClassifierSpec, KnnModel};
use prodcoef::cloud::NormalizedCloud;
use prodcoef::dimred::{Activation, AeModel, PcaModel, ReducerSpec, TrainConfig};
use prodcoef::features::{extract_all, point_features, point_features_recursive, ExtractionConfig};
use prodcoef::harness::{
    emit_report, run_experiment, summarize, ExperimentConfig, FeatureSet, PipelineSpec, SummaryRow,
    SUMMARY_CSV,
};
use prodcoef::measure::{
    child_masses, coefficients_from_leaves, product_coefficient, reconstruct_leaves, LeafMassVector,
};
use prodcoef::spatial::{brute_force_radius, NeighborIndex};
use prodcoef::Matrix;
use rand::Rng;

struct Outcome {
    id: &'static str,
    title: &'static str,
    pass: bool,
    gating: bool,
    detail: String,
}

fn line(o: &Outcome) {
    let status = if o.pass { "PASS" } else { "FAIL" };
    let note = if o.gating { "" } else { " (trend, non-gating)" };
    println!("{status} [{}] {}{note}: {}", o.id, o.title, o.detail);
}

fn measure_round_trip() -> Outcome {
    let start = Instant::now();
    let mut r = common::rng(1);
    let mut worst = 0.0f64;
    let mut violations = 0usize;
    for depth in 1..=8u32 {
        let n = 1usize << depth;
        for trial in 0..1000 {
            // every third vector is sparse so the ±1 constraint branches run
            let masses: Vec<f64> = (0..n)
                .map(|_| {
                    if trial % 3 == 0 && r.gen_bool(0.6) {
                        0.0
                    } else {
                        r.gen_range(0.0..100.0)
                    }
                })
                .collect();
            let leaves = LeafMassVector::new(masses.clone()).unwrap();
            let tree = coefficients_from_leaves(&leaves);
            if tree.validate_constraints().is_err() {
                violations += 1;
            }
            let back = reconstruct_leaves(&tree);
            let scale = masses.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if scale > 0.0 {
                let err = back
                    .masses()
                    .iter()
                    .zip(&masses)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
                    / scale;
                worst = worst.max(err);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        id: "1",
        title: "measure round trip, depths 1-8",
        pass: worst <= 1e-12 && violations == 0 && secs < 5.0,
        gating: true,
        detail: format!("max rel err {worst:.2e}, {violations} constraint failures, {secs:.2} s"),
    }
}

fn worked_example() -> Outcome {
    let a = product_coefficient(0.25, 0.75).unwrap();
    let (l, r) = child_masses(1.0, -0.5).unwrap();
    Outcome {
        id: "2",
        title: "scale-0 worked example",
        pass: a == -0.5 && l == 0.25 && r == 0.75,
        gating: true,
        detail: format!("a = {a}, children = ({l}, {r})"),
    }
}

fn spatial_exactness() -> Outcome {
    let start = Instant::now();
    let mut points = common::uniform_points(10_000, 2);
    let mut r = common::rng(3);
    let radii = [0.05, 0.1, 0.2];
    let mut centers: Vec<[f64; 3]> = (0..70).map(|_| [r.gen(), r.gen(), r.gen()]).collect();
    centers.extend((0..20).map(|i| points[i * 97]));
    centers.extend([
        [0.0, 0.0, 0.0],
        [1.0, 1.0, 1.0],
        [0.0, 1.0, 0.5],
        [0.5, 0.5, 0.0],
        [1.0, 0.0, 1.0],
        [0.25, 0.5, 0.75],
        [0.125, 0.375, 0.625],
        [0.5, 0.5, 0.5],
        [0.75, 0.25, 0.0],
        [1.0, 0.5, 0.5],
    ]);
    // plant points exactly one radius away along each axis
    for c in centers.iter().take(30) {
        for &rad in &radii {
            for axis in 0..3 {
                for sign in [-1.0, 1.0] {
                    let mut p = *c;
                    p[axis] += sign * rad;
                    if (0.0..=1.0).contains(&p[axis]) {
                        points.push(p);
                    }
                }
            }
        }
    }
    let mut mismatches = 0;
    let mut total = 0usize;
    for &rad in &radii {
        let index = NeighborIndex::build_for_radius(&points, rad).unwrap();
        for c in &centers {
            let got = index.radius_query(c, rad).unwrap();
            let want = brute_force_radius(&points, c, rad).unwrap();
            total += want.len();
            if got != want {
                mismatches += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        id: "3",
        title: "radius query equals brute force",
        pass: mismatches == 0 && secs < 10.0,
        gating: true,
        detail: format!(
            "{} points, {} queries, {total} neighbours, {mismatches} mismatching queries, {secs:.2} s",
            points.len(),
            centers.len() * radii.len()
        ),
    }
}

fn feature_paths() -> Outcome {
    let points = common::uniform_points(1_000, 4);
    let mut differing = 0;
    let mut checked = 0;
    for radius in [0.1, 0.25] {
        let config = ExtractionConfig {
            radius,
            ..ExtractionConfig::default()
        };
        let index = NeighborIndex::build_for_radius(&points, radius).unwrap();
        for i in 0..points.len() {
            let fast = point_features(&index, i, &config).unwrap();
            let slow = point_features_recursive(&points, i, &config).unwrap();
            let same = fast.len() == slow.len()
                && fast
                    .iter()
                    .zip(&slow)
                    .all(|(a, b)| a.to_bits() == b.to_bits());
            if !same {
                differing += 1;
            }
            checked += 1;
        }
    }
    Outcome {
        id: "4",
        title: "octant-count features equal recursive partitioning",
        pass: differing == 0,
        gating: true,
        detail: format!("{checked} point evaluations, {differing} differ bitwise"),
    }
}

fn gradient_check() -> Outcome {
    let mut r = common::rng(5);
    let mut model = AeModel::init(4, &[3, 3], 2, Activation::LeakyRelu(0.01), 6).unwrap();
    let rows: Vec<[f64; 4]> = (0..8)
        .map(|_| [0; 4].map(|_: i32| r.gen_range(-1.0..1.0)))
        .collect();
    let x = Matrix::from_rows(&rows).unwrap();
    let (_, analytic) = model.loss_and_gradient(&x).unwrap();
    let base = model.params();
    let h = 1e-5;
    let mut numeric = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + h;
        model.set_params(&p).unwrap();
        let up = model.loss(&x).unwrap();
        p[i] = base[i] - h;
        model.set_params(&p).unwrap();
        let down = model.loss(&x).unwrap();
        numeric.push((up - down) / (2.0 * h));
    }
    let err = common::max_relative_error(&analytic, &numeric, 1e-6);
    Outcome {
        id: "5",
        title: "autoencoder gradient vs central differences",
        pass: err < 1e-4,
        gating: true,
        detail: format!("{} parameters, max rel err {err:.2e}", base.len()),
    }
}

fn pca_oracle() -> Outcome {
    let mut r = common::rng(7);
    let mut worst_val = 0.0f64;
    let mut worst_vec = 0.0f64;
    let mut worst_corr = 0.0f64;
    for _ in 0..50 {
        // correlated columns with distinct spreads
        let mix: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..4).map(|_| r.gen_range(-1.0..1.0)).collect())
            .collect();
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| {
                let z: Vec<f64> = (0..4)
                    .map(|j| r.gen_range(-1.0..1.0) * (4 - j) as f64)
                    .collect();
                (0..4)
                    .map(|a| (0..4).map(|b| mix[a][b] * z[b]).sum::<f64>() + 3.0)
                    .collect()
            })
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let model = PcaModel::fit(&x, 4).unwrap();
        let (values, vectors) = common::jacobi_eigen(&common::covariance(&rows));
        for j in 0..4 {
            worst_val = worst_val.max((model.explained_variance[j] - values[j]).abs() / values[0]);
            let got = model.components.row(j);
            let plus = got
                .iter()
                .zip(&vectors[j])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let minus = got
                .iter()
                .zip(&vectors[j])
                .map(|(a, b)| (a + b).abs())
                .fold(0.0, f64::max);
            worst_vec = worst_vec.max(plus.min(minus));
        }
        let z = model.transform(&x).unwrap();
        let zr: Vec<Vec<f64>> = z.iter_rows().map(<[f64]>::to_vec).collect();
        let cz = common::covariance(&zr);
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    worst_corr = worst_corr.max(cz[a][b].abs() / values[0]);
                }
            }
        }
    }
    Outcome {
        id: "6",
        title: "PCA against Jacobi eigensolver",
        pass: worst_val < 1e-8 && worst_vec < 1e-8 && worst_corr < 1e-8,
        gating: true,
        detail: format!(
            "50 matrices 50x4: eigenvalue err {worst_val:.1e}, eigenvector err {worst_vec:.1e}, off-diagonal cov {worst_corr:.1e}"
        ),
    }
}

fn classifier_oracles() -> Outcome {
    let mut r = common::rng(8);
    let train: Vec<Vec<f64>> = (0..200)
        .map(|_| {
            (0..3)
                .map(|_| f64::from(r.gen_range(0..6u8)) * 0.5)
                .collect()
        })
        .collect();
    let labels: Vec<u32> = (0..200).map(|_| r.gen_range(1..4)).collect();
    let queries: Vec<Vec<f64>> = (0..20)
        .map(|_| {
            (0..3)
                .map(|_| f64::from(r.gen_range(0..6u8)) * 0.5)
                .collect()
        })
        .collect();
    let mut mismatches = 0;
    for k in [1, 5, 10] {
        let model = KnnModel::fit(&Matrix::from_rows(&train).unwrap(), &labels, k).unwrap();
        let got = model
            .predict(&Matrix::from_rows(&queries).unwrap())
            .unwrap();
        let want = common::knn_oracle(&train, &labels, &queries, k);
        mismatches += got.iter().zip(&want).filter(|(a, b)| a != b).count();
    }
    let f1 = f1_macro(&[vec![5, 1], vec![2, 2]]).unwrap();
    let expected = 0.5 * (10.0 / 13.0 + 4.0 / 7.0);
    let f1_err = (f1 - expected).abs();
    Outcome {
        id: "7",
        title: "KNN distance-matrix oracle and F1-macro",
        pass: mismatches == 0 && f1_err <= 1e-12,
        gating: true,
        detail: format!(
            "{mismatches} of 60 predictions differ; f1_macro {f1:.15} (err {f1_err:.1e})"
        ),
    }
}

fn trend_config(dir: PathBuf) -> ExperimentConfig {
    let knn = ClassifierSpec::default();
    let plain = |f| PipelineSpec::new(f, ReducerSpec::None, knn.clone());
    ExperimentConfig {
        seed: 42,
        output_dir: dir,
        pipelines: vec![
            plain(FeatureSet::Xyz),
            plain(FeatureSet::XyzPc),
            plain(FeatureSet::Levels(1)),
            plain(FeatureSet::Levels(2)),
            plain(FeatureSet::Levels(3)),
            PipelineSpec::new(
                FeatureSet::XyzPc,
                ReducerSpec::Autoencoder(TrainConfig::default()),
                knn.clone(),
            ),
            PipelineSpec::new(FeatureSet::XyzPc, ReducerSpec::Pca, knn),
        ],
        ..ExperimentConfig::default()
    }
}

fn mean_of(rows: &[SummaryRow], pipeline: &str, k: Option<usize>) -> f64 {
    rows.iter()
        .find(|r| r.pipeline == pipeline && r.components == k && !r.is_error())
        .map_or(f64::NAN, |r| r.mean_f1_macro)
}

fn scratch_dir(name: &str) -> PathBuf {
    let dir =
        std::env::temp_dir().join(format!("prodcoef-acceptance-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn trends_and_determinism() -> Vec<Outcome> {
    let mut runs = Vec::new();
    let mut secs = Vec::new();
    for name in ["a", "b"] {
        let config = trend_config(scratch_dir(name));
        let start = Instant::now();
        let outcome = run_experiment(&config).expect("trend grid runs");
        secs.push(start.elapsed().as_secs_f64());
        emit_report(&outcome, &config.output_dir).expect("reports written");
        let csv = std::fs::read(config.output_dir.join(SUMMARY_CSV)).unwrap();
        let _ = std::fs::remove_dir_all(&config.output_dir);
        runs.push((summarize(&outcome.cells), csv));
    }
    let rows = &runs[0].0;
    let xyz = mean_of(rows, "xyz/none/knn", None);
    let enriched = mean_of(rows, "xyz+pc/none/knn", None);
    let gain = enriched - xyz;

    let mut losing = Vec::new();
    let mut pairs = Vec::new();
    for k in 3..=10 {
        let ae = mean_of(rows, "xyz+pc/ae/knn", Some(k));
        let pca = mean_of(rows, "xyz+pc/pca/knn", Some(k));
        pairs.push(format!("k{k} {ae:.4}/{pca:.4}"));
        if !(ae >= pca) {
            losing.push(k);
        }
    }
    let levels: Vec<f64> = (1..=3)
        .map(|l| mean_of(rows, &format!("levels:{l}/none/knn"), None))
        .collect();
    let monotone = levels.windows(2).all(|w| w[1] >= w[0]);
    let errors: usize = rows.iter().map(|r| r.errors).sum();

    vec![
        Outcome {
            id: "8a",
            title: "xyz+coefficients beats xyz-only (KNN) by >= 0.05",
            pass: gain >= 0.05 && errors == 0,
            gating: false,
            detail: format!(
                "{enriched:.4} vs {xyz:.4} (gain {gain:+.4}); grid {:.0} s, {errors} failed cells",
                secs[0]
            ),
        },
        Outcome {
            id: "8b",
            title: "AE(k)->KNN >= PCA(k)->KNN for every k in 3..10",
            pass: losing.is_empty() && errors == 0,
            gating: false,
            detail: format!("ae/pca: {}; AE behind at k = {losing:?}", pairs.join(", ")),
        },
        Outcome {
            id: "8c",
            title: "level truncation L = 1..3 non-decreasing",
            pass: monotone && errors == 0,
            gating: false,
            detail: format!("{:.4} -> {:.4} -> {:.4}", levels[0], levels[1], levels[2]),
        },
        Outcome {
            id: "9",
            title: "identical seed gives byte-identical summary.csv",
            pass: runs[0].1 == runs[1].1 && !runs[0].1.is_empty(),
            gating: true,
            detail: format!(
                "{} bytes, runs took {:.0} s and {:.0} s",
                runs[0].1.len(),
                secs[0],
                secs[1]
            ),
        },
    ]
}

fn throughput() -> Outcome {
    let points = common::uniform_points(100_000, 9);
    let cloud = NormalizedCloud::from_unit_points(points, None).unwrap();
    let config = ExtractionConfig::default();
    let index = NeighborIndex::build_for_radius(cloud.points(), config.radius).unwrap();
    let sample: usize = (0..cloud.len())
        .step_by(100)
        .map(|i| {
            index
                .radius_query(&cloud.points()[i], config.radius)
                .unwrap()
                .len()
        })
        .sum();
    let avg = sample as f64 / cloud.len().div_ceil(100) as f64;
    let start = Instant::now();
    let fm = extract_all(&cloud, &config, 0).unwrap();
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        id: "10",
        title: "extract_all on 100k points at depth 3",
        pass: secs < 60.0 && avg <= 500.0 && fm.rows() == 100_000,
        gating: true,
        detail: format!(
            "{secs:.2} s on {} thread(s), mean neighbourhood {avg:.0}",
            rayon::current_num_threads()
        ),
    }
}

fn main() {
    let mut outcomes = Vec::new();
    let checks: [fn() -> Outcome; 8] = [
        measure_round_trip,
        worked_example,
        spatial_exactness,
        feature_paths,
        gradient_check,
        pca_oracle,
        classifier_oracles,
        throughput,
    ];
    for (i, check) in checks.iter().enumerate() {
        if i == 7 {
            for o in trends_and_determinism() {
                line(&o);
                outcomes.push(o);
            }
        }
        let o = check();
        line(&o);
        outcomes.push(o);
    }
    let gating_failures = outcomes.iter().filter(|o| o.gating && !o.pass).count();
    let trend_failures = outcomes.iter().filter(|o| !o.gating && !o.pass).count();
    println!(
        "acceptance: {} passed, {gating_failures} gating failures, {trend_failures} trend failures",
        outcomes.iter().filter(|o| o.pass).count()
    );
    if gating_failures > 0 {
        std::process::exit(1);
    }
}
