mod common;

use rand::Rng;

use prodcoef::dimred::{
    Activation, AeModel, FittedReducer, GammaRule, NystroemModel, PcaModel, ReducerSpec,
    SavedReducer, Standardizer, TrainConfig, MODEL_FORMAT_VERSION,
};
use prodcoef::Matrix;

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut r = common::rng(seed);
    let data = (0..rows * cols).map(|_| r.gen_range(-1.0..1.0)).collect();
    Matrix::new(rows, cols, data).unwrap()
}

fn gradient_error(activation: Activation, seed: u64) -> f64 {
    let mut model = AeModel::init(4, &[3, 3], 2, activation, seed).unwrap();
    let x = random_matrix(8, 4, seed + 100);
    let (_, analytic) = model.loss_and_gradient(&x).unwrap();
    let base = model.params();
    let h = 1e-5;
    let numeric: Vec<f64> = (0..base.len())
        .map(|i| {
            let mut p = base.clone();
            p[i] += h;
            model.set_params(&p).unwrap();
            let up = model.loss(&x).unwrap();
            p[i] = base[i] - h;
            model.set_params(&p).unwrap();
            let down = model.loss(&x).unwrap();
            (up - down) / (2.0 * h)
        })
        .collect();
    model.set_params(&base).unwrap();
    common::max_relative_error(&analytic, &numeric, 1e-6)
}

#[test]
fn autoencoder_gradient_matches_finite_differences() {
    for seed in 0..5 {
        for act in [
            Activation::LeakyRelu(0.01),
            Activation::Relu,
            Activation::Identity,
        ] {
            let err = gradient_error(act, seed);
            assert!(err < 1e-4, "{act:?} seed {seed}: {err:e}");
        }
    }
}

#[test]
fn autoencoder_loss_matches_direct_mse() {
    let model = AeModel::init(4, &[3], 2, Activation::Relu, 3).unwrap();
    let x = random_matrix(6, 4, 4);
    let rec = model.reconstruct(&x).unwrap();
    let mse = x
        .data()
        .iter()
        .zip(rec.data())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / 24.0;
    assert!((model.loss(&x).unwrap() - mse).abs() < 1e-15);
}

#[test]
fn autoencoder_training_is_seeded_and_reduces_loss() {
    let x = random_matrix(300, 6, 5);
    let cfg = TrainConfig {
        epochs: 40,
        batch_size: 32,
        learning_rate: 1e-2,
        seed: 9,
        hidden: vec![8],
        ..TrainConfig::default()
    };
    let a = AeModel::fit(&x, 3, &cfg).unwrap();
    let b = AeModel::fit(&x, 3, &cfg).unwrap();
    assert_eq!(a, b);
    let log = &a.training_log;
    assert_eq!(log.len(), 40);
    assert!(log.last().unwrap() < &(0.5 * log[0]));
    let z = a.encode(&x).unwrap();
    assert_eq!((z.rows(), z.cols()), (300, 3));
}

#[test]
fn pca_matches_jacobi_oracle() {
    let mut r = common::rng(6);
    for trial in 0..20 {
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| {
                let t: f64 = r.gen_range(-2.0..2.0);
                vec![
                    t + r.gen_range(-0.1..0.1),
                    r.gen_range(-1.0..1.0),
                    0.5 * t,
                    r.gen_range(0.0..0.3),
                ]
            })
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let model = PcaModel::fit(&x, 4).unwrap();
        let (values, vectors) = common::jacobi_eigen(&common::covariance(&rows));
        for j in 0..4 {
            assert!(
                (model.explained_variance[j] - values[j]).abs() < 1e-8 * values[0],
                "trial {trial}"
            );
            let row = model.components.row(j);
            let d = row
                .iter()
                .zip(&vectors[j])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
                .min(
                    row.iter()
                        .zip(&vectors[j])
                        .map(|(a, b)| (a + b).abs())
                        .fold(0.0, f64::max),
                );
            assert!(d < 1e-8, "trial {trial} component {j}: {d:e}");
        }
        let z = model.transform(&x).unwrap();
        let zr: Vec<Vec<f64>> = z.iter_rows().map(<[f64]>::to_vec).collect();
        let cz = common::covariance(&zr);
        for a in 0..4 {
            assert!((cz[a][a] - values[a]).abs() < 1e-8 * values[0]);
            for b in 0..4 {
                if a != b {
                    assert!(cz[a][b].abs() < 1e-8 * values[0]);
                }
            }
        }
        let back = model.inverse_transform(&z).unwrap();
        assert!(back
            .data()
            .iter()
            .zip(x.data())
            .all(|(a, b)| (a - b).abs() < 1e-10));
    }
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    (-gamma * a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>()).exp()
}

#[test]
fn nystroem_with_every_landmark_reproduces_the_kernel() {
    let x = random_matrix(40, 3, 7);
    let gamma = 0.7;
    let model = NystroemModel::fit(&x, 40, GammaRule::Fixed(gamma), 40, 1).unwrap();
    let z = model.transform(&x).unwrap();
    let mut worst = 0.0f64;
    for i in 0..40 {
        for j in 0..40 {
            let approx: f64 = z.row(i).iter().zip(z.row(j)).map(|(a, b)| a * b).sum();
            worst = worst.max((approx - rbf(x.row(i), x.row(j), gamma)).abs());
        }
    }
    assert!(worst < 1e-6, "{worst:e}");
}

#[test]
fn nystroem_respects_requested_width() {
    let x = random_matrix(100, 5, 8);
    let model = NystroemModel::fit(&x, 30, GammaRule::InverseFeatures, 4, 2).unwrap();
    assert_eq!(model.output_dim(), 4);
    assert_eq!(model.gamma, 0.2);
    assert_eq!(model.transform(&x).unwrap().cols(), 4);
    let other_seed = NystroemModel::fit(&x, 30, GammaRule::InverseFeatures, 4, 3).unwrap();
    assert_ne!(model.landmarks, other_seed.landmarks);
}

#[test]
fn standardizer_centres_and_scales() {
    let x = Matrix::from_rows(&[[1.0, 5.0], [3.0, 5.0], [5.0, 5.0]]).unwrap();
    let (s, z) = Standardizer::fit_apply(&x).unwrap();
    let sd = (8.0f64 / 3.0).sqrt();
    assert_eq!(s.mean, [3.0, 5.0]);
    assert!((z.get(0, 0) + 2.0 / sd).abs() < 1e-15);
    assert_eq!(z.column(1), [0.0, 0.0, 0.0]);
}

#[test]
fn saved_reducer_survives_json() {
    let x = random_matrix(60, 4, 9);
    let (scaler, z) = Standardizer::fit_apply(&x).unwrap();
    for spec in [
        ReducerSpec::Pca,
        ReducerSpec::Nystroem {
            landmarks: 20,
            gamma: GammaRule::Median,
        },
        ReducerSpec::Autoencoder(TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        }),
    ] {
        let saved = SavedReducer {
            format_version: MODEL_FORMAT_VERSION,
            input_columns: vec!["a".into(), "b".into(), "c".into(), "d".into()],
            scaler: Some(scaler.clone()),
            reducer: spec.fit(&z, 2, 4).unwrap(),
            seed: 4,
        };
        let back: SavedReducer =
            serde_json::from_str(&serde_json::to_string(&saved).unwrap()).unwrap();
        assert_eq!(back.transform(&x).unwrap(), saved.transform(&x).unwrap());
    }
    let identity = ReducerSpec::None.fit(&z, 2, 0).unwrap();
    assert_eq!(identity, FittedReducer::Identity { cols: 4 });
}
