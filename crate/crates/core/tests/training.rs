use proptest::prelude::*;
use rand::Rng;
use scorelabel_core::labeler::LabeledPairSet;
use scorelabel_core::mlp::{self, layer_dims};
use scorelabel_core::{rng, Activation, Matrix, MlpModel, TrainConfig};

/// Largest elementwise relative error of the analytic gradient against central differences.
fn gradient_error(model: &MlpModel, x: &Matrix, y: &Matrix, h: f64) -> f64 {
    let (_, grad) = model.mse_grad(x, y).unwrap();
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for i in 0..model.num_params() {
        let p = model.params()[i];
        probe.params_mut()[i] = p + h;
        let up = probe.mse_grad(x, y).unwrap().0;
        probe.params_mut()[i] = p - h;
        let down = probe.mse_grad(x, y).unwrap().0;
        probe.params_mut()[i] = p;
        let fd = (up - down) / (2.0 * h);
        let err = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-6);
        worst = worst.max(err);
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn tanh_gradients_match_finite_differences(seed in 0u64..1000, d in 1usize..4, h1 in 1usize..9, h2 in 0usize..6) {
        let hidden: Vec<usize> = [h1, h2].into_iter().filter(|&h| h > 0).collect();
        let model = MlpModel::init(&layer_dims(d, &hidden), Activation::Tanh, seed).unwrap();
        let x = rng::standard_normal_matrix(7, d, seed + 1);
        let y = rng::standard_normal_matrix(7, d, seed + 2);
        prop_assert!(gradient_error(&model, &x, &y, 1e-5) < 1e-5);
    }
}

#[test]
fn relu_gradients_match_finite_differences() {
    let mut r = rng::stream(3);
    for seed in 0..10 {
        let d = r.random_range(1..=4);
        let model = MlpModel::init(&layer_dims(d, &[8, 6]), Activation::Relu, seed).unwrap();
        let x = rng::standard_normal_matrix(5, d, 100 + seed);
        let y = rng::standard_normal_matrix(5, d, 200 + seed);
        let err = gradient_error(&model, &x, &y, 1e-6);
        assert!(err < 1e-4, "seed {seed}: {err}");
    }
}

#[test]
fn fits_an_affine_map() {
    let x = rng::standard_normal_matrix(256, 2, 1);
    let mut y = Matrix::zeros(256, 2);
    for (i, r) in x.iter_rows().enumerate() {
        y.set(i, 0, 2.0 * r[0] - r[1] + 0.5);
        y.set(i, 1, 0.3 * r[1] - 1.0);
    }
    let pairs = LabeledPairSet::new(x, y, None).unwrap();
    let mut model = MlpModel::init(&layer_dims(2, &[16]), Activation::Tanh, 4).unwrap();
    let cfg = TrainConfig { epochs: 3000, learning_rate: 0.01, ..Default::default() };
    let report = mlp::train(&mut model, &pairs, &cfg).unwrap();
    let last = *report.loss_history.last().unwrap();
    assert!(last < 1e-4, "final loss {last}");
    assert!(report.loss_history[0] > 100.0 * last);
}

#[test]
fn minibatch_training_is_seeded() {
    let x = rng::standard_normal_matrix(300, 2, 1);
    let y = rng::standard_normal_matrix(300, 2, 2);
    let pairs = LabeledPairSet::new(x, y, None).unwrap();
    let run = |seed| {
        let mut model = MlpModel::init(&layer_dims(2, &[10]), Activation::Relu, 0).unwrap();
        let cfg = TrainConfig { epochs: 20, minibatch: 64, seed, ..Default::default() };
        mlp::train(&mut model, &pairs, &cfg).unwrap();
        model.params().to_vec()
    };
    assert_eq!(run(1), run(1));
    assert_ne!(run(1), run(2));
}
