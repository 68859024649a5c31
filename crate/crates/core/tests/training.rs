use credit_audit_core::model::{
    fit_gbt, fit_mlp, log_loss, select_ensemble_weight, DenseLayer, FeatureMatrix, GbtConfig, MlpConfig, MlpModel,
    Predict,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_layer(rng: &mut ChaCha8Rng, inputs: usize, outputs: usize) -> DenseLayer {
    let mut draw = |n: usize| (0..n).map(|_| 0.8 * rng.sample::<f64, _>(StandardNormal)).collect();
    DenseLayer {
        inputs,
        outputs,
        weights: draw(inputs * outputs),
        bias: draw(outputs),
    }
}

fn random_data(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> (FeatureMatrix, Vec<u8>) {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    let y = (0..rows).map(|_| u8::from(rng.random::<bool>())).collect();
    (FeatureMatrix::new(rows, cols, data).unwrap(), y)
}

fn flatten(layers: &[DenseLayer]) -> Vec<f64> {
    layers
        .iter()
        .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
        .collect()
}

fn param_mut(model: &mut MlpModel, mut k: usize) -> &mut f64 {
    for l in &mut model.layers {
        if k < l.weights.len() {
            return &mut l.weights[k];
        }
        k -= l.weights.len();
        if k < l.bias.len() {
            return &mut l.bias[k];
        }
        k -= l.bias.len();
    }
    panic!("parameter index out of range");
}

#[test]
fn backprop_matches_central_differences() {
    let h = 1e-5;
    for net in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + net);
        let inputs = rng.random_range(2..6);
        let hidden: Vec<usize> = (0..rng.random_range(1..3)).map(|_| rng.random_range(2..7)).collect();
        let mut dims = vec![inputs];
        dims.extend(&hidden);
        dims.push(1);
        let layers = dims.windows(2).map(|w| random_layer(&mut rng, w[0], w[1])).collect();
        let mut model = MlpModel {
            layers,
            input_mean: (0..inputs).map(|_| rng.random::<f64>() - 0.5).collect(),
            input_scale: (0..inputs).map(|_| 0.5 + rng.random::<f64>()).collect(),
        };
        let (x, y) = random_data(&mut rng, 12, inputs);

        let (loss, grads) = model.gradient(&x, &y);
        assert!((loss - model.loss(&x, &y)).abs() < 1e-12);
        let analytic = flatten(&grads);
        let mut numeric = Vec::with_capacity(analytic.len());
        for k in 0..analytic.len() {
            let base = *param_mut(&mut model, k);
            *param_mut(&mut model, k) = base + h;
            let up = model.loss(&x, &y);
            *param_mut(&mut model, k) = base - h;
            let down = model.loss(&x, &y);
            *param_mut(&mut model, k) = base;
            numeric.push((up - down) / (2.0 * h));
        }
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
        let rel = norm(&diff) / (norm(&analytic) + norm(&numeric));
        assert!(rel <= 1e-4, "net {net}: relative error {rel}");
    }
}

#[test]
fn boosting_loss_never_increases() {
    for set in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + set);
        let cols = rng.random_range(1..6);
        let rows = rng.random_range(40..200);
        let data: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
        let x = FeatureMatrix::new(rows, cols, data).unwrap();
        let y: Vec<u8> = (0..rows)
            .map(|i| {
                let signal = x.get(i, 0) - 0.5 * x.get(i, cols - 1).powi(2);
                u8::from(signal + rng.sample::<f64, _>(StandardNormal) > 0.0)
            })
            .collect();
        let cfg = GbtConfig {
            n_trees: 30,
            max_depth: rng.random_range(1..5),
            shrinkage: 0.3,
            min_leaf: rng.random_range(1..10),
            ..GbtConfig::default()
        };
        let model = fit_gbt(&x, &y, &cfg).unwrap();
        for w in model.loss_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "dataset {set}: {} -> {}", w[0], w[1]);
        }
        let p = model.predict_rows(&x);
        assert!((log_loss(&p, &y) - model.loss_trace.last().unwrap()).abs() < 1e-9);
    }
}

#[test]
fn single_stump_separates_a_threshold() {
    let xs: Vec<f64> = (1..=10).map(f64::from).collect();
    let y: Vec<u8> = xs.iter().map(|&v| u8::from(v > 5.0)).collect();
    let x = FeatureMatrix::new(10, 1, xs).unwrap();
    let cfg = GbtConfig {
        n_trees: 1,
        max_depth: 1,
        shrinkage: 1.0,
        min_leaf: 1,
        ..GbtConfig::default()
    };
    let model = fit_gbt(&x, &y, &cfg).unwrap();
    assert_eq!(model.trees.len(), 1);
    let correct = (0..10)
        .filter(|&i| u8::from(model.predict(x.row(i)) > 0.5) == y[i])
        .count();
    assert_eq!(correct, 10);
}

#[test]
fn mlp_fit_lowers_training_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (x, _) = random_data(&mut rng, 400, 3);
    let y: Vec<u8> = (0..400).map(|i| u8::from(x.get(i, 0) + x.get(i, 1) > 0.0)).collect();
    let cfg = MlpConfig {
        hidden: vec![8],
        epochs: 40,
        batch_size: 32,
        ..MlpConfig::default()
    };
    let model = fit_mlp(&x, &y, &cfg).unwrap();
    assert!(model.loss(&x, &y) < 0.2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ensemble_weight_lies_on_the_grid(
        pg in prop::collection::vec(0.0f64..1.0, 20),
        pm in prop::collection::vec(0.0f64..1.0, 20),
        y in prop::collection::vec(0u8..2, 20),
    ) {
        prop_assume!(y.contains(&0) && y.contains(&1));
        let w = select_ensemble_weight(&pg, &pm, &y, 0.05).unwrap();
        prop_assert!((0.0..=1.0).contains(&w));
        prop_assert!(((w * 20.0) - (w * 20.0).round()).abs() < 1e-9);
    }
}

#[test]
fn temporal_cv_trains_eight_quarters_back_and_is_deterministic() {
    use credit_audit_core::model::{temporal_cv, TrainConfig};
    use credit_audit_core::panel::{generate_synthetic, GenConfig};

    let (panel, _) = generate_synthetic(
        &GenConfig {
            n_consumers: 1200,
            n_quarters: 18,
            ..GenConfig::default()
        },
        3,
    )
    .unwrap();
    let cfg = TrainConfig {
        gbt: GbtConfig {
            n_trees: 40,
            ..GbtConfig::default()
        },
        mlp: MlpConfig {
            hidden: vec![16],
            epochs: 5,
            ..MlpConfig::default()
        },
        seed: 5,
        ..TrainConfig::default()
    };
    let run = || temporal_cv(&panel, &[7, 8, 9], &cfg).unwrap();
    let a = run();
    assert_eq!(a.skipped.len(), 1);
    assert_eq!(a.skipped[0].0, 7);
    for fit in &a.fits {
        let d = &fit.diagnostics;
        assert_eq!(d.train_quarter, d.quarter - 8);
        assert_eq!(d.n_train + d.n_validation, 1200);
        assert_eq!(d.n_validation, 240);
        assert!(fit.predictions.iter().all(|p| p.quarter == d.quarter));
        assert!(fit.predictions.iter().all(|p| p.p_hat > 0.0 && p.p_hat < 1.0));
    }
    let b = run();
    for (x, y) in a.fits.iter().zip(&b.fits) {
        assert_eq!(x.predictions, y.predictions);
    }
}
