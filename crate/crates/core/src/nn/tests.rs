use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::features::{Dataset, Normalizer, Provenance};

fn random_rows(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

fn dataset(rows: Vec<Vec<f64>>, target: impl Fn(&[f64]) -> f64) -> Dataset {
    let mut ds = Dataset::default();
    for (i, r) in rows.into_iter().enumerate() {
        let t = target(&r);
        ds.push(r, t, Provenance { config_id: "syn".into(), iter: 0, elem: i });
    }
    ds
}

/// Straight-line evaluation written independently of `Mlp::pass`.
fn reference_forward(dims: &[usize], p: &[f64], x: &[f64]) -> f64 {
    let mut a = x.to_vec();
    let mut off = 0;
    for l in 0..dims.len() - 1 {
        let (ni, no) = (dims[l], dims[l + 1]);
        let w = &p[off..off + ni * no];
        let b = &p[off + ni * no..off + ni * no + no];
        let mut z = b.to_vec();
        for o in 0..no {
            for i in 0..ni {
                z[o] += w[o * ni + i] * a[i];
            }
        }
        if l + 2 < dims.len() {
            z.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        a = z;
        off += ni * no + no;
    }
    a[0]
}

#[test]
fn zero_network_outputs_zero() {
    let m = Mlp::zeros(&[124, 16, 16, 1]).unwrap();
    for x in random_rows(5, 124, 1) {
        assert_eq!(m.forward(&x), 0.0);
    }
}

#[test]
fn hand_built_relu_unit() {
    // one hidden unit computing ReLU(x0), output = that unit
    let m = Mlp::from_params(&[2, 1, 1], vec![1.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
    assert_eq!(m.forward(&[3.0, 7.0]), 3.0);
    assert_eq!(m.forward(&[-2.0, 7.0]), 0.0);
}

#[test]
fn forward_matches_reference_evaluator() {
    let dims = [124, 16, 16, 1];
    let m = Mlp::he_init(&dims, 9).unwrap();
    for x in random_rows(20, 124, 2) {
        assert!((m.forward(&x) - reference_forward(&dims, m.params(), &x)).abs() < 1e-12);
    }
}

#[test]
fn invalid_dimensions_rejected() {
    assert!(Mlp::zeros(&[3]).is_err());
    assert!(Mlp::zeros(&[3, 0, 1]).is_err());
    assert!(Mlp::zeros(&[3, 4, 2]).is_err());
    assert!(Mlp::from_params(&[2, 1], vec![0.0; 2]).is_err());
    assert!(Mlp::from_params(&[2, 1], vec![0.0, f64::NAN, 0.0]).is_err());
}

#[test]
fn scaling_last_layer_scales_output() {
    let dims = [124, 16, 16, 1];
    let m = Mlp::he_init(&dims, 3).unwrap();
    let mut scaled = m.clone();
    let n = scaled.params().len();
    for p in &mut scaled.params_mut()[n - 17..] {
        *p *= 2.5;
    }
    for x in random_rows(5, 124, 4) {
        assert!((scaled.forward(&x) - 2.5 * m.forward(&x)).abs() < 1e-12 * m.forward(&x).abs().max(1.0));
    }
}

#[test]
fn gradient_check_shortlisted_architectures() {
    let xs = random_rows(8, 124, 5);
    let ys: Vec<f64> = (0..8).map(|i| i as f64 * 0.3 - 1.0).collect();
    for dims in [vec![124, 16, 16, 1], vec![124, 64, 64, 64, 1], vec![124, 256, 256, 256, 256, 1]] {
        let m = Mlp::he_init(&dims, 11).unwrap();
        let err = gradient_check(&m, &xs, &ys, 100, 1);
        assert!(err < 1e-5, "{dims:?}: {err}");
    }
}

#[test]
fn gradient_check_zero_model_is_zero() {
    let m = Mlp::zeros(&[124, 16, 16, 1]).unwrap();
    let xs = random_rows(4, 124, 6);
    let (loss, grad) = m.loss_and_grad(&xs, &[0.0; 4]);
    assert_eq!(loss, 0.0);
    assert!(grad.iter().all(|&g| g == 0.0));
    assert_eq!(gradient_check(&m, &xs, &[0.0; 4], 100, 2), 0.0);
}

#[test]
fn gradient_check_after_training_steps() {
    let rows = random_rows(64, 124, 7);
    let ds = dataset(rows, |x| (x.iter().sum::<f64>() / 124.0).exp());
    let cfg = TrainConfig { max_epochs: 10, batch_size: 16, ..Default::default() };
    let (model, _) = train(&ds, &ds.subset(&[0, 1, 2]), &cfg).unwrap();
    let xs: Vec<Vec<f64>> = ds.features[..8].iter().map(|x| model.normalizer.normalize(x)).collect();
    let ys: Vec<f64> = ds.targets[..8].iter().map(|t| t.ln()).collect();
    assert!(gradient_check(&model.mlp, &xs, &ys, 100, 3) < 1e-5);
}

#[test]
fn learns_mean_of_inputs() {
    let ds = dataset(random_rows(1200, 124, 8), |x| x.iter().sum::<f64>() / 124.0);
    let splits = ds.split(0.8, 0.0, 1).unwrap();
    let cfg = TrainConfig { max_epochs: 500, target: TargetTransform::Raw, ..Default::default() };
    let (model, log) = train(&splits.train, &splits.validation, &cfg).unwrap();
    assert!(model.meta.train_rmse < 1e-2, "train rmse {}", model.meta.train_rmse);
    assert!(log.len() <= 500);
}

#[test]
fn constant_target_gives_constant_predictor() {
    let ds = dataset(random_rows(300, 124, 9), |_| 0.25);
    let cfg = TrainConfig { max_epochs: 400, batch_size: 64, ..Default::default() };
    let (model, _) = train(&ds, &ds.subset(&(0..50).collect::<Vec<_>>()), &cfg).unwrap();
    assert!(model.meta.val_rmse < 1e-2, "{}", model.meta.val_rmse);
    let p = model.predict_dt(&ds.features[17]).unwrap();
    assert!((p - 0.25).abs() < 0.01, "{p}");
}

#[test]
fn best_validation_is_monotone_and_restored() {
    let ds = dataset(random_rows(200, 124, 10), |x| (x[0] + x[1]).exp());
    let split = ds.split(0.7, 0.0, 2).unwrap();
    let cfg = TrainConfig { max_epochs: 60, patience: 5, batch_size: 32, ..Default::default() };
    let (model, log) = train(&split.train, &split.validation, &cfg).unwrap();
    let mut best = f64::INFINITY;
    let mut best_seq = Vec::new();
    for l in &log {
        best = best.min(l.val_rmse);
        best_seq.push(best);
    }
    assert!(best_seq.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(model.meta.val_rmse, best);
}

#[test]
fn training_is_reproducible() {
    let ds = dataset(random_rows(150, 124, 11), |x| x[3].exp());
    let cfg = TrainConfig { max_epochs: 15, batch_size: 32, seed: 42, ..Default::default() };
    let (a, la) = train(&ds, &ds.subset(&[1, 2, 3, 4]), &cfg).unwrap();
    let (b, lb) = train(&ds, &ds.subset(&[1, 2, 3, 4]), &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(la, lb);
}

#[test]
fn training_input_errors() {
    let ds = dataset(random_rows(10, 4, 12), |_| 1.0);
    let cfg = TrainConfig::default();
    assert!(matches!(train(&Dataset::default(), &ds, &cfg), Err(crate::Error::EmptyDataset(_))));
    assert!(matches!(train(&ds, &Dataset::default(), &cfg), Err(crate::Error::EmptyDataset(_))));
    assert!(train(&ds, &ds, &TrainConfig { lr: 0.0, ..Default::default() }).is_err());
    assert!(train(&ds, &ds, &TrainConfig { patience: 0, ..Default::default() }).is_err());
    let neg = dataset(random_rows(10, 4, 12), |_| -1.0);
    assert!(train(&neg, &neg, &cfg).is_err());
}

#[test]
fn save_load_round_trip() {
    let mlp = Mlp::he_init(&[124, 16, 16, 1], 5).unwrap();
    let rows = random_rows(30, 124, 13);
    let mut model = Model::new(mlp, Normalizer::fit(&rows).unwrap(), TargetTransform::Log).unwrap();
    model.meta = TrainMeta { seed: 5, epochs: 12, train_rmse: 0.1, val_rmse: 0.2 };
    let mut buf = Vec::new();
    model.save(&mut buf).unwrap();
    let back = Model::load(buf.as_slice()).unwrap();
    assert_eq!(back, model);
    for x in &rows {
        assert_eq!(back.predict_dt(x).unwrap().to_bits(), model.predict_dt(x).unwrap().to_bits());
    }
}

#[test]
fn corrupted_model_files_rejected() {
    let model = Model::new(Mlp::he_init(&[4, 3, 1], 1).unwrap(), Normalizer::identity(4), TargetTransform::Raw).unwrap();
    let mut buf = Vec::new();
    model.save(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();

    let bad_header = text.replacen("ptcflow-model 1", "ptcflow-model 9", 1);
    assert!(matches!(Model::load(bad_header.as_bytes()), Err(crate::Error::Format(_))));

    // perturb one parameter: the check vector no longer reproduces
    let lines: Vec<String> = text
        .lines()
        .map(|l| match l.strip_prefix("params ") {
            Some(rest) => {
                let mut v: Vec<f64> = rest.split(' ').map(|t| t.parse().unwrap()).collect();
                v[0] += 0.5;
                format!("params {}", v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" "))
            }
            None => l.to_string(),
        })
        .collect();
    assert!(matches!(Model::load(lines.join("\n").as_bytes()), Err(crate::Error::Format(_))));

    let truncated: String = text.lines().take(4).collect::<Vec<_>>().join("\n");
    assert!(Model::load(truncated.as_bytes()).is_err());
}

#[test]
fn predict_rejects_bad_input() {
    let model = Model::new(Mlp::zeros(&[4, 2, 1]).unwrap(), Normalizer::identity(4), TargetTransform::Log).unwrap();
    assert!(model.predict_dt(&[0.0; 3]).is_err());
    assert!(model.predict_dt(&[0.0, f64::NAN, 0.0, 0.0]).is_err());
    assert_eq!(model.predict_dt(&[1.0; 4]).unwrap(), 1.0);
    assert!(Model::new(Mlp::zeros(&[4, 2, 1]).unwrap(), Normalizer::identity(5), TargetTransform::Log).is_err());
}

#[test]
fn folds_partition_the_data() {
    let folds = fold_indices(23, 6, 4).unwrap();
    assert_eq!(folds.len(), 6);
    let mut all: Vec<usize> = folds.concat();
    all.sort_unstable();
    assert_eq!(all, (0..23).collect::<Vec<_>>());
    assert!(folds.iter().all(|f| f.len() == 3 || f.len() == 4));
    assert!(fold_indices(3, 6, 0).is_err());
}

#[test]
fn degenerate_grid_returns_its_architecture() {
    let ds = dataset(random_rows(60, 124, 14), |x| x[0].exp());
    let base = TrainConfig { max_epochs: 5, batch_size: 16, ..Default::default() };
    let table = grid_search(&ds, &[2], &[16], 3, &base).unwrap();
    assert_eq!(table.len(), 1);
    assert_eq!(table[0].hidden, vec![16, 16]);
    assert_eq!(table[0].fold_rmse.len(), 3);
}

#[test]
fn grid_search_ranking_is_reproducible() {
    let ds = dataset(random_rows(60, 124, 15), |x| x[0].exp());
    let base = TrainConfig { max_epochs: 5, batch_size: 16, seed: 3, ..Default::default() };
    let a = grid_search(&ds, &[1, 2], &[4, 8], 3, &base).unwrap();
    let b = grid_search(&ds, &[1, 2], &[4, 8], 3, &base).unwrap();
    assert_eq!(a, b);
    assert!(a.windows(2).all(|w| w[0].mean_val_rmse <= w[1].mean_val_rmse));
}
