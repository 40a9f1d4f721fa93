mod support;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::teacher::*;
use umbra_core::reliability::*;

#[test]
fn student_learns_teacher() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let t = teacher(10, 4, &mut rng);
    let data = sample(&t, 400, &mut rng);
    let out = mlp_train(&data, &TrainConfig::default()).unwrap();
    let m = &out.metrics;
    let ratio = m.test_mse.unwrap() / m.test_target_variance.unwrap();
    assert!(ratio <= 0.01, "test mse / variance = {ratio}, epochs {}", m.epochs_run);
    assert!(m.epochs_run <= 5000);
}

#[test]
fn dense_student_learns_dense_teacher() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut t = teacher(10, 3, &mut rng);
    t.form = HiddenForm::Dense;
    let data = sample(&t, 400, &mut rng);
    let cfg = TrainConfig {
        form: HiddenForm::Dense,
        ..TrainConfig::default()
    };
    let m = mlp_train(&data, &cfg).unwrap().metrics;
    assert!(m.test_mse.unwrap() <= 0.01 * m.test_target_variance.unwrap());
}

#[test]
fn single_input_teacher_dominates_sensitivity() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let t = lightning_teacher(4, &mut rng);
    let direct = sensitivity(&t, &sample(&t, 50, &mut rng).rows).unwrap();
    assert_eq!(direct.ranking()[0].0, "L");
    assert!(direct.per_input.iter().enumerate().all(|(i, s)| i == 4 || *s == 0.0));

    let data = sample(&t, 500, &mut rng);
    let out = mlp_train(&data, &TrainConfig::default()).unwrap();
    let s = sensitivity(&out.model, &data.rows).unwrap();
    let rank = s.ranking();
    assert_eq!(rank[0].0, "L", "{rank:?}");
    let l = s.per_input[4];
    assert!(s.per_input.iter().enumerate().all(|(i, v)| i == 4 || *v < l));
}

#[test]
fn gradient_check_random_draws() {
    let worst = worst_gradient_error(14, 100);
    assert!(worst < 1e-5, "{worst}");
}

#[test]
fn checkpoint_training_loss_non_increasing() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let t = teacher(10, 3, &mut rng);
    let data = sample(&t, 300, &mut rng);
    let cfg = TrainConfig {
        max_epochs: 1500,
        ..TrainConfig::default()
    };
    let m = mlp_train(&data, &cfg).unwrap().metrics;
    assert!(m.checkpoints.len() > 10);
    let worst = m
        .checkpoints
        .windows(2)
        .map(|w| w[1].train_mse - w[0].train_mse)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(worst <= 1e-3 * m.checkpoints[0].train_mse, "{worst}");
}

#[test]
fn end_to_end_is_bit_deterministic() {
    let recs = umbra_core::demo::reliability_records(200, 21);
    let cfg = TrainConfig {
        max_epochs: 200,
        ..TrainConfig::default()
    };
    let a = fit_forecaster(&recs, &cfg).unwrap();
    let b = fit_forecaster(&recs, &cfg).unwrap();
    assert_eq!(a.forecaster.to_json(), b.forecaster.to_json());
    assert_eq!(a.sensitivity, b.sensitivity);
}
