//! Teacher networks with known structure for training and sensitivity checks.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use umbra_core::reliability::*;

pub fn teacher(inputs: usize, hidden: usize, rng: &mut ChaCha8Rng) -> MlpModel {
    let mut t = MlpModel::init(
        inputs,
        hidden,
        HiddenForm::PerInput,
        Activation::Tanh,
        Activation::Identity,
        Init::Uniform,
        rng,
    );
    t.b_hidden.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
    t.v.iter_mut().for_each(|v| *v *= 4.0);
    t.output_norm = Normalization {
        mean: vec![12.0],
        sd: vec![3.0],
    };
    t
}

pub fn sample(model: &MlpModel, n: usize, rng: &mut ChaCha8Rng) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..model.inputs).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let targets = rows.iter().map(|r| model.forward(r).unwrap()).collect();
    Dataset { rows, targets }
}

/// Ten-input teacher whose output depends on lightning (index 4) alone.
pub fn lightning_teacher(hidden: usize, rng: &mut ChaCha8Rng) -> MlpModel {
    let mut t = teacher(10, hidden, rng);
    for j in 0..t.hidden {
        for i in 0..10 {
            if i != 4 {
                t.w[j * 10 + i] = 0.0;
            }
        }
    }
    // with per-input units a zero weight still contributes G(b_j); drop it
    t.b_hidden.iter_mut().for_each(|b| *b = 0.0);
    t
}

/// Worst relative error of the analytic gradient over `draws` random
/// networks, forms and activations.
pub fn worst_gradient_error(seed: u64, draws: usize) -> f64 {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for draw in 0..draws {
        let form = if draw % 2 == 0 {
            HiddenForm::PerInput
        } else {
            HiddenForm::Dense
        };
        let g = if draw % 3 == 0 {
            Activation::Sigmoid
        } else {
            Activation::Tanh
        };
        let m = teacher(10, 1 + draw % 6, &mut rng);
        let m = MlpModel {
            form,
            hidden_activation: g,
            ..m
        };
        let x: Vec<f64> = (0..10).map(|_| rng.random_range(-2.0..2.0)).collect();
        worst = worst.max(gradient_check(&m, &x, rng.random_range(-1.0..1.0)).unwrap());
    }
    worst
}
