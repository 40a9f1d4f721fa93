//! Training loop and the end-to-end interruption forecaster.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{build_features, FeatureSet, Normalization, Target, WeatherRegressions, FEATURES, WEATHER};
use super::mlp::{input_sensitivity, Activation, HiddenForm, Init, MlpModel};
use super::ReliabilityError;
use crate::ingest::ReliabilityRecord;

pub const MIN_RECORDS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Train / validation / test percentages, chronological.
    pub split: [u32; 3],
    pub hidden: usize,
    pub form: HiddenForm,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    pub init: Init,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub target: Target,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            split: [70, 15, 15],
            hidden: 20,
            form: HiddenForm::PerInput,
            hidden_activation: Activation::Tanh,
            output_activation: Activation::Identity,
            init: Init::XavierUniform,
            learning_rate: 0.01,
            max_epochs: 5000,
            patience: 500,
            seed: 42,
            target: Target::Sustained,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ReliabilityError> {
        let bad = |m: &str| Err(ReliabilityError::Config(m.to_string()));
        if self.split.iter().sum::<u32>() != 100 {
            return bad("split must sum to 100");
        }
        if self.split[0] == 0 {
            return bad("training split must be non-empty");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.hidden == 0 {
            return bad("hidden must be at least 1");
        }
        Ok(())
    }

    /// Chronological boundaries `(train_end, validation_end)` for `n` rows.
    pub fn split_points(&self, n: usize) -> (usize, usize) {
        let train = n * self.split[0] as usize / 100;
        let val = n * self.split[1] as usize / 100;
        (train, train + val)
    }
}

/// Inputs and targets on the raw scale.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub rows: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl From<&FeatureSet> for Dataset {
    fn from(f: &FeatureSet) -> Self {
        Self {
            rows: f.rows.clone(),
            targets: f.targets.clone(),
        }
    }
}

impl Dataset {
    fn slice(&self, r: std::ops::Range<usize>) -> Dataset {
        Dataset {
            rows: self.rows[r.clone()].to_vec(),
            targets: self.targets[r].to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub epoch: usize,
    /// Normalized-scale MSE.
    pub train_mse: f64,
    pub val_mse: f64,
}

/// Metrics of the returned (best-validation) model. MSE values are on the
/// target scale unless marked normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub train_mse: f64,
    pub val_mse: Option<f64>,
    pub test_mse: Option<f64>,
    pub test_target_variance: Option<f64>,
    pub sizes: [usize; 3],
    /// Validation improvements in order.
    pub checkpoints: Vec<Checkpoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub metrics: TrainMetrics,
    /// Held-out rows, raw scale.
    pub test: Dataset,
}

fn batch_loss(model: &MlpModel, x: &[Vec<f64>], t: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let scale = 1.0 / x.len().max(1) as f64;
    let mut total = 0.0;
    match grad {
        Some(g) => {
            g.iter_mut().for_each(|v| *v = 0.0);
            for (xi, ti) in x.iter().zip(t) {
                total += model.accumulate_gradient(xi, *ti, scale, g);
            }
        }
        None => {
            for (xi, ti) in x.iter().zip(t) {
                let y = model.forward_normalized(xi).expect("checked dimensions");
                total += (y - ti).powi(2);
            }
        }
    }
    total * scale
}

/// Target-scale MSE of the unclamped predictions.
pub fn mse(model: &MlpModel, data: &Dataset) -> Result<f64, ReliabilityError> {
    let mut s = 0.0;
    for (x, t) in data.rows.iter().zip(&data.targets) {
        s += (model.forward(x)? - t).powi(2);
    }
    Ok(s / data.rows.len().max(1) as f64)
}

fn variance(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len().max(1) as f64;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len().max(1) as f64
}

/// Full-batch Adam on normalized MSE with early stopping on the
/// validation split. Input and output normalization come from the
/// training split only.
pub fn mlp_train(data: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome, ReliabilityError> {
    cfg.validate()?;
    let n = data.rows.len();
    if n < MIN_RECORDS {
        return Err(ReliabilityError::TooFewRecords {
            needed: MIN_RECORDS,
            found: n,
        });
    }
    let inputs = data.rows[0].len();
    if let Some(r) = data.rows.iter().find(|r| r.len() != inputs) {
        return Err(ReliabilityError::Dimension {
            expected: inputs,
            found: r.len(),
        });
    }
    let (a, b) = cfg.split_points(n);
    let (train, val, test) = (data.slice(0..a), data.slice(a..b), data.slice(b..n));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = MlpModel::init(
        inputs,
        cfg.hidden,
        cfg.form,
        cfg.hidden_activation,
        cfg.output_activation,
        cfg.init,
        &mut rng,
    );
    model.input_norm = Normalization::fit(&train.rows);
    model.output_norm = Normalization::fit_scalar(&train.targets);
    let norm_x = |d: &Dataset| -> Vec<Vec<f64>> { d.rows.iter().map(|r| model.input_norm.apply(r)).collect() };
    let (tx, vx) = (norm_x(&train), norm_x(&val));
    let tt: Vec<f64> = train
        .targets
        .iter()
        .map(|t| model.output_norm.apply_scalar(*t))
        .collect();
    let vt: Vec<f64> = val.targets.iter().map(|t| model.output_norm.apply_scalar(*t)).collect();

    let mut params = model.params();
    let mut grad = vec![0.0; params.len()];
    let (mut m1, mut m2) = (vec![0.0; params.len()], vec![0.0; params.len()]);
    let (beta1, beta2, eps) = (0.9, 0.999, 1e-8);
    let mut best = (params.clone(), f64::INFINITY);
    let mut best_epoch = 0;
    let mut checkpoints = Vec::new();
    let mut epochs_run = 0;

    for epoch in 0..=cfg.max_epochs {
        model.set_params(&params);
        let train_loss = batch_loss(&model, &tx, &tt, Some(&mut grad));
        if !train_loss.is_finite() {
            return Err(ReliabilityError::Divergence { epoch });
        }
        // without a validation split the training loss drives selection
        let val_loss = if vx.is_empty() {
            train_loss
        } else {
            batch_loss(&model, &vx, &vt, None)
        };
        if val_loss < best.1 {
            best = (params.clone(), val_loss);
            best_epoch = epoch;
            checkpoints.push(Checkpoint {
                epoch,
                train_mse: train_loss,
                val_mse: val_loss,
            });
        }
        if epoch == cfg.max_epochs || epoch - best_epoch > cfg.patience {
            break;
        }
        let t = (epoch + 1) as i32;
        for k in 0..params.len() {
            m1[k] = beta1 * m1[k] + (1.0 - beta1) * grad[k];
            m2[k] = beta2 * m2[k] + (1.0 - beta2) * grad[k] * grad[k];
            let mh = m1[k] / (1.0 - beta1.powi(t));
            let vh = m2[k] / (1.0 - beta2.powi(t));
            params[k] -= cfg.learning_rate * mh / (vh.sqrt() + eps);
        }
        epochs_run = epoch + 1;
    }

    model.set_params(&best.0);
    let nonempty = |d: &Dataset| -> Result<Option<f64>, ReliabilityError> {
        if d.rows.is_empty() {
            Ok(None)
        } else {
            mse(&model, d).map(Some)
        }
    };
    let metrics = TrainMetrics {
        epochs_run,
        best_epoch,
        train_mse: mse(&model, &train)?,
        val_mse: nonempty(&val)?,
        test_mse: nonempty(&test)?,
        test_target_variance: (!test.targets.is_empty()).then(|| variance(&test.targets)),
        sizes: [train.rows.len(), val.rows.len(), test.rows.len()],
        checkpoints,
    };
    Ok(TrainOutcome { model, metrics, test })
}

/// Input sensitivities, plus a per-weather-parameter score summing the raw
/// feature and its regression feature when the model has the standard ten
/// inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sensitivity {
    pub per_input: Vec<f64>,
    pub per_parameter: Vec<(String, f64)>,
}

impl Sensitivity {
    /// Parameters (or inputs) sorted by decreasing score.
    pub fn ranking(&self) -> Vec<(String, f64)> {
        let mut r = if self.per_parameter.is_empty() {
            self.per_input
                .iter()
                .enumerate()
                .map(|(i, s)| (format!("x{i}"), *s))
                .collect()
        } else {
            self.per_parameter.clone()
        };
        r.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        r
    }
}

pub fn sensitivity(model: &MlpModel, rows: &[Vec<f64>]) -> Result<Sensitivity, ReliabilityError> {
    let per_input = input_sensitivity(model, rows)?;
    let per_parameter = if model.inputs == FEATURES {
        WEATHER
            .iter()
            .enumerate()
            .map(|(k, name)| (name.to_string(), per_input[k] + per_input[k + 5]))
            .collect()
    } else {
        Vec::new()
    };
    Ok(Sensitivity {
        per_input,
        per_parameter,
    })
}

/// Regressions, network and configuration persisted together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecaster {
    pub config: TrainConfig,
    pub regressions: WeatherRegressions,
    pub mlp: MlpModel,
}

impl Forecaster {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("forecaster serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ReliabilityError> {
        let f: Forecaster = serde_json::from_str(s).map_err(|e| ReliabilityError::Config(e.to_string()))?;
        if f.mlp.w.len() != f.mlp.inputs * f.mlp.hidden
            || f.mlp.v.len() != f.mlp.hidden
            || f.mlp.b_hidden.len() != f.mlp.hidden
            || !f.mlp.is_finite()
        {
            return Err(ReliabilityError::Config("inconsistent network dimensions".into()));
        }
        Ok(f)
    }

    pub fn predict(&self, record: &ReliabilityRecord) -> Result<Option<f64>, ReliabilityError> {
        match record.weather() {
            Some(w) => self.mlp.predict_count(&self.regressions.features(w)).map(Some),
            None => Ok(None),
        }
    }
}

/// Everything produced by [`fit_forecaster`].
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRun {
    pub forecaster: Forecaster,
    pub features: FeatureSet,
    pub metrics: TrainMetrics,
    pub sensitivity: Sensitivity,
    /// `(target, predicted)` for the held-out test days.
    pub test_pairs: Vec<(chrono::NaiveDate, f64, f64)>,
}

/// Chronological split, regressions on the training days, feature
/// construction, training and sensitivity over the training rows.
pub fn fit_forecaster(records: &[ReliabilityRecord], cfg: &TrainConfig) -> Result<ForecastRun, ReliabilityError> {
    cfg.validate()?;
    let complete: Vec<ReliabilityRecord> = records.iter().filter(|r| r.weather().is_some()).cloned().collect();
    if complete.len() < MIN_RECORDS {
        return Err(ReliabilityError::TooFewRecords {
            needed: MIN_RECORDS,
            found: complete.len(),
        });
    }
    let (train_end, _) = cfg.split_points(complete.len());
    let regressions = WeatherRegressions::fit(&complete[..train_end], cfg.target)?;
    let mut features = build_features(records, &regressions, cfg.target)?;
    features.skipped = records
        .iter()
        .filter(|r| r.weather().is_none())
        .map(|r| r.date)
        .collect();
    let outcome = mlp_train(&Dataset::from(&features), cfg)?;
    let sensitivity = sensitivity(&outcome.model, &features.rows[..train_end])?;
    let (_, test_start) = cfg.split_points(features.len());
    let mut test_pairs = Vec::new();
    for i in test_start..features.len() {
        test_pairs.push((
            features.dates[i],
            features.targets[i],
            outcome.model.predict_count(&features.rows[i])?,
        ));
    }
    Ok(ForecastRun {
        forecaster: Forecaster {
            config: cfg.clone(),
            regressions,
            mlp: outcome.model,
        },
        features,
        metrics: outcome.metrics,
        sensitivity,
        test_pairs,
    })
}
