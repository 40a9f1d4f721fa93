//! Feature construction for the interruption forecaster.

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::regression::{fit_cubic, fit_two_term_exp, RegressionKind, RegressionModel};
use super::ReliabilityError;
use crate::ingest::ReliabilityRecord;

/// Raw weather parameters in feature order.
pub const WEATHER: [&str; 5] = ["T", "W", "P", "A", "L"];

/// Feature labels: the five raw parameters followed by their regression
/// outputs.
pub const FEATURE_NAMES: [&str; 10] = ["T", "W", "P", "A", "L", "N_T", "N_W", "N_P", "N_A", "N_L"];

pub const FEATURES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    #[default]
    Sustained,
    Momentary,
}

impl Target {
    pub fn value(self, r: &ReliabilityRecord) -> f64 {
        match self {
            Target::Sustained => r.n_sustained as f64,
            Target::Momentary => r.n_momentary as f64,
        }
    }
}

/// The per-parameter regressions: cubic for T, A, L and two-term
/// exponential for W, P.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherRegressions {
    pub models: [RegressionModel; 5],
}

pub fn regression_kind(parameter: usize) -> RegressionKind {
    match parameter {
        1 | 2 => RegressionKind::TwoTermExponential,
        _ => RegressionKind::Cubic,
    }
}

impl WeatherRegressions {
    /// Fits each parameter against the target over `records`; callers pass
    /// the training split so validation and test days stay unseen.
    pub fn fit(records: &[ReliabilityRecord], target: Target) -> Result<Self, ReliabilityError> {
        let rows: Vec<([f64; 5], f64)> = records
            .iter()
            .filter_map(|r| Some((r.weather()?, target.value(r))))
            .collect();
        let n: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let fitted: Vec<Result<RegressionModel, ReliabilityError>> = (0..5)
            .into_par_iter()
            .map(|k| {
                let x: Vec<f64> = rows.iter().map(|r| r.0[k]).collect();
                let label = format!("N_{}", WEATHER[k]);
                match regression_kind(k) {
                    RegressionKind::Cubic => fit_cubic(&x, &n, &label),
                    RegressionKind::TwoTermExponential => fit_two_term_exp(&x, &n, &label),
                }
            })
            .collect();
        let mut models = Vec::with_capacity(5);
        for m in fitted {
            models.push(m?);
        }
        Ok(Self {
            models: models.try_into().expect("five models"),
        })
    }

    pub fn features(&self, weather: [f64; 5]) -> [f64; FEATURES] {
        std::array::from_fn(|k| {
            if k < 5 {
                weather[k]
            } else {
                self.models[k - 5].predict(weather[k - 5])
            }
        })
    }
}

/// Feature rows with their dates and targets.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureSet {
    pub dates: Vec<NaiveDate>,
    pub rows: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    /// Records dropped for missing weather fields.
    pub skipped: Vec<NaiveDate>,
}

impl FeatureSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn range(&self, r: std::ops::Range<usize>) -> FeatureSet {
        FeatureSet {
            dates: self.dates[r.clone()].to_vec(),
            rows: self.rows[r.clone()].to_vec(),
            targets: self.targets[r].to_vec(),
            skipped: Vec::new(),
        }
    }
}

pub fn build_features(
    records: &[ReliabilityRecord],
    regressions: &WeatherRegressions,
    target: Target,
) -> Result<FeatureSet, ReliabilityError> {
    let mut set = FeatureSet::default();
    for r in records {
        let Some(w) = r.weather() else {
            log::warn!("skipping {}: missing weather field", r.date);
            set.skipped.push(r.date);
            continue;
        };
        let row = regressions.features(w);
        if row.iter().any(|v| !v.is_finite()) {
            return Err(ReliabilityError::NonFinite(format!("features for {}", r.date)));
        }
        set.dates.push(r.date);
        set.rows.push(row.to_vec());
        set.targets.push(target.value(r));
    }
    Ok(set)
}

/// Per-column z-score parameters. Constant columns get unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Normalization {
    pub fn identity(n: usize) -> Self {
        Self {
            mean: vec![0.0; n],
            sd: vec![1.0; n],
        }
    }

    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let n = rows.first().map_or(0, |r| r.len());
        let count = rows.len().max(1) as f64;
        let mean: Vec<f64> = (0..n).map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / count).collect();
        let sd = (0..n)
            .map(|k| {
                let var = rows.iter().map(|r| (r[k] - mean[k]).powi(2)).sum::<f64>() / count;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, sd }
    }

    pub fn fit_scalar(values: &[f64]) -> Self {
        let rows: Vec<Vec<f64>> = values.iter().map(|v| vec![*v]).collect();
        Self::fit(&rows)
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.sd)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }

    pub fn invert_scalar(&self, z: f64) -> f64 {
        z * self.sd[0] + self.mean[0]
    }

    pub fn apply_scalar(&self, y: f64) -> f64 {
        (y - self.mean[0]) / self.sd[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo::reliability_records;

    #[test]
    fn one_record_one_vector() {
        let recs = reliability_records(60, 1);
        let reg = WeatherRegressions::fit(&recs, Target::Sustained).unwrap();
        let set = build_features(&recs[..1], &reg, Target::Sustained).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.rows[0].len(), FEATURES);
        assert_eq!(&set.rows[0][..5], &recs[0].weather().unwrap());
        assert_eq!(set.rows[0][5], reg.models[0].predict(recs[0].temperature.unwrap()));
    }

    #[test]
    fn missing_weather_skipped() {
        let mut recs = reliability_records(40, 2);
        recs[3].wind = None;
        let reg = WeatherRegressions::fit(&recs, Target::Sustained).unwrap();
        let set = build_features(&recs, &reg, Target::Sustained).unwrap();
        assert_eq!(set.len(), 39);
        assert_eq!(set.skipped, vec![recs[3].date]);
    }

    #[test]
    fn normalized_columns_are_standard() {
        let recs = reliability_records(200, 3);
        let reg = WeatherRegressions::fit(&recs, Target::Sustained).unwrap();
        let set = build_features(&recs, &reg, Target::Sustained).unwrap();
        let norm = Normalization::fit(&set.rows);
        let z: Vec<Vec<f64>> = set.rows.iter().map(|r| norm.apply(r)).collect();
        for k in 0..FEATURES {
            let mean = z.iter().map(|r| r[k]).sum::<f64>() / z.len() as f64;
            let var = z.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / z.len() as f64;
            assert!(mean.abs() < 1e-9, "column {k} mean {mean}");
            assert!((var.sqrt() - 1.0).abs() < 1e-9, "column {k} sd {}", var.sqrt());
        }
    }
}
