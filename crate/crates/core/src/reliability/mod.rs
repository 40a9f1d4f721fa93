//! Weather-driven interruption forecasting: per-parameter regressions that
//! feed a small perceptron, plus gradient checks and input sensitivities.

mod features;
mod mlp;
mod regression;
mod train;

use thiserror::Error;

pub use features::{
    build_features, regression_kind, FeatureSet, Normalization, Target, WeatherRegressions, FEATURES, FEATURE_NAMES,
    WEATHER,
};
pub use mlp::{
    gradient_check, input_sensitivity, Activation, HiddenForm, Init, MlpModel, GRADIENT_CHECK_FLOOR,
    GRADIENT_CHECK_STEP,
};
pub use regression::{fit_cubic, fit_two_term_exp, RegressionKind, RegressionModel, EXP_START_GRID};
pub use train::{
    fit_forecaster, mlp_train, mse, sensitivity, Checkpoint, Dataset, ForecastRun, Forecaster, Sensitivity,
    TrainConfig, TrainMetrics, TrainOutcome, MIN_RECORDS,
};

#[derive(Debug, Error)]
pub enum ReliabilityError {
    #[error("expected {expected} values, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("non-finite {0}")]
    NonFinite(String),
    #[error("singular fit: {0}")]
    SingularFit(String),
    #[error("exponential fit failed")]
    FitFailure { best: Option<Box<RegressionModel>> },
    #[error("need at least {needed} records, found {found}")]
    TooFewRecords { needed: usize, found: usize },
    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}
