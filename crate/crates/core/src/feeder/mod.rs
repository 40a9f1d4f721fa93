//! Radial distribution feeder simulation with tap changers, switched
//! capacitors and PV injections.
//!
//! Phases are modelled independently (no mutual coupling). A run steps
//! through the input profiles, solving a forward-backward sweep and settling
//! the discrete devices at every timestep.

mod control;
mod model;
mod powerflow;
mod qsts;

use chrono::{DateTime, Utc};
use thiserror::Error;

pub use control::{
    control_step, ControlOutcome, DeviceAction, DeviceKind, DeviceState, Exhausted, Violation, ANSI_HIGH_PU,
    ANSI_LOW_PU, MAX_REVERSALS,
};
pub use model::{
    BusSpec, CapacitorControl, CapacitorSpec, FeederModel, FeederSpec, LineSpec, LoadSpec, Phase, PhaseSet, PvSiteSpec,
    RegulatorSpec, SourceSpec, TapKind, TapSettings, TransformerSpec,
};
pub use powerflow::{solve_powerflow, Injections, PowerFlowSolution, TapPositions, MAX_ITERATIONS, TOLERANCE_PU};
pub use qsts::{
    audit, penetration_level, run_qsts, voltage_profile, AuditReport, FeederState, ProfilePoint, Profiles, QstsRun,
};

#[derive(Debug, Error)]
pub enum FeederError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("feeder file: {0}")]
    Parse(String),
    #[error("invalid feeder: {0}")]
    Invalid(String),
    #[error("unknown bus `{0}`")]
    UnknownBus(String),
    #[error("topology: {0}")]
    Topology(String),
    #[error("bus `{0}` is not connected to the source")]
    Connectivity(String),
    #[error("power flow diverged on phase {phase} after {} iterations", trace.len())]
    Divergence { phase: Phase, trace: Vec<f64> },
    #[error("voltage collapsed at bus `{0}`")]
    Collapse(String),
    #[error("control oscillation on {device} phase {phase}")]
    ControlOscillation { device: String, phase: Phase },
    #[error("profile `{name}` missing{}", at.map(|t| format!(" at {t}")).unwrap_or_default())]
    MissingProfile { name: String, at: Option<DateTime<Utc>> },
}

pub fn load_feeder(path: impl AsRef<std::path::Path>) -> Result<FeederModel, FeederError> {
    FeederModel::load(path)
}
