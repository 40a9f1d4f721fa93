//! Eclipse-impact analytics for distributed PV and the distribution grid.
//!
//! The crate is split along the four analyses it supports, plus the shared
//! time-series plumbing they consume:
//!
//! - [`ingest`]: CSV parsing onto uniform time grids, alignment, correlation.
//! - [`perf`]: PV power/energy estimation, performance ratio, PPI, drop summaries.
//! - [`quality`]: point-of-interconnection THD, TDD, flicker and compliance checks.
//! - [`feeder`]: quasi-static time-series simulation of a radial feeder with
//!   regulators, tap changers and switched capacitors.
//! - [`reliability`]: weather regressions and an MLP interruption forecaster.
//! - [`demo`]: deterministic synthetic inputs used by the bundled scenario.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod demo;
pub mod feeder;
pub mod ingest;
pub mod perf;
pub mod quality;
pub mod reliability;

pub use ingest::{AlignedSeries, Unit};
