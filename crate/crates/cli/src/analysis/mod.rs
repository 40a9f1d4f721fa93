//! One module per analysis. Each reads its inputs through the scenario and
//! writes only below its own output directory.

pub mod feeder;
pub mod perf;
pub mod quality;
pub mod reliability;
