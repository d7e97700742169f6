//! Command-line harness around `lens-core`: dataset generation,
//! model training, the attack/metric evaluation grid, parameter
//! sweeps and report rendering.

pub mod config;
pub mod error;
pub mod report;
pub mod run;
