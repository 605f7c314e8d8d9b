//! Scenario-driven front end for the cross-diffusion laboratory: declarative
//! JSON configs, field snapshot files, CSV monitor series, run reports and
//! parameter sweeps.

pub mod config;
pub mod fieldio;
pub mod profiles;
pub mod report;
pub mod runner;
pub mod sweep;

pub use config::{ScenarioConfig, ScenarioKind};
pub use report::RunReport;
