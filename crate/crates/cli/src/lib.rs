//! Scenario layer over the clearing engine: configuration files, shock
//! sweeps, the currency-secession pipeline, and plot-data emission.

pub mod config;
pub mod grexit;
pub mod plots;
pub mod scenario;
