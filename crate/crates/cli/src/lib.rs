//! Scenario files, run orchestration and result files for the `uav-wpcn` binary.
pub mod app;
pub mod config;
pub mod output;
pub mod plot;
