//! Batch driver for the gaudin-core checks: configuration, dispatch and JSON reports.

pub mod config;
pub mod report;
pub mod runner;
pub mod suites;
