//! Rank-stability experiments for error measures on hierarchical forecast
//! benchmarks.
//!
//! A [`hierarchy::HierarchicalDataset`] holds bottom-level series and every
//! aggregate, [`measures::Evaluator`] scores forecasts under a
//! [`measures::MeasureSpec`], [`ranking`] turns scores into rankings and
//! Spearman similarities, and [`experiments::Study`] runs the split-half,
//! temporal, calibration and weighting experiments. [`run`] ties them to a
//! TOML config and writes CSV/JSON reports.

pub mod config;
pub mod demo;
pub mod error;
pub mod experiments;
pub mod hierarchy;
pub mod io;
pub mod measures;
pub mod prices;
pub mod ranking;
pub mod run;
pub mod seed;
pub mod validate;
