//! Discrete-event simulator for cloud-native space clusters (CNSCs).
//!
//! Models a multi-shell satellite constellation as a schedulable resource
//! pool: contact-plan generation from circular two-body orbits, cluster
//! membership and capability registration, two pluggable resource-awareness
//! planes (adaptive multi-domain relay vs. uniform direct-to-ground
//! heartbeats), DAG-stage task scheduling against per-node resource
//! timelines, and the metrics that compare the two awareness planes.
//!
//! Everything is deterministic: identical configuration (including the seed)
//! produces byte-identical traces and CSV exports.

pub mod awareness;
pub mod cluster;
pub mod config;
pub mod engine;
pub mod geom;
pub mod metrics;
pub mod orbital;
pub mod scheduler;
pub mod task;

pub use config::{ScenarioConfig, SweepSpec};
pub use engine::{run, Trace};
pub use metrics::MetricsReport;
