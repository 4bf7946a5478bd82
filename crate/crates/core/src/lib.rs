//! Workload characterization for cluster traces.
//!
//! The pipeline reads clusterdata-style trace tables ([`ingest`]), groups
//! jobs by resource usage and arrival time ([`cluster`]), fits arrival,
//! usage and runtime distributions ([`distfit`]) and generates synthetic
//! traces in the same on-disk format ([`synth`]).

pub mod ingest;
pub mod trace_model;
pub mod cluster;
pub mod distfit;
pub mod synth;
