//! Deterministic, seeded simulator for clustering in flying ad-hoc networks.
//!
//! The crate implements SEFC multi-hop clustering (mobility-energy similarity
//! filtering, stability-factor-based cluster-head election, backup heads and
//! ground-station-assisted maintenance), two one-hop comparison protocols,
//! a time-stepped engine, the four stability/efficiency metrics, and a
//! parameter-sweep harness.

pub mod baselines;
pub mod comms;
pub mod config_io;
pub mod engine;
pub mod experiment;
pub mod forest;
pub mod maintenance;
pub mod metrics;
pub mod mobility;
pub mod model;
pub mod rng;
pub mod sefc;
pub mod trace;

pub use engine::{run_simulation, RunArtifacts};
pub use forest::{ClusterForest, Role};
pub use model::{Algorithm, ConfigError, NodeId, SimConfig, UavState, Vec3};
