//! The four summary metrics computed from a run's logs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::comms::DeliveryOutcome;
use crate::forest::Role;
use crate::model::NodeId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveryRecord {
    pub tick: u64,
    pub t: f64,
    pub src: NodeId,
    pub dst: NodeId,
    pub outcome: DeliveryOutcome,
}

/// A contiguous stretch of one role held by one node. `t_end` is `None` while
/// the role is still held at the end of the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoleInterval {
    pub node: NodeId,
    pub role: Role,
    pub t_start: f64,
    pub t_end: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MembershipChange {
    pub node: NodeId,
    pub old_cluster: NodeId,
    pub new_cluster: NodeId,
    pub t: f64,
}

/// Residual energy over time: `samples[k].residual[i]` is node `i`'s battery
/// at `samples[k].t`. Node `i` is the i-th UAV id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyLog {
    pub initial: Vec<f64>,
    pub samples: Vec<EnergySample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub t: f64,
    pub residual: Vec<f64>,
}

impl EnergyLog {
    /// Consumed energy per node at the last sample (0 with no samples).
    pub fn consumed(&self) -> Vec<f64> {
        match self.samples.last() {
            None => vec![0.0; self.initial.len()],
            Some(last) => self.initial.iter().zip(&last.residual).map(|(i, r)| i - r).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsSummary {
    /// s
    pub avg_delay: Option<f64>,
    /// J per node
    pub avg_energy: Option<f64>,
    /// s
    pub avg_ch_duration: Option<f64>,
    /// switches per node
    pub avg_cm_switches: Option<f64>,
    /// Not one of the four metrics; reported alongside delay.
    pub delivery_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("metric needs at least one UAV")]
    NoUavs,
}

/// Mean delay over delivered packets.
pub fn avg_end_to_end_delay(log: &[DeliveryRecord]) -> Option<f64> {
    let (sum, n) = log
        .iter()
        .filter(|r| r.outcome.delivered)
        .fold((0.0, 0usize), |(s, n), r| (s + r.outcome.delay, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn delivery_ratio(log: &[DeliveryRecord]) -> Option<f64> {
    if log.is_empty() {
        return None;
    }
    Some(log.iter().filter(|r| r.outcome.delivered).count() as f64 / log.len() as f64)
}

/// Total consumed energy over `n_uavs`.
pub fn avg_energy_consumption(log: &EnergyLog, n_uavs: usize) -> Result<f64, MetricsError> {
    if n_uavs == 0 {
        return Err(MetricsError::NoUavs);
    }
    Ok(log.consumed().iter().sum::<f64>() / n_uavs as f64)
}

/// Mean CH tenure; tenures still open at `sim_end` are closed there.
pub fn avg_ch_duration(role_log: &[RoleInterval], sim_end: f64) -> Option<f64> {
    let (sum, n) = role_log
        .iter()
        .filter(|r| r.role == Role::Ch)
        .fold((0.0, 0usize), |(s, n), r| (s + (r.t_end.unwrap_or(sim_end) - r.t_start), n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Cluster changes per node.
pub fn avg_cm_switches(log: &[MembershipChange], n_uavs: usize) -> Result<f64, MetricsError> {
    if n_uavs == 0 {
        return Err(MetricsError::NoUavs);
    }
    let switches = log.iter().filter(|c| c.old_cluster != c.new_cluster).count();
    Ok(switches as f64 / n_uavs as f64)
}
