//! Newline-delimited JSON run traces: one record per event, each carrying
//! its `type` and `tick`.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forest::Role;
use crate::model::{Algorithm, NodeId, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundScope {
    Global,
    Partial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TraceRecord {
    Header {
        tick: u64,
        algorithm: Algorithm,
        n_uavs: u32,
        seed: u64,
        tick_dt: f64,
        sim_duration: f64,
        /// Battery of each UAV at t = 0, J, indexed by id.
        initial_energy: Vec<f64>,
    },
    ClusterRound {
        tick: u64,
        t: f64,
        scope: RoundScope,
        nodes: u32,
        heads: u32,
        backups: u32,
        max_depth: u32,
    },
    Handover {
        tick: u64,
        t: f64,
        old_ch: NodeId,
        new_ch: NodeId,
        old_osf: f64,
        new_osf: f64,
    },
    Recluster {
        tick: u64,
        t: f64,
        heads: Vec<NodeId>,
    },
    Promotion {
        tick: u64,
        t: f64,
        old_ch: NodeId,
        new_ch: NodeId,
    },
    Membership {
        tick: u64,
        t: f64,
        node: NodeId,
        old_cluster: NodeId,
        new_cluster: NodeId,
    },
    Delivery {
        tick: u64,
        t: f64,
        src: NodeId,
        dst: NodeId,
        delivered: bool,
        delay: f64,
        hops: u32,
        retransmissions: u32,
    },
    Death {
        tick: u64,
        t: f64,
        node: NodeId,
    },
    Energy {
        tick: u64,
        t: f64,
        residual: Vec<f64>,
    },
    RoleInterval {
        tick: u64,
        node: NodeId,
        role: Role,
        t_start: f64,
        t_end: Option<f64>,
    },
    Summary {
        tick: u64,
        avg_delay_s: Option<f64>,
        delivery_ratio: Option<f64>,
        avg_energy_j: Option<f64>,
        avg_ch_duration_s: Option<f64>,
        avg_cm_switches: Option<f64>,
    },
}

impl TraceRecord {
    pub fn tick(&self) -> u64 {
        match self {
            TraceRecord::Header { tick, .. }
            | TraceRecord::ClusterRound { tick, .. }
            | TraceRecord::Handover { tick, .. }
            | TraceRecord::Recluster { tick, .. }
            | TraceRecord::Promotion { tick, .. }
            | TraceRecord::Membership { tick, .. }
            | TraceRecord::Delivery { tick, .. }
            | TraceRecord::Death { tick, .. }
            | TraceRecord::Energy { tick, .. }
            | TraceRecord::RoleInterval { tick, .. }
            | TraceRecord::Summary { tick, .. } => *tick,
        }
    }

    pub fn header(config: &SimConfig, initial_energy: &[f64]) -> Self {
        TraceRecord::Header {
            tick: 0,
            algorithm: config.algorithm,
            n_uavs: config.n_uavs,
            seed: config.seed,
            tick_dt: config.tick_dt,
            sim_duration: config.sim_duration,
            initial_energy: initial_energy.to_vec(),
        }
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn write_trace<W: Write>(records: &[TraceRecord], mut out: W) -> Result<(), TraceError> {
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn trace_to_string(records: &[TraceRecord]) -> String {
    let mut buf = Vec::new();
    write_trace(records, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

pub fn parse_trace_line(line: &str) -> Result<TraceRecord, serde_json::Error> {
    serde_json::from_str(line)
}

/// Parses a whole trace; blank lines are skipped.
pub fn parse_trace(text: &str) -> Result<Vec<TraceRecord>, TraceError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_trace_line(l).map_err(|source| TraceError::Parse { line: i + 1, source }))
        .collect()
}
