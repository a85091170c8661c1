//! The synchronous tick loop.
//!
//! Each tick runs these phases in this fixed order:
//!
//! 1. mobility step for every live UAV;
//! 2. idle energy drain;
//! 3. adjacency recomputation;
//! 4. clustering round on `clustering_interval` boundaries (or a pending
//!    partial re-clustering requested by the ground station);
//! 5. ground-station maintenance on `check_interval` boundaries (SEFC only);
//! 6. inter-round repair: OSCA-lite backup promotion, then removal of dead
//!    nodes from the forest;
//! 7. traffic generation and packet delivery;
//! 8. logging (roles, membership, energy, deaths).
//!
//! The output is a pure function of the configuration, seed included.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, BaselineContext};
use crate::comms::{compute_adjacency, route_packet, Adjacency, ChargeKind, EnergyCharge, NetworkView};
use crate::forest::{ClusterForest, Role};
use crate::maintenance::{self, MaintenanceParams};
use crate::metrics::{self, DeliveryRecord, EnergyLog, EnergySample, MembershipChange, MetricsSummary, RoleInterval};
use crate::mobility::{normal3, step_kinematics, MotionMemory};
use crate::model::{Algorithm, ConfigError, MobilityModel, NodeId, SimConfig, TrafficSpec, UavState, Vec3};
use crate::rng::{stream, SimRng, Stream};
use crate::sefc::{self, ClusterRound, SefcParams};
use crate::trace::{RoundScope, TraceRecord};

/// Persistent source/destination flows. Each flow emits one packet every
/// `interval_ticks`; a flow draws fresh endpoints when it has none or when
/// either endpoint has died.
#[derive(Debug, Clone)]
pub struct TrafficGenerator {
    interval_ticks: u64,
    flows: Vec<Option<(NodeId, NodeId)>>,
    rng: SimRng,
}

impl TrafficGenerator {
    pub fn new(spec: &TrafficSpec, interval_ticks: u64, rng: SimRng) -> Self {
        TrafficGenerator { interval_ticks: interval_ticks.max(1), flows: vec![None; spec.flows as usize], rng }
    }

    /// Packets due at `tick`. `alive` must be sorted by id.
    pub fn generate(&mut self, tick: u64, alive: &[NodeId]) -> Vec<(NodeId, NodeId)> {
        if tick % self.interval_ticks != 0 || alive.len() < 2 {
            return Vec::new();
        }
        let mut out = Vec::with_capacity(self.flows.len());
        for flow in self.flows.iter_mut() {
            let usable = flow.filter(|(s, d)| alive.binary_search(s).is_ok() && alive.binary_search(d).is_ok());
            let (s, d) = match usable {
                Some(e) => e,
                None => {
                    let si = self.rng.random_range(0..alive.len());
                    let mut di = self.rng.random_range(0..alive.len() - 1);
                    if di >= si {
                        di += 1;
                    }
                    (alive[si], alive[di])
                }
            };
            *flow = Some((s, d));
            out.push((s, d));
        }
        out
    }
}

/// Per-node energy debits by kind, indexed by UAV id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub tx: Vec<f64>,
    pub rx: Vec<f64>,
    pub idle: Vec<f64>,
}

impl EnergyLedger {
    pub fn total(&self, node: usize) -> f64 {
        self.tx[node] + self.rx[node] + self.idle[node]
    }
}

/// Invariant checks the engine performs while running.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InvariantReport {
    pub rounds_checked: u64,
    pub structure_checks: u64,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunArtifacts {
    pub config: SimConfig,
    pub ticks: u64,
    pub sim_end: f64,
    pub delivery_log: Vec<DeliveryRecord>,
    pub energy_log: EnergyLog,
    pub ledger: EnergyLedger,
    pub role_log: Vec<RoleInterval>,
    pub membership_log: Vec<MembershipChange>,
    /// Trace events in emission order (everything except role intervals and
    /// the summary, which [`RunArtifacts::trace`] appends).
    pub events: Vec<TraceRecord>,
    pub checks: InvariantReport,
    pub summary: MetricsSummary,
}

impl RunArtifacts {
    /// The full trace: header, events, role intervals by start time, summary.
    pub fn trace(&self) -> Vec<TraceRecord> {
        let mut out = Vec::with_capacity(self.events.len() + self.role_log.len() + 2);
        out.push(TraceRecord::header(&self.config, &self.energy_log.initial));
        out.extend(self.events.iter().cloned());
        let dt = self.config.tick_dt;
        let mut roles = self.role_log.clone();
        roles.sort_by(|a, b| a.t_start.total_cmp(&b.t_start).then(a.node.cmp(&b.node)));
        out.extend(roles.into_iter().map(|r| TraceRecord::RoleInterval {
            tick: (r.t_start / dt).round() as u64,
            node: r.node,
            role: r.role,
            t_start: r.t_start,
            t_end: r.t_end,
        }));
        let s = &self.summary;
        out.push(TraceRecord::Summary {
            tick: self.ticks,
            avg_delay_s: s.avg_delay,
            delivery_ratio: s.delivery_ratio,
            avg_energy_j: s.avg_energy,
            avg_ch_duration_s: s.avg_ch_duration,
            avg_cm_switches: s.avg_cm_switches,
        });
        out
    }
}

struct Simulation<'c> {
    cfg: &'c SimConfig,
    states: Vec<UavState>,
    alive: Vec<bool>,
    motion: Vec<MotionMemory>,
    mobility_rngs: Vec<SimRng>,
    loss_rng: SimRng,
    traffic: TrafficGenerator,
    forest: ClusterForest,
    pending_recluster: Vec<NodeId>,
    cluster_ticks: u64,
    check_ticks: u64,
    prev_role: Vec<Option<Role>>,
    prev_cluster: Vec<Option<NodeId>>,
    open_interval: Vec<Option<usize>>,
    out: RunArtifacts,
}

fn initial_states(cfg: &SimConfig) -> Vec<UavState> {
    let mut rng = stream(cfg.seed, Stream::Init, 0);
    let (a, e) = (cfg.arena, cfg.arena.extent());
    (0..cfg.n_uavs)
        .map(|i| {
            let position = Vec3::new(
                a.min.x + rng.random::<f64>() * e.x,
                a.min.y + rng.random::<f64>() * e.y,
                a.min.z + rng.random::<f64>() * e.z,
            );
            let dir = normal3(&mut rng);
            let velocity = match cfg.mobility.model {
                MobilityModel::GaussMarkov if !dir.is_zero() => {
                    dir / dir.norm() * cfg.mobility.gm_mean_speed.min(cfg.mobility.max_speed)
                }
                _ => Vec3::ZERO,
            };
            let jitter = cfg.initial_energy_jitter * (2.0 * rng.random::<f64>() - 1.0);
            UavState {
                id: NodeId(i),
                position,
                velocity,
                acceleration: Vec3::ZERO,
                energy: cfg.initial_energy * (1.0 + jitter),
            }
        })
        .collect()
}

fn max_depth(f: &ClusterForest) -> u32 {
    f.nodes()
        .map(|n| {
            let mut d = 0;
            let mut cur = n;
            while let Some(p) = f.parent_of(cur) {
                d += 1;
                cur = p;
                if d as usize > f.len() {
                    break;
                }
            }
            d
        })
        .max()
        .unwrap_or(0)
}

impl<'c> Simulation<'c> {
    fn new(cfg: &'c SimConfig) -> Self {
        let n = cfg.n_uavs as usize;
        let states = initial_states(cfg);
        let out = RunArtifacts {
            config: cfg.clone(),
            ticks: cfg.total_ticks(),
            sim_end: cfg.total_ticks() as f64 * cfg.tick_dt,
            energy_log: EnergyLog { initial: states.iter().map(|s| s.energy).collect(), samples: Vec::new() },
            ledger: EnergyLedger { tx: vec![0.0; n], rx: vec![0.0; n], idle: vec![0.0; n] },
            ..Default::default()
        };
        Simulation {
            cfg,
            alive: vec![true; n],
            motion: vec![MotionMemory::default(); n],
            mobility_rngs: (0..n as u64).map(|i| stream(cfg.seed, Stream::Mobility, i)).collect(),
            loss_rng: stream(cfg.seed, Stream::RadioLoss, 0),
            traffic: TrafficGenerator::new(
                &cfg.traffic,
                cfg.ticks(cfg.traffic.packet_interval),
                stream(cfg.seed, Stream::Traffic, 0),
            ),
            forest: ClusterForest::default(),
            pending_recluster: Vec::new(),
            cluster_ticks: cfg.ticks(cfg.clustering_interval),
            check_ticks: cfg.ticks(cfg.gs.check_interval),
            prev_role: vec![None; n],
            prev_cluster: vec![None; n],
            open_interval: vec![None; n],
            states,
            out,
        }
    }

    fn charge(&mut self, node: NodeId, kind: ChargeKind, joules: f64) {
        let i = node.0 as usize;
        let s = &mut self.states[i];
        let actual = joules.min(s.energy).max(0.0);
        s.energy -= actual;
        let slot = match kind {
            ChargeKind::Tx => &mut self.out.ledger.tx[i],
            ChargeKind::Rx => &mut self.out.ledger.rx[i],
            ChargeKind::Idle => &mut self.out.ledger.idle[i],
        };
        *slot += actual;
    }

    fn apply_charges(&mut self, charges: &[EnergyCharge]) {
        for c in charges {
            self.charge(c.node, c.kind, c.joules);
        }
    }

    fn live_states(&self) -> Vec<UavState> {
        self.states.iter().zip(&self.alive).filter(|(_, a)| **a).map(|(s, _)| *s).collect()
    }

    fn violation(&mut self, t: f64, what: impl std::fmt::Display) {
        self.out.checks.violations.push(format!("t={t}: {what}"));
    }

    fn cluster(&self, snapshot: &[UavState], adjacency: &Adjacency) -> ClusterRound {
        match self.cfg.algorithm {
            Algorithm::Sefc => sefc::form_clusters(snapshot, adjacency, &SefcParams::from(self.cfg)),
            Algorithm::PicaLite => baselines::pica_lite_round(snapshot, adjacency, &BaselineContext::from(self.cfg)),
            Algorithm::OscaLite => baselines::osca_lite_round(snapshot, adjacency, &BaselineContext::from(self.cfg)),
        }
    }

    fn check_round(&mut self, t: f64, round: &ClusterRound, adjacency: &Adjacency) {
        self.out.checks.rounds_checked += 1;
        if let Err(e) = round.forest.validate(Some(adjacency)) {
            self.violation(t, e);
        }
    }

    fn check_structure(&mut self, t: f64, adjacency: Option<&Adjacency>) {
        self.out.checks.structure_checks += 1;
        if let Err(e) = self.forest.validate_structure(adjacency) {
            self.violation(t, e);
        }
    }

    fn tick(&mut self, k: u64) {
        let cfg = self.cfg;
        let dt = cfg.tick_dt;
        let t = k as f64 * dt;

        // (1) mobility
        for i in 0..self.states.len() {
            if self.alive[i] {
                self.states[i] = step_kinematics(
                    &self.states[i],
                    &cfg.mobility,
                    &cfg.arena,
                    dt,
                    &mut self.motion[i],
                    &mut self.mobility_rngs[i],
                );
            }
        }

        // (2) idle drain
        let idle = cfg.energy_model.idle_power * dt;
        for i in 0..self.states.len() {
            if self.alive[i] {
                self.charge(NodeId(i as u32), ChargeKind::Idle, idle);
            }
        }

        // (3) adjacency
        let live = self.live_states();
        let adjacency = compute_adjacency(&live, cfg.comm_range);

        // (4) clustering
        if k % self.cluster_ticks == 0 {
            let round = self.cluster(&live, &adjacency);
            self.check_round(t, &round, &adjacency);
            self.apply_charges(&round.charges);
            self.out.events.push(round_record(k, t, RoundScope::Global, &round.forest));
            self.forest = round.forest;
            self.pending_recluster.clear();
        } else if !self.pending_recluster.is_empty() {
            let heads: BTreeSet<NodeId> = self.pending_recluster.drain(..).collect();
            let nodes: BTreeSet<NodeId> = self
                .forest
                .cluster_of
                .iter()
                .filter(|(n, c)| heads.contains(c) && self.alive[n.0 as usize])
                .map(|(n, _)| *n)
                .collect();
            if !nodes.is_empty() {
                let subset: Vec<UavState> = live.iter().filter(|s| nodes.contains(&s.id)).copied().collect();
                let sub_adj = adjacency.restricted(|n| nodes.contains(&n));
                let round = self.cluster(&subset, &sub_adj);
                self.check_round(t, &round, &sub_adj);
                self.apply_charges(&round.charges);
                self.out.events.push(round_record(k, t, RoundScope::Partial, &round.forest));
                self.forest.splice(&round.forest);
                self.check_structure(t, None);
            }
        }

        // (5) ground-station maintenance
        if cfg.algorithm == Algorithm::Sefc && k % self.check_ticks == 0 {
            let in_range = maintenance::nodes_in_gs_range(&live, &cfg.gs, k, dt);
            if !in_range.is_empty() {
                let by_id: BTreeMap<NodeId, UavState> = live.iter().map(|s| (s.id, *s)).collect();
                let params = MaintenanceParams {
                    osf_weights: cfg.osf_weights,
                    degree_ref: cfg.degree_ref,
                    handover_margin: cfg.handover_margin,
                    recluster_threshold: cfg.recluster_threshold,
                };
                let outcome = maintenance::maintain(&mut self.forest, &by_id, &adjacency, &in_range, &params);
                for ev in &outcome.handovers {
                    self.out.events.push(TraceRecord::Handover {
                        tick: k,
                        t,
                        old_ch: ev.old_ch,
                        new_ch: ev.new_ch,
                        old_osf: ev.old_osf,
                        new_osf: ev.new_osf,
                    });
                }
                if !outcome.handovers.is_empty() {
                    self.check_structure(t, None);
                }
                if !outcome.recluster.is_empty() {
                    self.out.events.push(TraceRecord::Recluster { tick: k, t, heads: outcome.recluster.clone() });
                    self.pending_recluster = outcome.recluster;
                }
            }
        }

        // (6) inter-round repair
        let alive_set: BTreeSet<NodeId> = live.iter().map(|s| s.id).collect();
        if cfg.algorithm == Algorithm::OscaLite {
            let promoted = baselines::osca_promote(&mut self.forest, &alive_set, &adjacency);
            for ev in &promoted {
                self.out.events.push(TraceRecord::Promotion { tick: k, t, old_ch: ev.old_ch, new_ch: ev.new_ch });
            }
            if !promoted.is_empty() {
                self.check_structure(t, None);
            }
        }
        let dead: Vec<NodeId> = self.forest.nodes().filter(|n| !alive_set.contains(n)).collect();
        for n in dead {
            self.forest.remove_node(n);
        }

        // (7) traffic
        let alive_ids: Vec<NodeId> = alive_set.iter().copied().collect();
        let due = self.traffic.generate(k, &alive_ids);
        if !due.is_empty() {
            let positions: BTreeMap<NodeId, Vec3> = live.iter().map(|s| (s.id, s.position)).collect();
            let bits = cfg.radio.data_bits + cfg.traffic.payload_bits;
            for (src, dst) in due {
                let net = NetworkView { positions: &positions, adjacency: &adjacency, forest: &self.forest };
                let outcome =
                    match route_packet(src, dst, bits, &net, &cfg.radio, &cfg.energy_model, &mut self.loss_rng) {
                        Ok(o) => o,
                        Err(e) => {
                            self.violation(t, e);
                            continue;
                        }
                    };
                for a in &outcome.attempts {
                    self.charge(a.from, ChargeKind::Tx, a.tx_joules);
                    if a.link_up {
                        self.charge(a.to, ChargeKind::Rx, a.rx_joules);
                    }
                }
                self.out.events.push(TraceRecord::Delivery {
                    tick: k,
                    t,
                    src,
                    dst,
                    delivered: outcome.delivered,
                    delay: outcome.delay,
                    hops: outcome.hops,
                    retransmissions: outcome.retransmissions,
                });
                self.out.delivery_log.push(DeliveryRecord { tick: k, t, src, dst, outcome });
            }
        }

        // (8) logging
        self.log_tick(k, t);
    }

    fn log_tick(&mut self, k: u64, t: f64) {
        let n = self.states.len();
        for i in 0..n {
            if self.alive[i] && self.states[i].energy <= 0.0 {
                self.alive[i] = false;
                self.out.events.push(TraceRecord::Death { tick: k, t, node: NodeId(i as u32) });
            }
        }
        for i in 0..n {
            let id = NodeId(i as u32);
            let (role, cluster) = if self.alive[i] {
                (self.forest.role_of(id), self.forest.cluster_of.get(&id).copied())
            } else {
                (None, None)
            };
            if self.alive[i] && role.is_none() {
                self.violation(t, format!("live node {id} has no role"));
            }
            if role != self.prev_role[i] {
                if let Some(idx) = self.open_interval[i].take() {
                    self.out.role_log[idx].t_end = Some(t);
                }
                if let Some(r) = role {
                    self.open_interval[i] = Some(self.out.role_log.len());
                    self.out.role_log.push(RoleInterval { node: id, role: r, t_start: t, t_end: None });
                }
                self.prev_role[i] = role;
            }
            if let (Some(old), Some(new)) = (self.prev_cluster[i], cluster) {
                if old != new {
                    self.out.membership_log.push(MembershipChange { node: id, old_cluster: old, new_cluster: new, t });
                    self.out.events.push(TraceRecord::Membership {
                        tick: k,
                        t,
                        node: id,
                        old_cluster: old,
                        new_cluster: new,
                    });
                }
            }
            self.prev_cluster[i] = cluster;
        }
        let residual: Vec<f64> = self.states.iter().map(|s| s.energy).collect();
        if k % self.cluster_ticks == 0 || k + 1 == self.out.ticks {
            self.out.events.push(TraceRecord::Energy { tick: k, t, residual: residual.clone() });
        }
        self.out.energy_log.samples.push(EnergySample { t, residual });
    }

    fn finish(mut self) -> RunArtifacts {
        let n = self.cfg.n_uavs as usize;
        let out = &mut self.out;
        if out.ticks > 0 {
            out.summary = MetricsSummary {
                avg_delay: metrics::avg_end_to_end_delay(&out.delivery_log),
                avg_energy: metrics::avg_energy_consumption(&out.energy_log, n).ok(),
                avg_ch_duration: metrics::avg_ch_duration(&out.role_log, out.sim_end),
                avg_cm_switches: metrics::avg_cm_switches(&out.membership_log, n).ok(),
                delivery_ratio: metrics::delivery_ratio(&out.delivery_log),
            };
        }
        self.out
    }
}

fn round_record(tick: u64, t: f64, scope: RoundScope, f: &ClusterForest) -> TraceRecord {
    TraceRecord::ClusterRound {
        tick,
        t,
        scope,
        nodes: f.len() as u32,
        heads: f.cluster_heads().count() as u32,
        backups: f.bkch_of.len() as u32,
        max_depth: max_depth(f),
    }
}

/// Runs one simulation to completion.
pub fn run_simulation(config: &SimConfig) -> Result<RunArtifacts, ConfigError> {
    config.validate()?;
    let mut sim = Simulation::new(config);
    for k in 0..sim.out.ticks {
        sim.tick(k);
    }
    Ok(sim.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_duration_is_empty() {
        let cfg = SimConfig { sim_duration: 0.0, n_uavs: 5, ..Default::default() };
        let a = run_simulation(&cfg).unwrap();
        assert!(a.delivery_log.is_empty() && a.role_log.is_empty() && a.membership_log.is_empty());
        assert!(a.energy_log.samples.is_empty());
        assert_eq!(a.summary, MetricsSummary::default());
    }

    #[test]
    fn singleton_run() {
        let cfg = SimConfig { n_uavs: 1, sim_duration: 20.0, ..Default::default() };
        let a = run_simulation(&cfg).unwrap();
        assert_eq!(a.role_log.len(), 1);
        assert_eq!(a.role_log[0].role, Role::Ch);
        assert_eq!(a.role_log[0].t_start, 0.0);
        assert_eq!(a.role_log[0].t_end, None);
        assert_eq!(a.summary.avg_ch_duration, Some(a.sim_end));
        assert!(a.delivery_log.is_empty());
        let series: Vec<f64> = a.energy_log.samples.iter().map(|s| s.residual[0]).collect();
        assert!(series.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn traffic_interval_and_singleton() {
        let spec = TrafficSpec { flows: 3, packet_interval: 1.0, payload_bits: 10.0 };
        let mut g = TrafficGenerator::new(&spec, 10, stream(1, Stream::Traffic, 0));
        assert!(g.generate(5, &[NodeId(0), NodeId(1)]).is_empty());
        assert!(g.generate(10, &[NodeId(0)]).is_empty());
        let p = g.generate(20, &[NodeId(0), NodeId(1), NodeId(2)]);
        assert_eq!(p.len(), 3);
        assert!(p.iter().all(|(s, d)| s != d));
    }

    #[test]
    fn invalid_config_rejected() {
        assert!(run_simulation(&SimConfig { n_uavs: 0, ..Default::default() }).is_err());
    }
}
