//! Range-based neighbor discovery, first-order radio energy, and
//! cluster-based multi-hop packet delivery over a lossy abstract radio.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forest::ClusterForest;
use crate::model::{EnergyModel, NodeId, RadioConfig, UavState, Vec3};

/// Symmetric, irreflexive one-hop adjacency. Neighbor lists are sorted by id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Adjacency {
    neighbors: BTreeMap<NodeId, Vec<NodeId>>,
}

impl Adjacency {
    pub fn neighbors(&self, id: NodeId) -> &[NodeId] {
        self.neighbors.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn contains(&self, a: NodeId, b: NodeId) -> bool {
        self.neighbors(a).binary_search(&b).is_ok()
    }

    pub fn has_node(&self, id: NodeId) -> bool {
        self.neighbors.contains_key(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.neighbors.keys().copied()
    }

    pub fn degree(&self, id: NodeId) -> usize {
        self.neighbors(id).len()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.values().map(Vec::len).sum::<usize>() / 2
    }

    /// Adjacency induced on the nodes accepted by `keep`.
    pub fn restricted(&self, keep: impl Fn(NodeId) -> bool) -> Adjacency {
        let neighbors = self
            .neighbors
            .iter()
            .filter(|(id, _)| keep(**id))
            .map(|(id, ns)| (*id, ns.iter().copied().filter(|n| keep(*n)).collect()))
            .collect();
        Adjacency { neighbors }
    }

    /// Builds an adjacency from an explicit edge list (test fixtures, trace replay).
    pub fn from_edges(nodes: impl IntoIterator<Item = NodeId>, edges: impl IntoIterator<Item = (NodeId, NodeId)>) -> Self {
        let mut neighbors: BTreeMap<NodeId, Vec<NodeId>> = nodes.into_iter().map(|n| (n, Vec::new())).collect();
        for (a, b) in edges {
            if a == b {
                continue;
            }
            neighbors.entry(a).or_default().push(b);
            neighbors.entry(b).or_default().push(a);
        }
        for ns in neighbors.values_mut() {
            ns.sort_unstable();
            ns.dedup();
        }
        Adjacency { neighbors }
    }
}

/// i ~ j iff i ≠ j and their 3D distance is at most `comm_range` (inclusive).
pub fn compute_adjacency(states: &[UavState], comm_range: f64) -> Adjacency {
    let mut order: Vec<&UavState> = states.iter().collect();
    order.sort_by_key(|s| s.id);
    let mut neighbors: BTreeMap<NodeId, Vec<NodeId>> = order.iter().map(|s| (s.id, Vec::new())).collect();
    let r2 = comm_range * comm_range;
    for (i, a) in order.iter().enumerate() {
        for b in &order[i + 1..] {
            let d = a.position - b.position;
            // squared compare first, exact distance only near the boundary
            let d2 = d.dot(d);
            if d2 <= r2 || (d2 <= r2 * (1.0 + 1e-12) && d.norm() <= comm_range) {
                neighbors.get_mut(&a.id).expect("present").push(b.id);
                neighbors.get_mut(&b.id).expect("present").push(a.id);
            }
        }
    }
    for ns in neighbors.values_mut() {
        ns.sort_unstable();
    }
    Adjacency { neighbors }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RadioOp {
    Tx,
    Rx,
}

/// TX: `e_elec·bits + e_amp·bits·distance²`; RX: `e_elec·bits`.
pub fn energy_cost(kind: RadioOp, bits: f64, distance: f64, model: &EnergyModel) -> f64 {
    match kind {
        RadioOp::Tx => model.e_elec * bits + model.e_amp * bits * distance * distance,
        RadioOp::Rx => model.e_elec * bits,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ChargeKind {
    Tx,
    Rx,
    Idle,
}

/// One debit against a node's battery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyCharge {
    pub node: NodeId,
    pub kind: ChargeKind,
    pub joules: f64,
}

/// One local broadcast: the sender pays one TX sized to reach its farthest
/// neighbor, each neighbor pays one RX.
pub fn broadcast_charges(
    sender: NodeId,
    neighbor_distances: &[(NodeId, f64)],
    bits: f64,
    model: &EnergyModel,
) -> Vec<EnergyCharge> {
    let reach = neighbor_distances.iter().map(|(_, d)| *d).fold(0.0, f64::max);
    let mut out = Vec::with_capacity(neighbor_distances.len() + 1);
    out.push(EnergyCharge { node: sender, kind: ChargeKind::Tx, joules: energy_cost(RadioOp::Tx, bits, reach, model) });
    out.extend(neighbor_distances.iter().map(|(n, _)| EnergyCharge {
        node: *n,
        kind: ChargeKind::Rx,
        joules: energy_cost(RadioOp::Rx, bits, 0.0, model),
    }));
    out
}

/// One transmission attempt over one hop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopAttempt {
    pub from: NodeId,
    pub to: NodeId,
    pub distance: f64,
    /// False when the link is currently out of range; the receiver then pays nothing.
    pub link_up: bool,
    pub success: bool,
    pub tx_joules: f64,
    pub rx_joules: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DeliveryOutcome {
    pub delivered: bool,
    /// s
    pub delay: f64,
    pub hops: u32,
    pub retransmissions: u32,
    pub energy_spent: BTreeMap<NodeId, f64>,
    #[serde(skip)]
    pub attempts: Vec<HopAttempt>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RouteError {
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("source and destination are both {0}")]
    SameEndpoints(NodeId),
}

/// What the router can see of the network at one instant.
#[derive(Debug, Clone, Copy)]
pub struct NetworkView<'a> {
    pub positions: &'a BTreeMap<NodeId, Vec3>,
    pub adjacency: &'a Adjacency,
    pub forest: &'a ClusterForest,
}

impl NetworkView<'_> {
    fn pos(&self, id: NodeId) -> Vec3 {
        self.positions[&id]
    }

    fn chain_to_root(&self, id: NodeId) -> Vec<NodeId> {
        let mut chain = vec![id];
        let mut cur = id;
        while let Some(p) = self.forest.parent_of(cur) {
            chain.push(p);
            cur = p;
            if chain.len() > self.forest.len() + 1 {
                break;
            }
        }
        chain
    }

    /// The overlay hop from CH `from` to CH `to`: `Some(None)` when they are in
    /// range of each other, `Some(Some(g))` through the lowest-id node `g`
    /// adjacent to both, `None` when they are not overlay neighbors.
    pub fn overlay_link(&self, from: NodeId, to: NodeId) -> Option<Option<NodeId>> {
        if self.adjacency.contains(from, to) {
            return Some(None);
        }
        let a = self.adjacency.neighbors(from);
        let b = self.adjacency.neighbors(to);
        // both sorted: merge-intersect for the smallest common neighbor
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return Some(Some(a[i])),
            }
        }
        None
    }

    /// Full node sequence a packet follows, or `None` when greedy forwarding
    /// over the CH overlay dead-ends.
    pub fn plan_route(&self, src: NodeId, dst: NodeId) -> Option<Vec<NodeId>> {
        let up = self.chain_to_root(src);
        let down = self.chain_to_root(dst);
        let src_ch = *up.last().expect("non-empty");
        let dst_ch = *down.last().expect("non-empty");

        if src_ch == dst_ch {
            let lca_idx = up.iter().position(|n| down.contains(n))?;
            let lca = up[lca_idx];
            let mut path = up[..=lca_idx].to_vec();
            let down_idx = down.iter().position(|n| *n == lca).expect("lca on both chains");
            path.extend(down[..down_idx].iter().rev());
            return Some(path);
        }

        let mut path = up;
        let target = self.pos(dst_ch);
        let mut cur = src_ch;
        while cur != dst_ch {
            let here = self.pos(cur).distance(target);
            let mut best: Option<(f64, NodeId, Option<NodeId>)> = None;
            for ch in self.forest.cluster_heads() {
                if ch == cur || !self.positions.contains_key(&ch) {
                    continue;
                }
                let Some(via) = self.overlay_link(cur, ch) else { continue };
                let d = self.pos(ch).distance(target);
                let better = match best {
                    None => true,
                    Some((bd, bid, _)) => d < bd || (d == bd && ch < bid),
                };
                if better {
                    best = Some((d, ch, via));
                }
            }
            let (d, next, via) = best?;
            if !(d < here) {
                return None;
            }
            if let Some(g) = via {
                path.push(g);
            }
            path.push(next);
            cur = next;
        }
        path.extend(down.iter().rev().skip(1));
        Some(path)
    }
}

/// Sends one packet of `bits` from `src` to `dst`.
///
/// Every hop is attempted up to `1 + max_retransmissions` times; each attempt
/// draws one uniform from `rng`, costs one `per_hop_latency`, charges TX to the
/// sender and (if the link is in range) RX to the receiver. A hop whose link
/// is out of range never succeeds.
pub fn route_packet<R: Rng + ?Sized>(
    src: NodeId,
    dst: NodeId,
    bits: f64,
    net: &NetworkView<'_>,
    radio: &RadioConfig,
    energy: &EnergyModel,
    rng: &mut R,
) -> Result<DeliveryOutcome, RouteError> {
    for id in [src, dst] {
        if !net.positions.contains_key(&id) || !net.forest.contains(id) {
            return Err(RouteError::UnknownNode(id));
        }
    }
    if src == dst {
        return Err(RouteError::SameEndpoints(src));
    }
    let mut out = DeliveryOutcome::default();
    let Some(path) = net.plan_route(src, dst) else {
        return Ok(out);
    };
    let mut attempts_total = 0u32;
    for hop in path.windows(2) {
        let (a, b) = (hop[0], hop[1]);
        let distance = net.pos(a).distance(net.pos(b));
        let link_up = net.adjacency.contains(a, b);
        let mut ok = false;
        for _ in 0..=radio.max_retransmissions {
            let draw: f64 = rng.random();
            let success = link_up && draw >= radio.loss_prob;
            let tx = energy_cost(RadioOp::Tx, bits, distance, energy);
            let rx = if link_up { energy_cost(RadioOp::Rx, bits, distance, energy) } else { 0.0 };
            *out.energy_spent.entry(a).or_insert(0.0) += tx;
            if link_up {
                *out.energy_spent.entry(b).or_insert(0.0) += rx;
            }
            out.attempts.push(HopAttempt { from: a, to: b, distance, link_up, success, tx_joules: tx, rx_joules: rx });
            out.delay += radio.per_hop_latency;
            attempts_total += 1;
            if success {
                ok = true;
                break;
            }
        }
        if !ok {
            return Ok(out);
        }
        out.hops += 1;
    }
    out.delivered = true;
    out.retransmissions = attempts_total - out.hops;
    Ok(out)
}
