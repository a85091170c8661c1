//! One-hop comparison protocols.
//!
//! * PICA-lite scores nodes by relative mobility and residual energy, and
//!   refuses links shorter than a safety distance.
//! * OSCA-lite ranks nodes by degree and residual energy and, between rounds,
//!   promotes the backup in place when a CH dies or drifts away from its cluster.
//!
//! Both elect local score maxima as CHs, attach every other node to the best
//! CH in range, and designate the best one-hop member as backup.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::comms::{Adjacency, EnergyCharge};
use crate::forest::{argmax_by_score, ClusterForest};
use crate::model::{BaselineParams, EnergyModel, NodeId, SimConfig, UavState};
use crate::sefc::{assign_backups, broadcast_round, ClusterRound};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineContext {
    pub params: BaselineParams,
    pub max_speed: f64,
    pub degree_ref: f64,
    pub beacon_bits: f64,
    pub energy_model: EnergyModel,
}

impl From<&SimConfig> for BaselineContext {
    fn from(c: &SimConfig) -> Self {
        BaselineContext {
            params: c.baselines,
            max_speed: c.mobility.max_speed,
            degree_ref: c.degree_ref,
            beacon_bits: c.radio.beacon_bits,
            energy_model: c.energy_model,
        }
    }
}

fn beats(a: (NodeId, f64), b: (NodeId, f64)) -> bool {
    a.1 > b.1 || (a.1 == b.1 && a.0 < b.0)
}

/// Residual energy relative to the richest node of the closed neighborhood.
fn normalized_energy(id: NodeId, by_id: &BTreeMap<NodeId, &UavState>, adjacency: &Adjacency) -> f64 {
    let own = by_id[&id].energy;
    let max = adjacency
        .neighbors(id)
        .iter()
        .filter_map(|n| by_id.get(n))
        .map(|s| s.energy)
        .fold(own, f64::max);
    if max > 0.0 {
        (own / max).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Mean relative speed to the one-hop neighbors over `2·max_speed`.
fn relative_mobility(id: NodeId, by_id: &BTreeMap<NodeId, &UavState>, adjacency: &Adjacency, max_speed: f64) -> f64 {
    let me = by_id[&id];
    let rel: Vec<f64> = adjacency
        .neighbors(id)
        .iter()
        .filter_map(|n| by_id.get(n))
        .map(|s| (me.velocity - s.velocity).norm())
        .collect();
    if rel.is_empty() {
        return 0.0;
    }
    (rel.iter().sum::<f64>() / rel.len() as f64 / (2.0 * max_speed)).clamp(0.0, 1.0)
}

pub fn pica_scores(snapshot: &[UavState], adjacency: &Adjacency, ctx: &BaselineContext) -> BTreeMap<NodeId, f64> {
    let by_id: BTreeMap<NodeId, &UavState> = snapshot.iter().map(|s| (s.id, s)).collect();
    let p = &ctx.params;
    by_id
        .keys()
        .map(|id| {
            let m = relative_mobility(*id, &by_id, adjacency, ctx.max_speed);
            let e = normalized_energy(*id, &by_id, adjacency);
            (*id, (p.pica_mobility_weight * (1.0 - m) + p.pica_energy_weight * e).clamp(0.0, 1.0))
        })
        .collect()
}

pub fn osca_priorities(snapshot: &[UavState], adjacency: &Adjacency, ctx: &BaselineContext) -> BTreeMap<NodeId, f64> {
    let by_id: BTreeMap<NodeId, &UavState> = snapshot.iter().map(|s| (s.id, s)).collect();
    let p = &ctx.params;
    by_id
        .keys()
        .map(|id| {
            let deg = adjacency.neighbors(*id).iter().filter(|n| by_id.contains_key(n)).count() as f64;
            let d = (deg / ctx.degree_ref).min(1.0);
            let e = normalized_energy(*id, &by_id, adjacency);
            (*id, (p.osca_degree_weight * d + p.osca_energy_weight * e).clamp(0.0, 1.0))
        })
        .collect()
}

/// Local-maxima election over `eligible(i)` neighbor sets, then attachment of
/// every other node to its best eligible CH; nodes with none self-elect.
fn one_hop_forest(
    scores: BTreeMap<NodeId, f64>,
    adjacency: &Adjacency,
    eligible: impl Fn(NodeId) -> Vec<NodeId>,
) -> ClusterForest {
    let key = |n: NodeId| (n, scores[&n]);
    let heads: BTreeSet<NodeId> =
        scores.keys().copied().filter(|i| eligible(*i).iter().all(|j| beats(key(*i), key(*j)))).collect();
    let parents: BTreeMap<NodeId, Option<NodeId>> = scores
        .keys()
        .map(|i| {
            if heads.contains(i) {
                return (*i, None);
            }
            let best = argmax_by_score(eligible(*i).into_iter().filter(|j| heads.contains(j)).map(key));
            (*i, best.map(|(id, _)| id))
        })
        .collect();
    let mut forest = ClusterForest::from_parents(&parents, scores);
    assign_backups(&mut forest, adjacency);
    forest
}

fn control_charges(snapshot: &[UavState], adjacency: &Adjacency, ctx: &BaselineContext) -> Vec<EnergyCharge> {
    let by_id: BTreeMap<NodeId, &UavState> = snapshot.iter().map(|s| (s.id, s)).collect();
    let mut charges = broadcast_round(&by_id, adjacency, ctx.beacon_bits, &ctx.energy_model);
    charges.extend(broadcast_round(&by_id, adjacency, ctx.beacon_bits, &ctx.energy_model));
    charges
}

/// One PICA-lite round. A neighbor closer than `safe_distance` is link-unsafe:
/// it neither competes with nor can host the node.
pub fn pica_lite_round(snapshot: &[UavState], adjacency: &Adjacency, ctx: &BaselineContext) -> ClusterRound {
    let scores = pica_scores(snapshot, adjacency, ctx);
    let pos: BTreeMap<NodeId, _> = snapshot.iter().map(|s| (s.id, s.position)).collect();
    let safe = ctx.params.safe_distance;
    let forest = one_hop_forest(scores, adjacency, |i| {
        adjacency
            .neighbors(i)
            .iter()
            .copied()
            .filter(|j| pos.get(j).is_some_and(|pj| pj.distance(pos[&i]) >= safe))
            .collect()
    });
    ClusterRound { forest, charges: control_charges(snapshot, adjacency, ctx), retained: BTreeMap::new() }
}

pub fn osca_lite_round(snapshot: &[UavState], adjacency: &Adjacency, ctx: &BaselineContext) -> ClusterRound {
    let scores = osca_priorities(snapshot, adjacency, ctx);
    let present: BTreeSet<NodeId> = scores.keys().copied().collect();
    let forest = one_hop_forest(scores, adjacency, |i| {
        adjacency.neighbors(i).iter().copied().filter(|j| present.contains(j)).collect()
    });
    ClusterRound { forest, charges: control_charges(snapshot, adjacency, ctx), retained: BTreeMap::new() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromotionEvent {
    pub old_ch: NodeId,
    pub new_ch: NodeId,
}

/// A CH is lost when it is dead or out of range of more than half of its
/// live members.
fn head_lost(forest: &ClusterForest, ch: NodeId, alive: &BTreeSet<NodeId>, adjacency: &Adjacency) -> bool {
    if !alive.contains(&ch) {
        return true;
    }
    let members: Vec<NodeId> =
        forest.members_of(ch).into_iter().filter(|m| *m != ch && alive.contains(m)).collect();
    let linked = members.iter().filter(|m| adjacency.contains(ch, **m)).count();
    !members.is_empty() && 2 * linked < members.len()
}

/// OSCA-lite inter-round repair: every lost CH with a live backup is replaced
/// by that backup. Members still in range of the backup follow it; the rest
/// (and a live old CH) become singleton CHs until the next round.
pub fn osca_promote(forest: &mut ClusterForest, alive: &BTreeSet<NodeId>, adjacency: &Adjacency) -> Vec<PromotionEvent> {
    let mut events = Vec::new();
    let heads: Vec<NodeId> = forest.cluster_heads().collect();
    for ch in heads {
        if !head_lost(forest, ch, alive, adjacency) {
            continue;
        }
        let Some(b) = forest.bkch_of.get(&ch).copied() else { continue };
        if !alive.contains(&b) {
            continue;
        }
        let members = forest.members_of(ch);
        forest.set_backup(ch, None);
        for m in &members {
            forest.parent.remove(m);
        }
        for m in &members {
            if *m != b && *m != ch && adjacency.contains(b, *m) {
                forest.parent.insert(*m, b);
            }
        }
        forest.normalize();
        let one_hop: BTreeSet<NodeId> = adjacency
            .neighbors(b)
            .iter()
            .copied()
            .filter(|n| forest.cluster_of.get(n) == Some(&b))
            .collect();
        let next = crate::sefc::elect_bkch(b, &one_hop, &forest.score);
        forest.set_backup(b, next);
        events.push(PromotionEvent { old_ch: ch, new_ch: b });
    }
    events
}
