//! Ground-station-assisted cluster maintenance: local OSF re-evaluation,
//! CH handover and the re-clustering trigger.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::comms::Adjacency;
use crate::forest::{ClusterForest, Role};
use crate::model::{GsConfig, NodeId, OsfWeights, UavState};
use crate::sefc::{self, elect_bkch};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MaintenanceError {
    #[error("re-clustering decision needs at least one OSF value")]
    EmptyOsfMap,
}

/// GS availability as a square wave: on for the first `duty_cycle` fraction
/// of every `duty_period`.
pub fn gs_available(gs: &GsConfig, tick: u64, tick_dt: f64) -> bool {
    let period = ((gs.duty_period / tick_dt).round() as u64).max(1);
    let on = (gs.duty_cycle * period as f64).round() as u64;
    tick % period < on
}

pub fn nodes_in_gs_range(states: &[UavState], gs: &GsConfig, tick: u64, tick_dt: f64) -> BTreeSet<NodeId> {
    if !gs_available(gs, tick, tick_dt) {
        return BTreeSet::new();
    }
    states.iter().filter(|s| s.position.distance(gs.position) <= gs.range).map(|s| s.id).collect()
}

/// OSF of each member with the neighbor universe restricted to fellow members.
pub fn reevaluate_cluster_osf(members: &[UavState], w: &OsfWeights, degree_ref: f64) -> BTreeMap<NodeId, f64> {
    sefc::osf_within(members, w, degree_ref)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandoverEvent {
    pub old_ch: NodeId,
    pub new_ch: NodeId,
    pub old_osf: f64,
    pub new_osf: f64,
}

/// Best handover candidate: highest OSF; on exact ties the current BKCH wins,
/// then the lower id.
pub fn handover_candidate(osf_map: &BTreeMap<NodeId, f64>, bkch: Option<NodeId>) -> Option<NodeId> {
    let mut best: Option<(NodeId, f64)> = None;
    for (id, o) in osf_map {
        best = match best {
            None => Some((*id, *o)),
            Some((bid, bo)) => {
                let wins = *o > bo || (*o == bo && Some(*id) == bkch && Some(bid) != bkch);
                if wins {
                    Some((*id, *o))
                } else {
                    Some((bid, bo))
                }
            }
        };
    }
    best.map(|(id, _)| id)
}

/// Re-roots `ch`'s cluster at the best member of `osf_map` when its OSF is
/// strictly higher than the CH's and at least `osf(CH)·(1 + margin)`.
///
/// Tree edges on the path between the new and old CH are reversed, so
/// membership is unchanged. Scores of the evaluated members are refreshed and
/// the backup is re-elected among the new CH's one-hop members.
pub fn apply_handover(
    forest: &mut ClusterForest,
    ch: NodeId,
    osf_map: &BTreeMap<NodeId, f64>,
    handover_margin: f64,
    adjacency: &Adjacency,
) -> Option<HandoverEvent> {
    let best = handover_candidate(osf_map, forest.bkch_of.get(&ch).copied())?;
    let ch_osf = osf_map.get(&ch).copied()?;
    let best_osf = osf_map[&best];
    if best == ch || forest.cluster_of.get(&best) != Some(&ch) {
        return None;
    }
    if !(best_osf > ch_osf && best_osf + 1e-12 >= ch_osf * (1.0 + handover_margin)) {
        return None;
    }

    let mut path = vec![best];
    while let Some(p) = forest.parent_of(*path.last().expect("non-empty")) {
        path.push(p);
    }
    debug_assert_eq!(path.last(), Some(&ch));
    forest.parent.remove(&best);
    for w in path.windows(2) {
        forest.parent.insert(w[1], w[0]);
    }
    forest.set_backup(ch, None);
    for (id, o) in osf_map {
        forest.score.insert(*id, *o);
    }
    forest.normalize();

    let one_hop: BTreeSet<NodeId> = adjacency
        .neighbors(best)
        .iter()
        .copied()
        .filter(|n| forest.cluster_of.get(n) == Some(&best))
        .collect();
    let bk = elect_bkch(best, &one_hop, &forest.score);
    forest.set_backup(best, bk);
    debug_assert_eq!(forest.role_of(best), Some(Role::Ch));
    Some(HandoverEvent { old_ch: ch, new_ch: best, old_osf: ch_osf, new_osf: best_osf })
}

/// True iff the mean OSF is strictly below `recluster_threshold`.
pub fn recluster_decision(osf_map: &BTreeMap<NodeId, f64>, recluster_threshold: f64) -> Result<bool, MaintenanceError> {
    if osf_map.is_empty() {
        return Err(MaintenanceError::EmptyOsfMap);
    }
    let mean = osf_map.values().sum::<f64>() / osf_map.len() as f64;
    Ok(mean < recluster_threshold)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaintenanceParams {
    pub osf_weights: OsfWeights,
    pub degree_ref: f64,
    pub handover_margin: f64,
    pub recluster_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MaintenanceOutcome {
    pub handovers: Vec<HandoverEvent>,
    /// CHs (after any handover) whose clusters should be re-formed.
    pub recluster: Vec<NodeId>,
}

/// One GS pass over every cluster whose CH is in range. Members outside GS
/// range are left out of the re-evaluation.
pub fn maintain(
    forest: &mut ClusterForest,
    states: &BTreeMap<NodeId, UavState>,
    adjacency: &Adjacency,
    in_range: &BTreeSet<NodeId>,
    params: &MaintenanceParams,
) -> MaintenanceOutcome {
    let mut out = MaintenanceOutcome::default();
    if in_range.is_empty() {
        return out;
    }
    let heads: Vec<NodeId> = forest.cluster_heads().filter(|c| in_range.contains(c) && states.contains_key(c)).collect();
    for ch in heads {
        let members: Vec<UavState> = forest
            .members_of(ch)
            .into_iter()
            .filter(|m| in_range.contains(m))
            .filter_map(|m| states.get(&m).copied())
            .collect();
        let osf_map = reevaluate_cluster_osf(&members, &params.osf_weights, params.degree_ref);
        let head = match apply_handover(forest, ch, &osf_map, params.handover_margin, adjacency) {
            Some(ev) => {
                out.handovers.push(ev);
                ev.new_ch
            }
            None => ch,
        };
        if recluster_decision(&osf_map, params.recluster_threshold).unwrap_or(false) {
            out.recluster.push(head);
        }
    }
    out
}
