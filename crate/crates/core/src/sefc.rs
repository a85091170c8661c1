//! SEFC multi-hop clustering.
//!
//! One round runs, for every UAV and in this order:
//!
//! 1. beacon advertisement (id, position, velocity, acceleration, energy);
//! 2. normalized speed/acceleration/energy-surplus differences to each one-hop
//!    neighbor and their mobility-energy difference (MED);
//! 3. the similarity set: neighbors below the MED threshold that fly inside the
//!    direction cone;
//! 4. the overall stability factor (OSF) over the similarity set;
//! 5. OSF broadcast;
//! 6. parent selection: the similarity-set neighbor with the highest OSF above
//!    the node's own, otherwise self-election as cluster head;
//! 7. backup CH designation among each CH's one-hop cluster members.
//!
//! Every ratio whose normalizer is zero evaluates to zero.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::comms::{broadcast_charges, Adjacency, EnergyCharge};
use crate::forest::{argmax_by_score, ClusterForest};
use crate::model::{EnergyModel, MedWeights, NodeId, OsfWeights, SimConfig, UavState, Vec3};

/// Strict margin a parent's OSF must clear above the child's.
pub const PARENT_MARGIN: f64 = 1e-12;

/// What node `i` learns about neighbor `j` from `j`'s beacon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborRecord {
    pub neighbor_id: NodeId,
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
    pub energy: f64,
    /// Distance from the receiving node, m.
    pub distance: f64,
    /// Filled in once the neighbor's OSF broadcast has been heard.
    pub osf: Option<f64>,
}

impl NeighborRecord {
    pub fn from_beacon(receiver: &UavState, sender: &UavState) -> Self {
        NeighborRecord {
            neighbor_id: sender.id,
            position: sender.position,
            velocity: sender.velocity,
            acceleration: sender.acceleration,
            energy: sender.energy,
            distance: receiver.position.distance(sender.position),
            osf: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairwiseDiffs {
    pub sd: f64,
    pub ad: f64,
    pub ed: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        (num / den).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// SD, AD and ED of `me` against each neighbor, normalized by the largest
/// difference over all of `neighbors`. ED only counts energy surplus.
pub fn pairwise_diffs(me: &UavState, neighbors: &[NeighborRecord]) -> BTreeMap<NodeId, PairwiseDiffs> {
    let (s_i, a_i, e_i) = (me.speed(), me.accel_magnitude(), me.energy);
    let raw: Vec<(NodeId, f64, f64, f64)> = neighbors
        .iter()
        .map(|n| {
            (
                n.neighbor_id,
                (s_i - n.velocity.norm()).abs(),
                (a_i - n.acceleration.norm()).abs(),
                (n.energy - e_i).max(0.0),
            )
        })
        .collect();
    let sd_max = raw.iter().map(|r| r.1).fold(0.0, f64::max);
    let ad_max = raw.iter().map(|r| r.2).fold(0.0, f64::max);
    let ed_max = raw.iter().map(|r| r.3).fold(0.0, f64::max);
    raw.into_iter()
        .map(|(id, sd, ad, ed)| (id, PairwiseDiffs { sd: ratio(sd, sd_max), ad: ratio(ad, ad_max), ed: ratio(ed, ed_max) }))
        .collect()
}

/// `c1·SD + c2·AD + c3·(1 − ED)`.
pub fn med(diffs: &PairwiseDiffs, w: &MedWeights) -> f64 {
    // weight sums are only validated to 1e-9
    (w.c1 * diffs.sd + w.c2 * diffs.ad + w.c3 * (1.0 - diffs.ed)).clamp(0.0, 1.0)
}

/// Neighbors with `MED < med_threshold` whose heading is within the cone
/// `cos ≥ direction_cos_threshold`. A zero velocity on either side has no
/// heading and passes the cone test.
pub fn similarity_set(
    me: &UavState,
    neighbors: &[NeighborRecord],
    meds: &BTreeMap<NodeId, f64>,
    med_threshold: f64,
    direction_cos_threshold: f64,
) -> BTreeSet<NodeId> {
    neighbors
        .iter()
        .filter(|n| meds.get(&n.neighbor_id).is_some_and(|m| *m < med_threshold))
        .filter(|n| me.velocity.cos_angle(n.velocity).is_none_or(|c| c >= direction_cos_threshold))
        .map(|n| n.neighbor_id)
        .collect()
}

/// The five OSF components, each in [0, 1], and their weighted sum.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OsfTerms {
    pub sd_av: f64,
    pub ad_av: f64,
    pub ed_av: f64,
    pub d_av: f64,
    pub degree: f64,
    pub osf: f64,
}

/// Overall stability factor over `retained`. An empty set scores 0.
///
/// The degree term is `min(|retained| / degree_ref, 1)` so that it lives on the
/// same [0, 1] scale as the four averages.
pub fn osf_terms(
    retained: &BTreeSet<NodeId>,
    diffs: &BTreeMap<NodeId, PairwiseDiffs>,
    distances: &BTreeMap<NodeId, f64>,
    w: &OsfWeights,
    degree_ref: f64,
) -> OsfTerms {
    if retained.is_empty() {
        return OsfTerms::default();
    }
    let d = retained.len() as f64;
    let d_max = retained.iter().map(|j| distances[j]).fold(0.0, f64::max);
    let (mut sd, mut ad, mut ed, mut dist) = (0.0, 0.0, 0.0, 0.0);
    for j in retained {
        let p = &diffs[j];
        sd += 1.0 - p.sd;
        ad += 1.0 - p.ad;
        ed += p.ed;
        dist += 1.0 - ratio(distances[j], d_max);
    }
    let mut t = OsfTerms {
        sd_av: (sd / d).clamp(0.0, 1.0),
        ad_av: (ad / d).clamp(0.0, 1.0),
        ed_av: (ed / d).clamp(0.0, 1.0),
        d_av: (dist / d).clamp(0.0, 1.0),
        degree: (d / degree_ref).min(1.0),
        osf: 0.0,
    };
    t.osf = (w.alpha * t.sd_av + w.beta * t.ad_av + w.gamma * t.ed_av + w.delta * t.d_av + w.epsilon * t.degree)
        .clamp(0.0, 1.0);
    t
}

pub fn osf(
    retained: &BTreeSet<NodeId>,
    diffs: &BTreeMap<NodeId, PairwiseDiffs>,
    distances: &BTreeMap<NodeId, f64>,
    w: &OsfWeights,
    degree_ref: f64,
) -> f64 {
    osf_terms(retained, diffs, distances, w, degree_ref).osf
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParentDecision {
    Parent(NodeId),
    SelfCh,
}

/// Highest-OSF candidate strictly above `self_osf` (by [`PARENT_MARGIN`]),
/// ties to the lower id; otherwise self-election.
pub fn select_parent(self_osf: f64, candidates: &BTreeMap<NodeId, f64>) -> ParentDecision {
    let eligible = candidates.iter().filter(|(_, o)| **o > self_osf + PARENT_MARGIN).map(|(id, o)| (*id, *o));
    match argmax_by_score(eligible) {
        Some((id, _)) => ParentDecision::Parent(id),
        None => ParentDecision::SelfCh,
    }
}

/// Highest-OSF one-hop cluster member of `ch` (ties to lower id).
pub fn elect_bkch(ch: NodeId, one_hop_members: &BTreeSet<NodeId>, osfs: &BTreeMap<NodeId, f64>) -> Option<NodeId> {
    argmax_by_score(
        one_hop_members.iter().filter(|m| **m != ch).map(|m| (*m, osfs.get(m).copied().unwrap_or(0.0))),
    )
    .map(|(id, _)| id)
}

/// Picks a backup for every CH of `forest` from its one-hop cluster members,
/// ranked by `forest.score`.
pub fn assign_backups(forest: &mut ClusterForest, adjacency: &Adjacency) {
    let heads: Vec<NodeId> = forest.cluster_heads().collect();
    for ch in heads {
        let members: BTreeSet<NodeId> = adjacency
            .neighbors(ch)
            .iter()
            .copied()
            .filter(|n| forest.cluster_of.get(n) == Some(&ch))
            .collect();
        let b = elect_bkch(ch, &members, &forest.score);
        forest.set_backup(ch, b);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SefcParams {
    pub med_weights: MedWeights,
    pub osf_weights: OsfWeights,
    pub med_threshold: f64,
    pub direction_cos_threshold: f64,
    pub degree_ref: f64,
    pub beacon_bits: f64,
    pub energy_model: EnergyModel,
}

impl From<&SimConfig> for SefcParams {
    fn from(c: &SimConfig) -> Self {
        SefcParams {
            med_weights: c.med_weights,
            osf_weights: c.osf_weights,
            med_threshold: c.med_threshold,
            direction_cos_threshold: c.direction_cos_threshold,
            degree_ref: c.degree_ref,
            beacon_bits: c.radio.beacon_bits,
            energy_model: c.energy_model,
        }
    }
}

/// Output of one clustering round: the forest, the control-traffic energy it
/// cost, and each node's similarity set.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClusterRound {
    pub forest: ClusterForest,
    pub charges: Vec<EnergyCharge>,
    pub retained: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

/// Beacon records `state` hears from its neighbors in `adjacency`.
pub fn hear_beacons(state: &UavState, by_id: &BTreeMap<NodeId, &UavState>, adjacency: &Adjacency) -> Vec<NeighborRecord> {
    adjacency
        .neighbors(state.id)
        .iter()
        .filter_map(|n| by_id.get(n))
        .map(|s| NeighborRecord::from_beacon(state, s))
        .collect()
}

/// Charges one broadcast of `bits` from every node in `by_id`.
pub fn broadcast_round(
    by_id: &BTreeMap<NodeId, &UavState>,
    adjacency: &Adjacency,
    bits: f64,
    model: &EnergyModel,
) -> Vec<EnergyCharge> {
    let mut out = Vec::new();
    for (id, s) in by_id {
        let nd: Vec<(NodeId, f64)> = adjacency
            .neighbors(*id)
            .iter()
            .filter_map(|n| by_id.get(n).map(|o| (*n, s.position.distance(o.position))))
            .collect();
        out.extend(broadcast_charges(*id, &nd, bits, model));
    }
    out
}

/// Runs one full SEFC round over `snapshot`.
pub fn form_clusters(snapshot: &[UavState], adjacency: &Adjacency, params: &SefcParams) -> ClusterRound {
    let by_id: BTreeMap<NodeId, &UavState> = snapshot.iter().map(|s| (s.id, s)).collect();

    // advertisement
    let mut charges = broadcast_round(&by_id, adjacency, params.beacon_bits, &params.energy_model);

    let mut osfs = BTreeMap::new();
    let mut retained_sets = BTreeMap::new();
    for (id, me) in &by_id {
        let heard = hear_beacons(me, &by_id, adjacency);
        let diffs = pairwise_diffs(me, &heard);
        let meds: BTreeMap<NodeId, f64> = diffs.iter().map(|(j, d)| (*j, med(d, &params.med_weights))).collect();
        let retained = similarity_set(me, &heard, &meds, params.med_threshold, params.direction_cos_threshold);
        let distances: BTreeMap<NodeId, f64> = heard.iter().map(|n| (n.neighbor_id, n.distance)).collect();
        osfs.insert(*id, osf(&retained, &diffs, &distances, &params.osf_weights, params.degree_ref));
        retained_sets.insert(*id, retained);
    }

    // OSF broadcast
    charges.extend(broadcast_round(&by_id, adjacency, params.beacon_bits, &params.energy_model));

    let parents: BTreeMap<NodeId, Option<NodeId>> = retained_sets
        .iter()
        .map(|(id, set)| {
            let candidates: BTreeMap<NodeId, f64> = set.iter().map(|j| (*j, osfs[j])).collect();
            let p = match select_parent(osfs[id], &candidates) {
                ParentDecision::Parent(p) => Some(p),
                ParentDecision::SelfCh => None,
            };
            (*id, p)
        })
        .collect();

    let mut forest = ClusterForest::from_parents(&parents, osfs);
    assign_backups(&mut forest, adjacency);
    ClusterRound { forest, charges, retained: retained_sets }
}

/// OSF of every node in `members` with the neighbor universe restricted to
/// the other members: no MED filter, no range limit.
pub fn osf_within(members: &[UavState], w: &OsfWeights, degree_ref: f64) -> BTreeMap<NodeId, f64> {
    members
        .iter()
        .map(|me| {
            let others: Vec<NeighborRecord> =
                members.iter().filter(|o| o.id != me.id).map(|o| NeighborRecord::from_beacon(me, o)).collect();
            let diffs = pairwise_diffs(me, &others);
            let retained: BTreeSet<NodeId> = others.iter().map(|n| n.neighbor_id).collect();
            let distances: BTreeMap<NodeId, f64> = others.iter().map(|n| (n.neighbor_id, n.distance)).collect();
            (me.id, osf(&retained, &diffs, &distances, w, degree_ref))
        })
        .collect()
}
