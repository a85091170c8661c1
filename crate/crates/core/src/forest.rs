//! The parent-pointer cluster forest shared by every clustering algorithm.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::comms::Adjacency;
use crate::model::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Role {
    Ch,
    Cm,
    Bkch,
}

/// Roles, parent edges and cluster membership of one clustering outcome.
///
/// `parent` and `bkch_of` are the source of truth; `role` and `cluster_of` are
/// derived from them by [`ClusterForest::normalize`]. `score` holds the value
/// each node was ranked by (OSF for SEFC, score/priority for the baselines).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ClusterForest {
    pub role: BTreeMap<NodeId, Role>,
    pub parent: BTreeMap<NodeId, NodeId>,
    pub cluster_of: BTreeMap<NodeId, NodeId>,
    pub bkch_of: BTreeMap<NodeId, NodeId>,
    pub score: BTreeMap<NodeId, f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ForestViolation {
    #[error("node {0} has no role")]
    MissingRole(NodeId),
    #[error("node {node} points at parent {parent} which is not in the forest")]
    DanglingParent { node: NodeId, parent: NodeId },
    #[error("node {0} has role CH but also a parent")]
    HeadWithParent(NodeId),
    #[error("node {0} has no parent but is not a CH")]
    RootNotHead(NodeId),
    #[error("parent chain from {0} does not terminate")]
    Cycle(NodeId),
    #[error("node {node} records cluster {recorded} but its chain ends at {root}")]
    WrongCluster { node: NodeId, recorded: NodeId, root: NodeId },
    #[error("BKCH {bkch} of {ch} is invalid: {why}")]
    BadBackup { ch: NodeId, bkch: NodeId, why: &'static str },
    #[error("node {0} has role BKCH but is nobody's backup")]
    StrayBackup(NodeId),
    #[error("edge {child} -> {parent} does not strictly increase the ranking score")]
    NonIncreasing { child: NodeId, parent: NodeId },
}

impl ClusterForest {
    /// Builds a forest from parent choices (`None` = self-elected CH) and scores.
    pub fn from_parents(parents: &BTreeMap<NodeId, Option<NodeId>>, score: BTreeMap<NodeId, f64>) -> Self {
        let mut f = ClusterForest {
            parent: parents.iter().filter_map(|(n, p)| p.map(|p| (*n, p))).collect(),
            role: parents.keys().map(|n| (*n, Role::Cm)).collect(),
            score,
            ..Default::default()
        };
        f.normalize();
        f
    }

    /// Singleton clusters for every node.
    pub fn singletons(nodes: impl IntoIterator<Item = NodeId>) -> Self {
        let mut f = ClusterForest::default();
        for n in nodes {
            f.role.insert(n, Role::Ch);
            f.score.insert(n, 0.0);
        }
        f.normalize();
        f
    }

    pub fn len(&self) -> usize {
        self.role.len()
    }

    pub fn is_empty(&self) -> bool {
        self.role.is_empty()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.role.contains_key(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.role.keys().copied()
    }

    pub fn parent_of(&self, id: NodeId) -> Option<NodeId> {
        self.parent.get(&id).copied()
    }

    pub fn role_of(&self, id: NodeId) -> Option<Role> {
        self.role.get(&id).copied()
    }

    pub fn cluster_heads(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.role.iter().filter(|(_, r)| **r == Role::Ch).map(|(n, _)| *n)
    }

    pub fn members_of(&self, ch: NodeId) -> Vec<NodeId> {
        self.cluster_of.iter().filter(|(_, c)| **c == ch).map(|(n, _)| *n).collect()
    }

    pub fn children_of(&self, id: NodeId) -> Vec<NodeId> {
        self.parent.iter().filter(|(_, p)| **p == id).map(|(n, _)| *n).collect()
    }

    /// Follows parent pointers; `None` if the chain does not terminate.
    pub fn root_of(&self, id: NodeId) -> Option<NodeId> {
        let mut cur = id;
        for _ in 0..=self.role.len() {
            match self.parent.get(&cur) {
                Some(p) => cur = *p,
                None => return Some(cur),
            }
        }
        None
    }

    /// Recomputes `role` and `cluster_of` from `parent` and `bkch_of`, dropping
    /// backups that are no longer one of their CH's cluster members.
    pub fn normalize(&mut self) {
        self.parent.retain(|n, p| self.role.contains_key(n) && self.role.contains_key(p));
        let nodes: Vec<NodeId> = self.role.keys().copied().collect();
        self.cluster_of.clear();
        for n in &nodes {
            let root = self.root_of(*n).unwrap_or(*n);
            self.cluster_of.insert(*n, root);
        }
        for n in &nodes {
            let r = if self.parent.contains_key(n) { Role::Cm } else { Role::Ch };
            self.role.insert(*n, r);
        }
        let cluster_of = &self.cluster_of;
        let parent = &self.parent;
        self.bkch_of.retain(|ch, b| !parent.contains_key(ch) && cluster_of.get(b) == Some(ch) && b != ch);
        for b in self.bkch_of.values() {
            self.role.insert(*b, Role::Bkch);
        }
    }

    pub fn set_backup(&mut self, ch: NodeId, bkch: Option<NodeId>) {
        if let Some(old) = self.bkch_of.remove(&ch) {
            if self.parent.contains_key(&old) {
                self.role.insert(old, Role::Cm);
            }
        }
        if let Some(b) = bkch {
            self.bkch_of.insert(ch, b);
            self.role.insert(b, Role::Bkch);
        }
    }

    /// Removes a node; its children become roots of their own clusters.
    pub fn remove_node(&mut self, id: NodeId) {
        self.role.remove(&id);
        self.score.remove(&id);
        self.parent.remove(&id);
        self.parent.retain(|_, p| *p != id);
        self.bkch_of.remove(&id);
        self.bkch_of.retain(|_, b| *b != id);
        self.normalize();
    }

    /// Overwrites the parent edges, backups and scores of every node in `fresh`
    /// with `fresh`'s. `fresh` should cover whole clusters of `self`, so no
    /// outside node is left pointing into the re-formed set.
    pub fn splice(&mut self, fresh: &ClusterForest) {
        for n in fresh.nodes() {
            self.parent.remove(&n);
            self.bkch_of.remove(&n);
            self.role.insert(n, Role::Cm);
        }
        for (n, p) in &fresh.parent {
            self.parent.insert(*n, *p);
        }
        for (c, b) in &fresh.bkch_of {
            self.bkch_of.insert(*c, *b);
        }
        for (n, s) in &fresh.score {
            self.score.insert(*n, *s);
        }
        self.normalize();
    }

    /// Structural invariants: every node has a role, CHs are exactly the roots,
    /// parent chains terminate, `cluster_of` is the chain root, and every backup
    /// is a member of its CH's cluster (and a one-hop neighbor, if `adjacency`
    /// is given).
    pub fn validate_structure(&self, adjacency: Option<&Adjacency>) -> Result<(), ForestViolation> {
        for (n, p) in &self.parent {
            if !self.role.contains_key(p) {
                return Err(ForestViolation::DanglingParent { node: *n, parent: *p });
            }
        }
        for (n, role) in &self.role {
            let has_parent = self.parent.contains_key(n);
            match role {
                Role::Ch if has_parent => return Err(ForestViolation::HeadWithParent(*n)),
                Role::Cm | Role::Bkch if !has_parent => return Err(ForestViolation::RootNotHead(*n)),
                _ => {}
            }
            let root = self.root_of(*n).ok_or(ForestViolation::Cycle(*n))?;
            let recorded = *self.cluster_of.get(n).ok_or(ForestViolation::MissingRole(*n))?;
            if recorded != root {
                return Err(ForestViolation::WrongCluster { node: *n, recorded, root });
            }
            if *role == Role::Bkch && !self.bkch_of.values().any(|b| b == n) {
                return Err(ForestViolation::StrayBackup(*n));
            }
        }
        for n in self.cluster_of.keys() {
            if !self.role.contains_key(n) {
                return Err(ForestViolation::MissingRole(*n));
            }
        }
        for (ch, b) in &self.bkch_of {
            let bad = |why| Err(ForestViolation::BadBackup { ch: *ch, bkch: *b, why });
            if self.role.get(ch) != Some(&Role::Ch) {
                return bad("owner is not a CH");
            }
            if self.role.get(b) != Some(&Role::Bkch) {
                return bad("backup does not hold the BKCH role");
            }
            if self.cluster_of.get(b) != Some(ch) {
                return bad("backup is outside the cluster");
            }
            if let Some(adj) = adjacency {
                if !adj.contains(*ch, *b) {
                    return bad("backup is not a one-hop neighbor of its CH");
                }
            }
        }
        Ok(())
    }

    /// Every parent edge strictly increases the ranking key `(score, lower id)`.
    pub fn validate_monotone(&self) -> Result<(), ForestViolation> {
        for (c, p) in &self.parent {
            let sc = self.score.get(c).copied().unwrap_or(f64::NAN);
            let sp = self.score.get(p).copied().unwrap_or(f64::NAN);
            if !(sp > sc || (sp == sc && p < c)) {
                return Err(ForestViolation::NonIncreasing { child: *c, parent: *p });
            }
        }
        Ok(())
    }

    pub fn validate(&self, adjacency: Option<&Adjacency>) -> Result<(), ForestViolation> {
        self.validate_structure(adjacency)?;
        self.validate_monotone()
    }
}

/// Index of the best entry under "higher score wins, lower id breaks ties".
pub fn argmax_by_score(items: impl IntoIterator<Item = (NodeId, f64)>) -> Option<(NodeId, f64)> {
    let mut best: Option<(NodeId, f64)> = None;
    for (id, s) in items {
        best = match best {
            None => Some((id, s)),
            Some((bid, bs)) if s > bs || (s == bs && id < bid) => Some((id, s)),
            keep => keep,
        };
    }
    best
}
