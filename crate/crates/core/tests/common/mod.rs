//! Independent reference implementations used as test oracles. They work on
//! plain slices and recompute everything from scratch, sharing no helpers
//! with the library beyond its data types.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use fanet_core::comms::{Adjacency, DeliveryOutcome};
use fanet_core::forest::{ClusterForest, Role};
use fanet_core::metrics::{DeliveryRecord, EnergyLog, MembershipChange, RoleInterval};
use fanet_core::model::{Arena, MedWeights, MobilitySpec, NodeId, OsfWeights, UavState, Vec3};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn uav(id: u32, p: [f64; 3], v: [f64; 3], a: [f64; 3], e: f64) -> UavState {
    UavState {
        id: NodeId(id),
        position: Vec3::new(p[0], p[1], p[2]),
        velocity: Vec3::new(v[0], v[1], v[2]),
        acceleration: Vec3::new(a[0], a[1], a[2]),
        energy: e,
    }
}

fn len3(v: Vec3) -> f64 {
    (v.x * v.x + v.y * v.y + v.z * v.z).sqrt()
}

fn dist3(a: Vec3, b: Vec3) -> f64 {
    let (dx, dy, dz) = (a.x - b.x, a.y - b.y, a.z - b.z);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

fn div0(n: f64, d: f64) -> f64 {
    if d == 0.0 {
        0.0
    } else {
        n / d
    }
}

// ---------------------------------------------------------------- adjacency

pub fn adjacency_oracle(states: &[UavState], range: f64) -> BTreeSet<(NodeId, NodeId)> {
    let mut e = BTreeSet::new();
    for a in states {
        for b in states {
            if a.id != b.id && dist3(a.position, b.position) <= range {
                e.insert((a.id, b.id));
            }
        }
    }
    e
}

pub fn adjacency_edges(adj: &Adjacency) -> BTreeSet<(NodeId, NodeId)> {
    adj.nodes().flat_map(|a| adj.neighbors(a).iter().map(move |b| (a, *b))).collect()
}

// ---------------------------------------------------------------- radio

pub fn radio_oracle(tx: bool, bits: f64, d: f64, e_elec: f64, e_amp: f64) -> f64 {
    let base = bits * e_elec;
    if tx {
        base + bits * d.powi(2) * e_amp
    } else {
        base
    }
}

// ---------------------------------------------------------------- SEFC

/// Diff table of `nodes[i]` against each `nodes[j]` in `nbrs`, two passes:
/// maxima first, then ratios.
pub fn diff_oracle(me: &UavState, nbrs: &[&UavState]) -> BTreeMap<NodeId, (f64, f64, f64)> {
    let mut sd_max = 0.0f64;
    let mut ad_max = 0.0f64;
    let mut ed_max = 0.0f64;
    for n in nbrs {
        sd_max = sd_max.max((len3(me.velocity) - len3(n.velocity)).abs());
        ad_max = ad_max.max((len3(me.acceleration) - len3(n.acceleration)).abs());
        ed_max = ed_max.max(if n.energy > me.energy { n.energy - me.energy } else { 0.0 });
    }
    let mut out = BTreeMap::new();
    for n in nbrs {
        let sd = div0((len3(me.velocity) - len3(n.velocity)).abs(), sd_max);
        let ad = div0((len3(me.acceleration) - len3(n.acceleration)).abs(), ad_max);
        let ed = div0(if n.energy > me.energy { n.energy - me.energy } else { 0.0 }, ed_max);
        out.insert(n.id, (sd, ad, ed));
    }
    out
}

pub fn med_oracle(d: (f64, f64, f64), w: &MedWeights) -> f64 {
    w.c1 * d.0 + w.c2 * d.1 + w.c3 * (1.0 - d.2)
}

pub fn heading_ok(a: Vec3, b: Vec3, cone: f64) -> bool {
    let (la, lb) = (len3(a), len3(b));
    if la == 0.0 || lb == 0.0 {
        return true;
    }
    (a.x * b.x + a.y * b.y + a.z * b.z) / (la * lb) >= cone
}

pub fn filter_oracle(
    me: &UavState,
    nbrs: &[&UavState],
    meds: &BTreeMap<NodeId, f64>,
    threshold: f64,
    cone: f64,
) -> BTreeSet<NodeId> {
    nbrs.iter().filter(|n| meds[&n.id] < threshold && heading_ok(me.velocity, n.velocity, cone)).map(|n| n.id).collect()
}

/// The five OSF terms (sd_av, ad_av, ed_av, d_av, degree) and the weighted sum.
pub fn osf_oracle(
    me: &UavState,
    retained: &[&UavState],
    diffs: &BTreeMap<NodeId, (f64, f64, f64)>,
    w: &OsfWeights,
    degree_ref: f64,
) -> ([f64; 5], f64) {
    if retained.is_empty() {
        return ([0.0; 5], 0.0);
    }
    let d = retained.len() as f64;
    let dmax = retained.iter().map(|n| dist3(me.position, n.position)).fold(0.0, f64::max);
    let mut t = [0.0; 5];
    for n in retained {
        let (sd, ad, ed) = diffs[&n.id];
        t[0] += 1.0 - sd;
        t[1] += 1.0 - ad;
        t[2] += ed;
        t[3] += 1.0 - div0(dist3(me.position, n.position), dmax);
    }
    for x in t.iter_mut().take(4) {
        *x /= d;
    }
    t[4] = if d >= degree_ref { 1.0 } else { d / degree_ref };
    let osf = w.alpha * t[0] + w.beta * t[1] + w.gamma * t[2] + w.delta * t[3] + w.epsilon * t[4];
    (t, osf)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCluster {
    pub parent: BTreeMap<NodeId, Option<NodeId>>,
    pub role: BTreeMap<NodeId, Role>,
    pub cluster_of: BTreeMap<NodeId, NodeId>,
    pub bkch: BTreeMap<NodeId, NodeId>,
    pub osf: BTreeMap<NodeId, f64>,
    pub med: BTreeMap<(NodeId, NodeId), f64>,
    pub retained: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

pub struct OracleParams {
    pub range: f64,
    pub med_w: MedWeights,
    pub osf_w: OsfWeights,
    pub threshold: f64,
    pub cone: f64,
    pub degree_ref: f64,
}

/// Per-node re-execution of the whole round: neighbors by brute-force range
/// check, diffs, MED, filter, OSF, then parent choice, roots and backups.
pub fn cluster_oracle(nodes: &[UavState], p: &OracleParams) -> OracleCluster {
    let mut nodes: Vec<&UavState> = nodes.iter().collect();
    nodes.sort_by_key(|n| n.id);
    let nbrs_of = |me: &UavState| -> Vec<&UavState> {
        nodes.iter().copied().filter(|n| n.id != me.id && dist3(me.position, n.position) <= p.range).collect()
    };

    let mut osf = BTreeMap::new();
    let mut med = BTreeMap::new();
    let mut retained = BTreeMap::new();
    for me in &nodes {
        let nb = nbrs_of(me);
        let diffs = diff_oracle(me, &nb);
        let meds: BTreeMap<NodeId, f64> = diffs.iter().map(|(j, d)| (*j, med_oracle(*d, &p.med_w))).collect();
        for (j, m) in &meds {
            med.insert((me.id, *j), *m);
        }
        let keep = filter_oracle(me, &nb, &meds, p.threshold, p.cone);
        let kept: Vec<&UavState> = nb.iter().copied().filter(|n| keep.contains(&n.id)).collect();
        osf.insert(me.id, osf_oracle(me, &kept, &diffs, &p.osf_w, p.degree_ref).1);
        retained.insert(me.id, keep);
    }

    let mut parent = BTreeMap::new();
    for me in &nodes {
        let mine = osf[&me.id];
        let mut best: Option<NodeId> = None;
        for j in &retained[&me.id] {
            if osf[j] > mine + 1e-12 {
                best = match best {
                    Some(b) if osf[&b] > osf[j] || (osf[&b] == osf[j] && b < *j) => Some(b),
                    _ => Some(*j),
                };
            }
        }
        parent.insert(me.id, best);
    }

    let mut cluster_of = BTreeMap::new();
    for me in &nodes {
        let mut cur = me.id;
        let mut steps = 0;
        while let Some(Some(p)) = parent.get(&cur) {
            cur = *p;
            steps += 1;
            assert!(steps <= nodes.len(), "oracle found a cycle");
        }
        cluster_of.insert(me.id, cur);
    }

    let mut role: BTreeMap<NodeId, Role> =
        nodes.iter().map(|n| (n.id, if parent[&n.id].is_none() { Role::Ch } else { Role::Cm })).collect();
    let mut bkch = BTreeMap::new();
    for ch in nodes.iter().filter(|n| parent[&n.id].is_none()) {
        let mut best: Option<NodeId> = None;
        for m in nbrs_of(ch) {
            if cluster_of[&m.id] != ch.id {
                continue;
            }
            best = match best {
                Some(b) if osf[&b] > osf[&m.id] || (osf[&b] == osf[&m.id] && b < m.id) => Some(b),
                _ => Some(m.id),
            };
        }
        if let Some(b) = best {
            bkch.insert(ch.id, b);
            role.insert(b, Role::Bkch);
        }
    }
    OracleCluster { parent, role, cluster_of, bkch, osf, med, retained }
}

/// Compares a library forest against the oracle: structure exactly, scores
/// to `tol`. Returns a description of the first mismatch.
pub fn forest_matches(f: &ClusterForest, o: &OracleCluster, tol: f64) -> Result<(), String> {
    for (n, p) in &o.parent {
        if f.parent_of(*n) != *p {
            return Err(format!("parent of {n}: lib {:?} oracle {:?}", f.parent_of(*n), p));
        }
        if f.role_of(*n) != Some(o.role[n]) {
            return Err(format!("role of {n}: lib {:?} oracle {:?}", f.role_of(*n), o.role[n]));
        }
        if f.cluster_of.get(n) != Some(&o.cluster_of[n]) {
            return Err(format!("cluster of {n}"));
        }
        let s = f.score.get(n).copied().unwrap_or(f64::NAN);
        if !((s - o.osf[n]).abs() <= tol) {
            return Err(format!("osf of {n}: lib {s} oracle {}", o.osf[n]));
        }
    }
    if f.len() != o.parent.len() {
        return Err("node count".into());
    }
    if f.bkch_of != o.bkch {
        return Err(format!("backups: lib {:?} oracle {:?}", f.bkch_of, o.bkch));
    }
    Ok(())
}

// ---------------------------------------------------------------- mobility

fn bounce(x: f64, lo: f64, hi: f64) -> (f64, bool) {
    let (mut x, mut flipped) = (x, false);
    while x < lo || x > hi {
        x = if x < lo { lo + (lo - x) } else { hi - (x - hi) };
        flipped = !flipped;
    }
    (x, flipped)
}

/// Straight-line Gauss-Markov recurrence over `ticks` steps with the same
/// three normal draws per tick, returning every intermediate state.
pub fn gm_oracle<R: Rng>(start: UavState, s: &MobilitySpec, arena: &Arena, dt: f64, ticks: usize, rng: &mut R) -> Vec<UavState> {
    let mut out = Vec::with_capacity(ticks);
    let mut cur = start;
    for _ in 0..ticks {
        let w = [rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)];
        let v = [cur.velocity.x, cur.velocity.y, cur.velocity.z];
        let speed = len3(cur.velocity);
        let k = (1.0 - s.gm_alpha * s.gm_alpha).sqrt() * s.gm_sigma;
        let mut target = [0.0; 3];
        for i in 0..3 {
            let mean = if speed > 0.0 { v[i] / speed * s.gm_mean_speed } else { 0.0 };
            target[i] = s.gm_alpha * v[i] + (1.0 - s.gm_alpha) * mean + k * w[i];
        }
        let mut dv = [target[0] - v[0], target[1] - v[1], target[2] - v[2]];
        let dvn = (dv[0] * dv[0] + dv[1] * dv[1] + dv[2] * dv[2]).sqrt();
        if dvn > s.max_accel * dt {
            let f = s.max_accel * dt / dvn;
            dv = [dv[0] * f, dv[1] * f, dv[2] * f];
        }
        let mut vn = [v[0] + dv[0], v[1] + dv[1], v[2] + dv[2]];
        let vnn = (vn[0] * vn[0] + vn[1] * vn[1] + vn[2] * vn[2]).sqrt();
        if vnn > s.max_speed {
            let f = s.max_speed / vnn;
            vn = [vn[0] * f, vn[1] * f, vn[2] * f];
        }
        let acc = [(vn[0] - v[0]) / dt, (vn[1] - v[1]) / dt, (vn[2] - v[2]) / dt];
        let p = [cur.position.x, cur.position.y, cur.position.z];
        let (lo, hi) = ([arena.min.x, arena.min.y, arena.min.z], [arena.max.x, arena.max.y, arena.max.z]);
        let mut np = [0.0; 3];
        for i in 0..3 {
            let (x, flip) = bounce(p[i] + vn[i] * dt, lo[i], hi[i]);
            np[i] = x;
            if flip {
                vn[i] = -vn[i];
            }
        }
        cur = UavState {
            position: Vec3::new(np[0], np[1], np[2]),
            velocity: Vec3::new(vn[0], vn[1], vn[2]),
            acceleration: Vec3::new(acc[0], acc[1], acc[2]),
            ..cur
        };
        out.push(cur);
    }
    out
}

// ---------------------------------------------------------------- routing

/// Undirected tree path between two nodes of the same cluster by walking
/// both ancestor lists.
fn tree_path(f: &ClusterForest, a: NodeId, b: NodeId) -> Vec<NodeId> {
    let anc = |mut x: NodeId| {
        let mut v = vec![x];
        while let Some(p) = f.parent.get(&x) {
            v.push(*p);
            x = *p;
        }
        v
    };
    let (ua, ub) = (anc(a), anc(b));
    for (i, x) in ua.iter().enumerate() {
        if let Some(j) = ub.iter().position(|y| y == x) {
            let mut p = ua[..=i].to_vec();
            p.extend(ub[..j].iter().rev());
            return p;
        }
    }
    unreachable!("same cluster")
}

/// Path a packet takes, by exhaustive scan of every CH at each overlay step.
pub fn route_path_oracle(
    f: &ClusterForest,
    pos: &BTreeMap<NodeId, Vec3>,
    range: f64,
    src: NodeId,
    dst: NodeId,
) -> Option<Vec<NodeId>> {
    let (cs, cd) = (f.cluster_of[&src], f.cluster_of[&dst]);
    if cs == cd {
        return Some(tree_path(f, src, dst));
    }
    let near = |a: NodeId, b: NodeId| a != b && dist3(pos[&a], pos[&b]) <= range;
    let mut path = tree_path(f, src, cs);
    let mut cur = cs;
    while cur != cd {
        let here = dist3(pos[&cur], pos[&cd]);
        let mut best: Option<(f64, NodeId, Option<NodeId>)> = None;
        for (ch, r) in &f.role {
            if *r != Role::Ch || *ch == cur {
                continue;
            }
            let via = if near(cur, *ch) {
                Some(None)
            } else {
                pos.keys().copied().find(|g| near(*g, cur) && near(*g, *ch)).map(Some)
            };
            let Some(via) = via else { continue };
            let d = dist3(pos[ch], pos[&cd]);
            if best.is_none_or(|(bd, bid, _)| d < bd || (d == bd && *ch < bid)) {
                best = Some((d, *ch, via));
            }
        }
        let (d, next, via) = best?;
        if d >= here {
            return None;
        }
        path.extend(via);
        path.push(next);
        cur = next;
    }
    let tail = tree_path(f, cd, dst);
    path.extend(tail.into_iter().skip(1));
    Some(path)
}

pub struct RadioReplay {
    pub loss: f64,
    pub retx: u32,
    pub latency: f64,
    pub e_elec: f64,
    pub e_amp: f64,
}

/// Replays the per-attempt draws along the oracle path.
pub fn route_oracle<R: Rng>(
    f: &ClusterForest,
    pos: &BTreeMap<NodeId, Vec3>,
    range: f64,
    src: NodeId,
    dst: NodeId,
    bits: f64,
    r: &RadioReplay,
    rng: &mut R,
) -> DeliveryOutcome {
    let mut out = DeliveryOutcome::default();
    let Some(path) = route_path_oracle(f, pos, range, src, dst) else { return out };
    let mut tries = 0;
    for w in path.windows(2) {
        let d = dist3(pos[&w[0]], pos[&w[1]]);
        let up = d <= range;
        let mut done = false;
        for _ in 0..=r.retx {
            let u: f64 = rng.random();
            tries += 1;
            out.delay += r.latency;
            *out.energy_spent.entry(w[0]).or_default() += radio_oracle(true, bits, d, r.e_elec, r.e_amp);
            if up {
                *out.energy_spent.entry(w[1]).or_default() += radio_oracle(false, bits, d, r.e_elec, r.e_amp);
            }
            if up && u >= r.loss {
                done = true;
                break;
            }
        }
        if !done {
            return out;
        }
        out.hops += 1;
    }
    out.delivered = true;
    out.retransmissions = tries - out.hops;
    out
}

// ---------------------------------------------------------------- baselines

/// Local-maximum one-hop clustering replayed from the rule text. `safe` is
/// the minimum link length considered (0 for OSCA).
pub fn one_hop_oracle(states: &[UavState], range: f64, score: &BTreeMap<NodeId, f64>, safe: f64) -> (BTreeMap<NodeId, Option<NodeId>>, BTreeMap<NodeId, NodeId>) {
    let pos: BTreeMap<NodeId, Vec3> = states.iter().map(|s| (s.id, s.position)).collect();
    let eligible = |i: NodeId| -> Vec<NodeId> {
        pos.keys().copied().filter(|j| *j != i && dist3(pos[&i], pos[j]) <= range && dist3(pos[&i], pos[j]) >= safe).collect()
    };
    let better = |a: NodeId, b: NodeId| score[&a] > score[&b] || (score[&a] == score[&b] && a < b);
    let heads: BTreeSet<NodeId> = pos.keys().copied().filter(|i| eligible(*i).iter().all(|j| better(*i, *j))).collect();
    let mut parent = BTreeMap::new();
    for i in pos.keys() {
        if heads.contains(i) {
            parent.insert(*i, None);
            continue;
        }
        let mut best: Option<NodeId> = None;
        for j in eligible(*i) {
            if heads.contains(&j) && best.is_none_or(|b| better(j, b)) {
                best = Some(j);
            }
        }
        parent.insert(*i, best);
    }
    let mut bk = BTreeMap::new();
    for ch in pos.keys().filter(|i| parent[*i].is_none()) {
        let mut best: Option<NodeId> = None;
        for m in pos.keys() {
            if parent[m] == Some(*ch) && dist3(pos[ch], pos[m]) <= range && best.is_none_or(|b| better(*m, b)) {
                best = Some(*m);
            }
        }
        if let Some(b) = best {
            bk.insert(*ch, b);
        }
    }
    (parent, bk)
}

pub fn pica_score_oracle(states: &[UavState], range: f64, max_speed: f64, wm: f64, we: f64) -> BTreeMap<NodeId, f64> {
    states
        .iter()
        .map(|me| {
            let nb: Vec<&UavState> = states.iter().filter(|o| o.id != me.id && dist3(me.position, o.position) <= range).collect();
            let rel = if nb.is_empty() {
                0.0
            } else {
                nb.iter().map(|o| len3(me.velocity - o.velocity)).sum::<f64>() / nb.len() as f64 / (2.0 * max_speed)
            };
            let emax = nb.iter().map(|o| o.energy).fold(me.energy, f64::max);
            (me.id, wm * (1.0 - rel.min(1.0)) + we * div0(me.energy, emax))
        })
        .collect()
}

pub fn osca_priority_oracle(states: &[UavState], range: f64, degree_ref: f64, wd: f64, we: f64) -> BTreeMap<NodeId, f64> {
    states
        .iter()
        .map(|me| {
            let nb: Vec<&UavState> = states.iter().filter(|o| o.id != me.id && dist3(me.position, o.position) <= range).collect();
            let emax = nb.iter().map(|o| o.energy).fold(me.energy, f64::max);
            (me.id, wd * (nb.len() as f64 / degree_ref).min(1.0) + we * div0(me.energy, emax))
        })
        .collect()
}

// ---------------------------------------------------------------- metrics

pub fn delay_oracle(log: &[DeliveryRecord]) -> Option<f64> {
    let ds: Vec<f64> = log.iter().filter(|r| r.outcome.delivered).map(|r| r.outcome.delay).collect();
    if ds.is_empty() {
        None
    } else {
        Some(ds.iter().sum::<f64>() / ds.len() as f64)
    }
}

pub fn energy_oracle(log: &EnergyLog, n: usize) -> f64 {
    let Some(last) = log.samples.last() else { return 0.0 };
    let mut total = 0.0;
    for i in 0..log.initial.len() {
        total += log.initial[i] - last.residual[i];
    }
    total / n as f64
}

pub fn ch_duration_oracle(log: &[RoleInterval], end: f64) -> Option<f64> {
    let mut n = 0usize;
    let mut s = 0.0;
    for r in log {
        if r.role == Role::Ch {
            n += 1;
            s += match r.t_end {
                Some(e) => e,
                None => end,
            } - r.t_start;
        }
    }
    if n == 0 {
        None
    } else {
        Some(s / n as f64)
    }
}

pub fn switch_count_oracle(log: &[MembershipChange]) -> usize {
    let mut c = 0;
    for m in log {
        if m.old_cluster != m.new_cluster {
            c += 1;
        }
    }
    c
}

// ---------------------------------------------------------------- traces

/// The five summary numbers recomputed from a trace's raw records alone:
/// (delay, delivery ratio, energy, CH duration, switches).
pub fn metrics_from_trace(
    records: &[fanet_core::trace::TraceRecord],
) -> (Option<f64>, Option<f64>, Option<f64>, Option<f64>, Option<f64>) {
    use fanet_core::trace::TraceRecord as R;
    let (mut n, mut initial, mut dt) = (0usize, Vec::new(), 0.0);
    let (mut sent, mut ok, mut delay) = (0usize, 0usize, 0.0);
    let (mut tenures, mut tenure_sum) = (0usize, 0.0);
    let mut switches = 0usize;
    let mut last_residual: Option<Vec<f64>> = None;
    let mut end_tick = 0u64;
    let mut open: Vec<f64> = Vec::new();
    for r in records {
        match r {
            R::Header { n_uavs, initial_energy, tick_dt, .. } => {
                n = *n_uavs as usize;
                initial = initial_energy.clone();
                dt = *tick_dt;
            }
            R::Delivery { delivered, delay: d, .. } => {
                sent += 1;
                if *delivered {
                    ok += 1;
                    delay += d;
                }
            }
            R::Membership { old_cluster, new_cluster, .. } if old_cluster != new_cluster => switches += 1,
            R::Energy { residual, .. } => last_residual = Some(residual.clone()),
            R::RoleInterval { role: Role::Ch, t_start, t_end, .. } => match t_end {
                Some(e) => {
                    tenures += 1;
                    tenure_sum += e - t_start;
                }
                None => open.push(*t_start),
            },
            R::Summary { tick, .. } => end_tick = *tick,
            _ => {}
        }
    }
    let end = end_tick as f64 * dt;
    for s in open {
        tenures += 1;
        tenure_sum += end - s;
    }
    let energy = last_residual.map(|r| initial.iter().zip(&r).map(|(a, b)| a - b).sum::<f64>() / n as f64);
    (
        (ok > 0).then(|| delay / ok as f64),
        (sent > 0).then(|| ok as f64 / sent as f64),
        energy,
        (tenures > 0).then(|| tenure_sum / tenures as f64),
        (n > 0 && end_tick > 0).then(|| switches as f64 / n as f64),
    )
}
