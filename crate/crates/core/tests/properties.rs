mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::*;
use fanet_core::baselines::{osca_lite_round, osca_promote, pica_lite_round, BaselineContext};
use fanet_core::comms::{compute_adjacency, route_packet, NetworkView};
use fanet_core::forest::Role;
use fanet_core::maintenance::{apply_handover, reevaluate_cluster_osf};
use fanet_core::metrics::*;
use fanet_core::mobility::{derive_acceleration, step_kinematics, MotionMemory};
use fanet_core::model::*;
use fanet_core::rng::{stream, Stream};
use fanet_core::sefc::{form_clusters, med, osf_terms, pairwise_diffs, similarity_set, NeighborRecord, SefcParams};
use proptest::prelude::*;

fn arb_vec(lo: f64, hi: f64) -> impl Strategy<Value = Vec3> {
    (lo..hi, lo..hi, lo..hi).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

/// Snapshots with mostly co-directional velocities so similarity sets are
/// non-trivial.
fn arb_snapshot(max_n: usize) -> impl Strategy<Value = Vec<UavState>> {
    prop::collection::vec(
        (arb_vec(0.0, 400.0), (5.0f64..30.0), arb_vec(-8.0, 8.0), arb_vec(-3.0, 3.0), 1.0f64..100.0),
        1..=max_n,
    )
    .prop_map(|raw| {
        raw.into_iter()
            .enumerate()
            .map(|(i, (p, s, dv, a, e))| UavState {
                id: NodeId(i as u32),
                position: Vec3::new(p.x, p.y, p.z / 4.0),
                velocity: Vec3::new(s, 0.0, 0.0) + dv,
                acceleration: a,
                energy: e,
            })
            .collect()
    })
}

fn params() -> SefcParams {
    SefcParams::from(&SimConfig::default())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    #[test]
    fn validation_is_idempotent(n in 0u32..300, thr in -0.5f64..1.5, cone in -1.5f64..1.5, dt in -0.1f64..2.0) {
        let raw = SimConfig { n_uavs: n, med_threshold: thr, direction_cos_threshold: cone, tick_dt: dt, ..Default::default() };
        match validate_config(raw.clone()) {
            Ok(c) => prop_assert_eq!(validate_config(c.clone()).unwrap(), c),
            Err(e) => prop_assert_eq!(validate_config(raw).unwrap_err(), e),
        }
    }

    #[test]
    fn kinematics_caps_and_containment(
        p in arb_vec(0.0, 200.0), v in arb_vec(-80.0, 80.0), seed in any::<u64>(),
        dt in 0.01f64..2.0, alpha in 0.0f64..=1.0, rwp in any::<bool>(),
    ) {
        let spec = MobilitySpec {
            model: if rwp { MobilityModel::RandomWaypoint } else { MobilityModel::GaussMarkov },
            gm_alpha: alpha,
            ..Default::default()
        };
        let arena = Arena { min: Vec3::ZERO, max: Vec3::new(200.0, 200.0, 200.0) };
        let mut s = UavState { id: NodeId(0), position: p, velocity: v.clamp_norm(spec.max_speed), acceleration: Vec3::ZERO, energy: 1.0 };
        let mut mem = MotionMemory::default();
        let mut rng = stream(seed, Stream::Mobility, 0);
        for _ in 0..20 {
            let prev = s;
            s = step_kinematics(&s, &spec, &arena, dt, &mut mem, &mut rng);
            prop_assert!(s.speed() <= spec.max_speed + 1e-9);
            prop_assert!(s.accel_magnitude() <= spec.max_accel + 1e-9);
            prop_assert!(arena.contains(s.position));
            prop_assert_eq!(s.energy, prev.energy);
        }
        let again = {
            let mut t = UavState { position: p, velocity: v.clamp_norm(spec.max_speed), acceleration: Vec3::ZERO, ..s };
            let mut mem = MotionMemory::default();
            let mut rng = stream(seed, Stream::Mobility, 0);
            for _ in 0..20 { t = step_kinematics(&t, &spec, &arena, dt, &mut mem, &mut rng); }
            t
        };
        prop_assert_eq!(again, s);
    }

    #[test]
    fn acceleration_is_componentwise(a in arb_vec(-100.0, 100.0), b in arb_vec(-100.0, 100.0), dt in 1e-3f64..10.0) {
        let got = derive_acceleration(a, b, dt).unwrap();
        for (g, w) in [(got.x, (b.x - a.x) / dt), (got.y, (b.y - a.y) / dt), (got.z, (b.z - a.z) / dt)] {
            prop_assert!((g - w).abs() <= 1e-12 * (1.0 + w.abs()));
        }
    }

    #[test]
    fn adjacency_equals_brute_force(nodes in arb_snapshot(50), range in 10.0f64..400.0) {
        let adj = compute_adjacency(&nodes, range);
        prop_assert_eq!(adjacency_edges(&adj), adjacency_oracle(&nodes, range));
        for a in adj.nodes() {
            prop_assert!(!adj.contains(a, a));
            for b in adj.neighbors(a) { prop_assert!(adj.contains(*b, a)); }
        }
    }

    #[test]
    fn unit_interval_bounds(nodes in arb_snapshot(12)) {
        let me = &nodes[0];
        let recs: Vec<NeighborRecord> = nodes[1..].iter().map(|o| NeighborRecord::from_beacon(me, o)).collect();
        let diffs = pairwise_diffs(me, &recs);
        let w = MedWeights::default();
        let meds: BTreeMap<NodeId, f64> = diffs.iter().map(|(j, d)| (*j, med(d, &w))).collect();
        for d in diffs.values() {
            for x in [d.sd, d.ad, d.ed] { prop_assert!((0.0..=1.0).contains(&x)); }
        }
        for m in meds.values() { prop_assert!((0.0..=1.0).contains(m)); }
        let kept = similarity_set(me, &recs, &meds, 0.5, 0.707);
        let dist: BTreeMap<NodeId, f64> = recs.iter().map(|r| (r.neighbor_id, r.distance)).collect();
        let t = osf_terms(&kept, &diffs, &dist, &OsfWeights::default(), 10.0);
        for x in [t.sd_av, t.ad_av, t.ed_av, t.d_av, t.degree, t.osf] { prop_assert!((0.0..=1.0).contains(&x)); }
    }

    #[test]
    fn forest_invariants_and_local_maxima(nodes in arb_snapshot(20)) {
        let adj = compute_adjacency(&nodes, 250.0);
        let round = form_clusters(&nodes, &adj, &params());
        let f = &round.forest;
        prop_assert!(f.validate(Some(&adj)).is_ok());
        for node in f.nodes() {
            let mut cur = node;
            let mut steps = 0;
            while let Some(p) = f.parent_of(cur) {
                prop_assert!(f.score[&p] > f.score[&cur]);
                cur = p;
                steps += 1;
                prop_assert!(steps <= nodes.len());
            }
            prop_assert_eq!(f.role_of(cur), Some(Role::Ch));
            let better = round.retained[&node].iter().any(|j| f.score[j] > f.score[&node] + 1e-12);
            prop_assert_eq!(f.role_of(node) == Some(Role::Ch), !better);
        }
    }

    #[test]
    fn relabeling_relabels_forest(nodes in arb_snapshot(12), k in 1u32..5, c in 0u32..100) {
        let adj = compute_adjacency(&nodes, 250.0);
        let f = form_clusters(&nodes, &adj, &params()).forest;
        let map = |id: NodeId| NodeId(id.0 * k + c);
        let moved: Vec<UavState> = nodes.iter().map(|s| UavState { id: map(s.id), ..*s }).collect();
        let g = form_clusters(&moved, &compute_adjacency(&moved, 250.0), &params()).forest;
        for n in f.nodes() {
            prop_assert_eq!(f.parent_of(n).map(map), g.parent_of(map(n)));
            prop_assert_eq!(f.role_of(n), g.role_of(map(n)));
        }
    }

    #[test]
    fn baselines_are_one_hop(nodes in arb_snapshot(20)) {
        let adj = compute_adjacency(&nodes, 250.0);
        let ctx = BaselineContext::from(&SimConfig::default());
        for f in [pica_lite_round(&nodes, &adj, &ctx).forest, osca_lite_round(&nodes, &adj, &ctx).forest] {
            prop_assert!(f.validate_structure(Some(&adj)).is_ok());
            for n in f.nodes() {
                if let Some(p) = f.parent_of(n) {
                    prop_assert_eq!(f.parent_of(p), None);
                    prop_assert!(adj.contains(n, p));
                }
            }
        }
    }

    #[test]
    fn osca_promotion_preserves_reachable_members(nodes in arb_snapshot(20), kill in 0usize..20) {
        let adj = compute_adjacency(&nodes, 250.0);
        let mut f = osca_lite_round(&nodes, &adj, &BaselineContext::from(&SimConfig::default())).forest;
        let victim = NodeId((kill % nodes.len()) as u32);
        let alive: BTreeSet<NodeId> = f.nodes().filter(|n| *n != victim).collect();
        let before = f.clone();
        let ev = osca_promote(&mut f, &alive, &adj);
        prop_assert!(f.validate_structure(Some(&adj)).is_ok());
        for e in &ev {
            for m in before.members_of(e.old_ch) {
                if m != e.new_ch && m != e.old_ch && alive.contains(&m) && adj.contains(e.new_ch, m) {
                    prop_assert_eq!(f.cluster_of[&m], e.new_ch);
                }
            }
        }
    }

    #[test]
    fn handover_keeps_membership(nodes in arb_snapshot(16), margin in 0.0f64..0.5) {
        let adj = compute_adjacency(&nodes, 250.0);
        let mut f = form_clusters(&nodes, &adj, &params()).forest;
        let by_id: BTreeMap<NodeId, UavState> = nodes.iter().map(|s| (s.id, *s)).collect();
        let heads: Vec<NodeId> = f.cluster_heads().collect();
        for ch in heads {
            let members = f.members_of(ch);
            let states: Vec<UavState> = members.iter().map(|m| by_id[m]).collect();
            let map = reevaluate_cluster_osf(&states, &OsfWeights::default(), 10.0);
            let before: BTreeSet<NodeId> = members.iter().copied().collect();
            if let Some(ev) = apply_handover(&mut f, ch, &map, margin, &adj) {
                prop_assert_eq!(f.members_of(ev.new_ch).into_iter().collect::<BTreeSet<_>>(), before);
                prop_assert!(ev.new_osf + 1e-12 >= ev.old_osf * (1.0 + margin));
            }
            prop_assert!(f.validate_structure(Some(&adj)).is_ok());
        }
    }

    #[test]
    fn lossless_delay_and_energy_conservation(nodes in arb_snapshot(20), seed in any::<u64>(), lossy in any::<bool>()) {
        let adj = compute_adjacency(&nodes, 250.0);
        let forest = form_clusters(&nodes, &adj, &params()).forest;
        let pos: BTreeMap<NodeId, Vec3> = nodes.iter().map(|s| (s.id, s.position)).collect();
        let net = NetworkView { positions: &pos, adjacency: &adj, forest: &forest };
        let radio = RadioConfig { loss_prob: if lossy { 0.4 } else { 0.0 }, ..Default::default() };
        let mut rng = stream(seed, Stream::RadioLoss, 0);
        for s in 0..nodes.len() as u32 {
            for d in 0..nodes.len() as u32 {
                if s == d { continue; }
                let o = route_packet(NodeId(s), NodeId(d), 1000.0, &net, &radio, &EnergyModel::default(), &mut rng).unwrap();
                let spent: f64 = o.energy_spent.values().sum();
                let logged: f64 = o.attempts.iter().map(|a| a.tx_joules + if a.link_up { a.rx_joules } else { 0.0 }).sum();
                prop_assert!((spent - logged).abs() <= 1e-12);
                if o.delivered {
                    prop_assert!(o.delay + 1e-12 >= o.hops as f64 * radio.per_hop_latency);
                    if !lossy {
                        prop_assert_eq!(o.retransmissions, 0);
                        prop_assert!((o.delay - o.hops as f64 * radio.per_hop_latency).abs() <= 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn metrics_are_order_invariant(
        delays in prop::collection::vec((any::<bool>(), 0.0f64..1.0), 0..40),
        tenures in prop::collection::vec((0u32..5, 0.0f64..50.0, prop::option::of(0.0f64..50.0)), 0..30),
        rot in 0usize..40,
    ) {
        let log: Vec<DeliveryRecord> = delays.iter().map(|(d, x)| DeliveryRecord {
            tick: 0, t: 0.0, src: NodeId(0), dst: NodeId(1),
            outcome: fanet_core::comms::DeliveryOutcome { delivered: *d, delay: *x, ..Default::default() },
        }).collect();
        let mut rotated = log.clone();
        if !rotated.is_empty() { let k = rot % rotated.len(); rotated.rotate_left(k); }
        let (a, b) = (avg_end_to_end_delay(&log), avg_end_to_end_delay(&rotated));
        prop_assert_eq!(a.is_some(), b.is_some());
        if let (Some(a), Some(b)) = (a, b) { prop_assert!((a - b).abs() <= 1e-12); }

        let roles: Vec<RoleInterval> = tenures.iter().map(|(n, s, e)| RoleInterval {
            node: NodeId(*n), role: Role::Ch, t_start: *s, t_end: e.map(|e| e.max(*s)),
        }).collect();
        let mut rev = roles.clone();
        rev.reverse();
        let (a, b) = (avg_ch_duration(&roles, 60.0), avg_ch_duration(&rev, 60.0));
        if let (Some(a), Some(b)) = (a, b) { prop_assert!((a - b).abs() <= 1e-9); }
    }

    #[test]
    fn small_runs_are_valid(seed in any::<u64>(), n in 1u32..15, alg in 0usize..3, rwp in any::<bool>()) {
        let mut cfg = SimConfig { n_uavs: n, sim_duration: 12.0, seed, algorithm: Algorithm::ALL[alg], ..Default::default() };
        if rwp { cfg.mobility.model = MobilityModel::RandomWaypoint; }
        cfg.gs.duty_cycle = 1.0;
        let art = fanet_core::run_simulation(&cfg).unwrap();
        prop_assert!(art.checks.violations.is_empty(), "{:?}", art.checks.violations);
        prop_assert!(art.checks.rounds_checked >= 1);
        let again = fanet_core::run_simulation(&cfg).unwrap();
        prop_assert_eq!(
            fanet_core::trace::trace_to_string(&art.trace()),
            fanet_core::trace::trace_to_string(&again.trace())
        );
    }
}

#[test]
fn singleton_run_is_one_tenure() {
    let cfg = SimConfig { n_uavs: 1, sim_duration: 30.0, ..Default::default() };
    let art = fanet_core::run_simulation(&cfg).unwrap();
    let ch: Vec<_> = art.role_log.iter().filter(|r| r.role == Role::Ch).collect();
    assert_eq!(ch.len(), 1);
    assert_eq!(art.role_log.len(), 1);
    assert_eq!(avg_ch_duration(&art.role_log, art.sim_end), Some(art.sim_end));
    assert!(art.delivery_log.is_empty());
    let e: Vec<f64> = art.energy_log.samples.iter().map(|s| s.residual[0]).collect();
    assert!(e.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn zero_duration_has_no_metrics() {
    let cfg = SimConfig { n_uavs: 5, sim_duration: 0.0, ..Default::default() };
    let art = fanet_core::run_simulation(&cfg).unwrap();
    assert!(art.delivery_log.is_empty() && art.role_log.is_empty() && art.membership_log.is_empty());
    let s = art.summary;
    assert_eq!((s.avg_delay, s.avg_energy, s.avg_ch_duration, s.avg_cm_switches), (None, None, None, None));
}

#[test]
fn random_snapshots_match_cluster_oracle() {
    use rand::Rng;
    let cfg = SimConfig::default();
    let p = OracleParams {
        range: 250.0,
        med_w: cfg.med_weights,
        osf_w: cfg.osf_weights,
        threshold: cfg.med_threshold,
        cone: cfg.direction_cos_threshold,
        degree_ref: cfg.degree_ref,
    };
    let mut rng = stream(2024, Stream::Init, 1);
    for _ in 0..200 {
        let n = rng.random_range(1..=12);
        let nodes: Vec<UavState> = (0..n)
            .map(|i| uav(
                i,
                [rng.random::<f64>() * 400.0, rng.random::<f64>() * 400.0, rng.random::<f64>() * 100.0],
                [15.0 + rng.random::<f64>() * 10.0, rng.random::<f64>() * 8.0 - 4.0, 0.0],
                [rng.random::<f64>() * 3.0, 0.0, 0.0],
                1.0 + rng.random::<f64>() * 99.0,
            ))
            .collect();
        let adj = compute_adjacency(&nodes, 250.0);
        let f = form_clusters(&nodes, &adj, &SefcParams::from(&cfg)).forest;
        forest_matches(&f, &cluster_oracle(&nodes, &p), 1e-9).unwrap();
    }
}
