mod common;

use std::collections::HashSet;
use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vamsim::baselines::{AlertController, AlertParams, CentralizedController};
use vamsim::comms::{make_beacon, update_neighbor_table, BeaconMessage, CommsParams, NeighborTable};
use vamsim::control::{ControlPlane, DlrParams, SignalPlan, SignalSettings};
use vamsim::network::{
    free_flow_cost, generate_grid, optional_routes, shortest_route, EdgeId, GridSpec, IntersectionId, Point, RoadNetwork,
    RouteCache,
};
use vamsim::routing::{estimate_route, RoutingParams, TrafficView, VamController};
use vamsim::traffic::{CostModelParams, TripSpec, VehicleId, VehicleState, World};

fn grid(rows: u32, cols: u32, lanes: u32, signalized: bool) -> Arc<RoadNetwork> {
    Arc::new(generate_grid(&GridSpec { signalized, ..GridSpec::new(rows, cols, 200.0, lanes, 10.0) }).unwrap())
}

/// Random trips with alternatives, departures over the first 100 ticks.
fn populate(net: &Arc<RoadNetwork>, vehicles: u32, seed: u64) -> World {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = World::new(net.clone(), CostModelParams::default(), 1.0).unwrap();
    let n = net.node_count() as u32;
    for _ in 0..vehicles {
        let o = rng.random_range(0..n);
        let d = (o + rng.random_range(1..n)) % n;
        let (o, d) = (IntersectionId(o), IntersectionId(d));
        let best = shortest_route(net, o, d, free_flow_cost).unwrap();
        let alts = optional_routes(net, o, d, 2, free_flow_cost).unwrap();
        w.add_vehicle(TripSpec { origin: o, destination: d, departure: rng.random_range(0..100) }, best, alts).unwrap();
    }
    w
}

fn check_world(w: &World) -> Result<(), TestCaseError> {
    prop_assert!(w.census().conserved());
    w.check_edge_counts().map_err(TestCaseError::fail)?;
    for v in w.vehicles() {
        prop_assert_eq!(v.arrived_at.is_some(), v.state == VehicleState::Arrived);
        if let Some((e, p)) = v.position() {
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!(v.current_route.edges.contains(&e));
        }
    }
    for es in w.edge_states() {
        let storage = w.network().edge(es.edge).unwrap().per_lane_capacity * es.lanes;
        prop_assert!(es.count <= storage);
    }
    Ok(())
}

proptest! {
    #[test]
    fn grid_network_is_well_formed(rows in 2u32..7, cols in 2u32..7, lanes in 1u32..4) {
        let net = grid(rows, cols, lanes, true);
        let ids: HashSet<_> = net.intersections().iter().map(|i| i.id).collect();
        prop_assert_eq!(ids.len(), net.node_count());
        let edge_ids: HashSet<_> = net.edges().iter().map(|e| e.id).collect();
        prop_assert_eq!(edge_ids.len(), net.edge_count());
        for i in net.intersections() {
            prop_assert!(i.position.x.is_finite() && i.position.y.is_finite());
        }
        for (slot, e) in net.edges().iter().enumerate() {
            prop_assert_ne!(e.from, e.to);
            prop_assert!(e.free_flow_time() > 0.0);
            let from = net.node_slot(e.from).unwrap();
            prop_assert!(net.outgoing_slots(from).contains(&slot));
            prop_assert!(net.incoming_slots(net.node_slot(e.to).unwrap()).contains(&slot));
            let dual = net.edge(e.dual.unwrap()).unwrap();
            prop_assert_eq!(dual.dual, Some(e.id));
            prop_assert_eq!((dual.from, dual.to), (e.to, e.from));
        }
    }

    #[test]
    fn generated_routes_are_contiguous_and_loop_free(seed in 0u64..5000) {
        let net = common::random_graph(seed);
        for o in net.intersections() {
            for d in net.intersections() {
                if o.id == d.id {
                    continue;
                }
                let Ok(best) = shortest_route(&net, o.id, d.id, free_flow_cost) else { continue };
                for r in std::iter::once(best).chain(optional_routes(&net, o.id, d.id, 3, free_flow_cost).unwrap()) {
                    prop_assert!(r.validate(&net).is_ok());
                    prop_assert!(r.is_loop_free(&net));
                    prop_assert_eq!((r.origin, r.destination), (o.id, d.id));
                    prop_assert_eq!(net.edge(r.edges[0]).unwrap().from, o.id);
                    prop_assert_eq!(net.edge(*r.edges.last().unwrap()).unwrap().to, d.id);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn world_invariants_hold_every_tick(seed in 0u64..10_000, lanes in 1u32..3, vehicles in 1u32..120) {
        let net = grid(3, 4, lanes, true);
        let mut w = populate(&net, vehicles, seed);
        let mut plane = ControlPlane::install(&mut w, SignalSettings::default(), Some(DlrParams::default())).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        while !w.all_arrived() {
            prop_assert!(w.tick() < 20_000);
            plane.before_step(&mut w);
            // occasional incidents
            if rng.random_bool(0.01) {
                let on: Vec<VehicleId> = w.vehicles().iter().filter(|v| v.state == VehicleState::Moving).map(|v| v.id).collect();
                if let Some(&v) = on.first() {
                    let until = w.tick() + 20;
                    w.stop_vehicle(v, until).unwrap();
                }
            }
            w.step();
            check_world(&w)?;
            for p in plane.pairs() {
                prop_assert_eq!(p.lanes_a + p.lanes_b, p.total_lanes);
                prop_assert!(p.lanes_a >= 1 && p.lanes_b >= 1);
            }
            for s in w.signals() {
                let greens: u32 = s.plan.phases.iter().map(|p| p.green).sum();
                prop_assert_eq!(greens + s.plan.lost_time, s.plan.cycle);
                prop_assert!(s.plan.phases.iter().all(|p| p.green >= s.plan.min_green && p.green <= s.plan.max_green));
            }
        }
    }

    #[test]
    fn strategies_keep_the_world_consistent(seed in 0u64..10_000, pick in 0usize..3) {
        let net = grid(3, 3, 1, true);
        let mut w = populate(&net, 60, seed);
        let mut plane = ControlPlane::install(&mut w, SignalSettings::default(), None).unwrap();
        let cache = Arc::new(RouteCache::new(net.clone(), 3));
        let mut vam = VamController::new(&w, CommsParams::default(), RoutingParams::default(), cache, seed);
        let mut central = CentralizedController::new(5, 5, 0.05);
        let mut alert = AlertController::new(&w, AlertParams::default());
        while !w.all_arrived() {
            prop_assert!(w.tick() < 20_000);
            plane.before_step(&mut w);
            match pick {
                0 => vam.before_step(&mut w),
                1 => central.before_step(&mut w),
                _ => alert.before_step(&mut w),
            }
            w.step();
            check_world(&w)?;
            for v in w.vehicles() {
                prop_assert!(v.current_route.validate(&net).is_ok());
                prop_assert_eq!(v.current_route.destination, v.destination);
            }
        }
    }

    #[test]
    fn beacons_announce_a_prefix_of_the_route(seed in 0u64..10_000, horizon in 1usize..8, ticks in 1u64..200) {
        let net = grid(3, 4, 1, false);
        let mut w = populate(&net, 40, seed);
        for _ in 0..ticks {
            w.step();
        }
        let params = CommsParams { horizon, ..CommsParams::default() };
        for v in w.vehicles() {
            let Some(b) = make_beacon(&w, v.id, &params) else {
                prop_assert!(!v.state.on_network());
                continue;
            };
            prop_assert!(b.next_edges.len() <= horizon);
            prop_assert_eq!(b.next_edges.first().copied(), v.current_edge());
            let at = v.route_index();
            prop_assert_eq!(&b.next_edges[..], &v.current_route.edges[at..at + b.next_edges.len()]);
            prop_assert!(b.next_edges.iter().all(|e| net.edge(*e).is_some()));
        }
    }
}

fn message(sender: u32, at: u64) -> Arc<BeaconMessage> {
    Arc::new(BeaconMessage {
        sender: VehicleId(sender),
        location: Point::new(0.0, 0.0),
        speed: 1.0,
        next_edges: vec![EdgeId(sender)],
        optional_edges: Vec::new(),
        issued_at: at,
    })
}

proptest! {
    #[test]
    fn neighbor_table_keeps_latest_fresh_entry(rounds in proptest::collection::vec(proptest::collection::vec((0u32..12, 0u64..6), 0..10), 1..30)) {
        let params = CommsParams::default();
        let mut table = NeighborTable::new(VehicleId(3));
        for (i, round) in rounds.iter().enumerate() {
            let now = 5 * i as u64 + 5;
            let received: Vec<_> = round.iter().map(|&(s, lag)| message(s, now - lag)).collect();
            update_neighbor_table(&mut table, &received, now, &params);
            let senders: Vec<_> = table.entries().iter().map(|m| m.sender).collect();
            let unique: HashSet<_> = senders.iter().collect();
            prop_assert_eq!(unique.len(), senders.len());
            prop_assert!(!senders.contains(&VehicleId(3)));
            prop_assert!(table.entries().iter().all(|m| now - m.issued_at <= params.staleness()));
            for &(s, lag) in round {
                if s != 3 {
                    let latest = round.iter().filter(|(x, _)| *x == s).map(|(_, l)| now - l).max().unwrap();
                    prop_assert!(table.get(VehicleId(s)).unwrap().issued_at >= latest.min(now - lag));
                }
            }
        }
    }
}

struct Observed {
    data: Vec<Option<(f64, f64)>>,
    lanes: Vec<u32>,
    plans: Vec<SignalPlan>,
}

impl TrafficView for Observed {
    fn observe(&self, slot: usize) -> Option<(f64, f64)> {
        self.data[slot]
    }
    fn lanes(&self, slot: usize) -> u32 {
        self.lanes[slot]
    }
    fn signal(&self, node: IntersectionId) -> Option<&SignalPlan> {
        self.plans.iter().find(|p| p.intersection == node)
    }
}

proptest! {
    #[test]
    fn route_estimate_adds_up(seed in 0u64..10_000) {
        let net = grid(4, 4, 2, true);
        let mut w = World::new(net.clone(), CostModelParams::default(), 1.0).unwrap();
        ControlPlane::install(&mut w, SignalSettings::default(), None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let view = Observed {
            data: (0..net.edge_count()).map(|_| rng.random_bool(0.6).then(|| (rng.random_range(0.0..40.0), rng.random_range(0.0..10.0)))).collect(),
            lanes: net.edges().iter().map(|e| e.lanes).collect(),
            plans: w.signals().map(|s| s.plan.clone()).collect(),
        };
        let o = IntersectionId(rng.random_range(0..16));
        let d = IntersectionId((o.0 + rng.random_range(1..16)) % 16);
        let route = shortest_route(&net, o, d, free_flow_cost).unwrap();
        let est = estimate_route(&net, &route, &view, w.cost_params()).unwrap();
        let sum: f64 = est.per_edge.iter().map(|e| e.travel + e.signal_wait).sum();
        prop_assert!((est.total_delay - sum).abs() <= 1e-9 * sum.max(1.0));
        prop_assert!((0.0..=1.0).contains(&est.data_coverage));
        prop_assert_eq!(est.per_edge.len(), route.edges.len());
    }
}
