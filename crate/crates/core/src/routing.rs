//! Vehicle-side route choice: delay estimates from neighbor beacons and the
//! probabilistic switch rule.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::comms::{BeaconExchange, CommsParams, EdgeCounter};
use crate::control::SignalPlan;
use crate::network::{EdgeId, IntersectionId, RoadNetwork, Route, RouteCache, RouteError};
use crate::rng::{substream, Purpose};
use crate::traffic::{edge_travel_time_with_lanes, signal_wait_estimate, CostModelParams, Tick, VehicleId, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnknownEdgePolicy {
    FreeFlow,
    LastKnown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoutingParams {
    /// Optional routes kept per vehicle.
    pub k: usize,
    /// Probability that a driver follows a recommendation.
    pub compliance: f64,
    /// Minimum relative saving before a switch is recommended.
    pub switch_margin: f64,
    pub unknown_edge_policy: UnknownEdgePolicy,
}

impl Default for RoutingParams {
    fn default() -> Self {
        Self {
            k: 3,
            compliance: 0.85,
            switch_margin: 0.05,
            unknown_edge_policy: UnknownEdgePolicy::FreeFlow,
        }
    }
}

impl RoutingParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.compliance) {
            return Err(format!("compliance {} outside [0, 1]", self.compliance));
        }
        if !(self.switch_margin >= 0.0 && self.switch_margin < 1.0) {
            return Err(format!("switch_margin {} outside [0, 1)", self.switch_margin));
        }
        Ok(())
    }
}

/// Observed traffic an estimate is computed from.
pub trait TrafficView {
    /// (vehicle count, queue length) on the edge at `slot`, or `None` when
    /// nothing is known about it.
    fn observe(&self, slot: usize) -> Option<(f64, f64)>;
    fn lanes(&self, slot: usize) -> u32;
    fn signal(&self, node: IntersectionId) -> Option<&SignalPlan>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeEstimate {
    pub edge: EdgeId,
    pub travel: f64,
    pub signal_wait: f64,
    pub observed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteEstimate {
    pub route: Route,
    /// Seconds.
    pub total_delay: f64,
    pub per_edge: Vec<EdgeEstimate>,
    /// Share of edges with observed data.
    pub data_coverage: f64,
}

/// Travel time plus downstream signal wait for every edge of `route`.
/// Edges without data are costed at zero volume.
pub fn estimate_route(
    net: &RoadNetwork,
    route: &Route,
    view: &impl TrafficView,
    cost: &CostModelParams,
) -> Result<RouteEstimate, RouteError> {
    let mut per_edge = Vec::with_capacity(route.edges.len());
    let mut total = 0.0;
    let mut observed = 0usize;
    for id in &route.edges {
        let slot = net.edge_slot(*id).ok_or(RouteError::UnknownEdge(*id))?;
        let edge = &net.edges()[slot];
        let obs = view.observe(slot);
        let (count, queue) = obs.unwrap_or((0.0, 0.0));
        let lanes = view.lanes(slot);
        let travel = edge_travel_time_with_lanes(edge, lanes, count, cost);
        let signal_wait = view
            .signal(edge.to)
            .and_then(|plan| signal_wait_estimate(plan, *id, lanes, queue, cost).ok())
            .unwrap_or(0.0);
        observed += usize::from(obs.is_some());
        total += travel + signal_wait;
        per_edge.push(EdgeEstimate {
            edge: *id,
            travel,
            signal_wait,
            observed: obs.is_some(),
        });
    }
    let data_coverage = if route.edges.is_empty() {
        1.0
    } else {
        observed as f64 / route.edges.len() as f64
    };
    Ok(RouteEstimate {
        route: route.clone(),
        total_delay: total,
        per_edge,
        data_coverage,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Stay,
    /// Index into the optional route list.
    Switch(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionOutcome {
    pub recommended: Option<usize>,
    pub decision: Decision,
}

/// Recommends the cheapest option when it beats the current route by more
/// than the switch margin; the driver follows when `draw < compliance`.
/// `draw` is only called for a recommendation.
pub fn decide(
    current: &RouteEstimate,
    options: &[RouteEstimate],
    params: &RoutingParams,
    draw: impl FnOnce() -> f64,
) -> DecisionOutcome {
    let best = options
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_delay.total_cmp(&b.1.total_delay).then(a.0.cmp(&b.0)));
    let recommended = best
        .filter(|(_, e)| e.total_delay < (1.0 - params.switch_margin) * current.total_delay)
        .map(|(i, _)| i);
    let decision = match recommended {
        Some(i) if draw() < params.compliance => Decision::Switch(i),
        _ => Decision::Stay,
    };
    DecisionOutcome { recommended, decision }
}

/// One row of the optional decision trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRow {
    pub tick: Tick,
    pub vehicle: u32,
    pub current_est: f64,
    pub best_alt_est: f64,
    pub recommended: bool,
    pub complied: bool,
}

/// Alternatives from `from` to `to` that differ from `current`, cheapest
/// first.
pub fn alternatives_from(cache: &RouteCache, from: IntersectionId, to: IntersectionId, current: &Route, k: usize) -> Result<Vec<Route>, RouteError> {
    if from == to || k == 0 {
        return Ok(Vec::new());
    }
    Ok(cache
        .get(from, to)?
        .iter()
        .filter(|r| r.edges != current.edges)
        .take(k)
        .cloned()
        .collect())
}

struct NeighborView<'a> {
    counter: &'a EdgeCounter,
    memory: Option<&'a HashMap<usize, (f64, f64)>>,
    world: &'a World,
}

impl TrafficView for NeighborView<'_> {
    fn observe(&self, slot: usize) -> Option<(f64, f64)> {
        let c = self.counter.count(slot);
        if c > 0 {
            Some((f64::from(c), f64::from(self.counter.queue(slot))))
        } else {
            self.memory.and_then(|m| m.get(&slot).copied())
        }
    }

    fn lanes(&self, slot: usize) -> u32 {
        self.world.edge_states()[slot].lanes
    }

    fn signal(&self, node: IntersectionId) -> Option<&SignalPlan> {
        self.world.signal_plan(node)
    }
}

/// Runs the beacon rounds and per-vehicle decisions for a whole world.
pub struct VamController {
    comms: CommsParams,
    routing: RoutingParams,
    seed: u64,
    cache: Arc<RouteCache>,
    exchange: BeaconExchange,
    options_from: Vec<Option<IntersectionId>>,
    draws: Vec<Option<ChaCha8Rng>>,
    memory: Vec<HashMap<usize, (f64, f64)>>,
    counter: EdgeCounter,
    trace: Option<Vec<DecisionRow>>,
}

impl VamController {
    /// `cache` must hold at least `k + 1` routes per pair.
    pub fn new(world: &World, comms: CommsParams, routing: RoutingParams, cache: Arc<RouteCache>, seed: u64) -> Self {
        let n = world.vehicles().len();
        Self {
            comms,
            routing,
            seed,
            exchange: BeaconExchange::new(n, comms, seed),
            options_from: world.vehicles().iter().map(|v| Some(v.origin)).collect(),
            draws: vec![None; n],
            memory: vec![HashMap::new(); n],
            counter: EdgeCounter::new(world.network()),
            cache,
            trace: None,
        }
    }

    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn take_trace(&mut self) -> Vec<DecisionRow> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    /// Neighbors currently known to `id`, with the tick of each beacon.
    pub fn neighbors(&self, id: VehicleId) -> Vec<(VehicleId, Tick)> {
        self.exchange.neighbors(id).collect()
    }

    fn refresh_options(&mut self, world: &mut World, id: VehicleId) {
        let Some(next) = world.next_intersection(id) else { return };
        if self.options_from[id.0 as usize] == Some(next) {
            return;
        }
        let dest = world.vehicle(id).expect("vehicle").destination;
        let suffix = world.remaining_route(id).expect("on network");
        let alts = alternatives_from(&self.cache, next, dest, &suffix, self.routing.k).unwrap_or_default();
        world.vehicle_mut(id).expect("vehicle").optional_routes = alts;
        self.options_from[id.0 as usize] = Some(next);
    }

    /// Beacon round and decisions, on ticks that are multiples of the
    /// beacon interval.
    pub fn before_step(&mut self, world: &mut World) {
        let t = world.tick();
        if !self.comms.is_round(t) {
            return;
        }
        let on: Vec<VehicleId> = world.vehicles().iter().filter(|v| v.state.on_network()).map(|v| v.id).collect();
        for id in &on {
            self.refresh_options(world, *id);
        }
        self.exchange.round(world);
        let net = world.network().clone();
        for id in on {
            let i = id.0 as usize;
            let v = world.vehicle(id).expect("vehicle");
            if v.pinned || v.on_last_edge() || v.optional_routes.is_empty() {
                continue;
            }
            self.exchange.fill(id, &mut self.counter);
            let last_known = self.routing.unknown_edge_policy == UnknownEdgePolicy::LastKnown;
            if last_known {
                for e in v.current_route.edges.iter().chain(v.optional_routes.iter().flat_map(|r| &r.edges)) {
                    let s = net.edge_slot(*e).expect("route edge");
                    let c = self.counter.count(s);
                    if c > 0 {
                        self.memory[i].insert(s, (f64::from(c), f64::from(self.counter.queue(s))));
                    }
                }
            }
            let view = NeighborView {
                counter: &self.counter,
                memory: last_known.then_some(&self.memory[i]),
                world,
            };
            let cost = world.cost_params();
            let current = world.remaining_route(id).expect("on network");
            let cur = estimate_route(&net, &current, &view, cost).expect("valid route");
            let options: Vec<RouteEstimate> = v
                .optional_routes
                .iter()
                .map(|r| estimate_route(&net, r, &view, cost).expect("valid route"))
                .collect();
            let (seed, draws) = (self.seed, &mut self.draws[i]);
            let outcome = decide(&cur, &options, &self.routing, || {
                draws.get_or_insert_with(|| substream(seed, id.0, Purpose::Compliance)).random::<f64>()
            });
            if let Some(trace) = &mut self.trace {
                let best = options.iter().map(|o| o.total_delay).fold(f64::INFINITY, f64::min);
                trace.push(DecisionRow {
                    tick: t,
                    vehicle: id.0,
                    current_est: cur.total_delay,
                    best_alt_est: best,
                    recommended: outcome.recommended.is_some(),
                    complied: matches!(outcome.decision, Decision::Switch(_)),
                });
            }
            if let Decision::Switch(k) = outcome.decision {
                let chosen = options[k].route.clone();
                world.switch_route(id, &chosen).expect("option starts at next intersection");
                self.options_from[i] = None;
                self.refresh_options(world, id);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::Phase;
    use crate::network::{Edge, Intersection, Point};

    struct Fixed {
        counts: Vec<Option<(f64, f64)>>,
        plans: Vec<SignalPlan>,
    }

    impl TrafficView for Fixed {
        fn observe(&self, slot: usize) -> Option<(f64, f64)> {
            self.counts[slot]
        }
        fn lanes(&self, _slot: usize) -> u32 {
            1
        }
        fn signal(&self, node: IntersectionId) -> Option<&SignalPlan> {
            self.plans.iter().find(|p| p.intersection == node)
        }
    }

    fn line() -> RoadNetwork {
        let nodes = (0..3)
            .map(|i| Intersection {
                id: IntersectionId(i),
                position: Point::new(f64::from(i) * 600.0, 0.0),
                signalized: i == 2,
            })
            .collect();
        let edges = (0..2)
            .map(|i| Edge {
                id: EdgeId(i),
                from: IntersectionId(i),
                to: IntersectionId(i + 1),
                length: 600.0,
                lanes: 1,
                free_flow_speed: 10.0,
                per_lane_capacity: 20,
                dual: None,
            })
            .collect();
        RoadNetwork::new(nodes, edges).unwrap()
    }

    fn route(edges: &[u32]) -> Route {
        Route {
            origin: IntersectionId(edges[0]),
            destination: IntersectionId(edges[edges.len() - 1] + 1),
            edges: edges.iter().map(|e| EdgeId(*e)).collect(),
        }
    }

    fn half_green() -> SignalPlan {
        // e1 and a dummy approach share a 60 s cycle equally
        SignalPlan::new(IntersectionId(2), 0, vec![Phase::new(vec![EdgeId(1)], 30), Phase::new(vec![EdgeId(9)], 30)], 1, 59).unwrap()
    }

    fn est(total: f64) -> RouteEstimate {
        RouteEstimate {
            route: Route::empty_at(IntersectionId(0)),
            total_delay: total,
            per_edge: vec![],
            data_coverage: 1.0,
        }
    }

    #[test]
    fn empty_data_is_free_flow() {
        let net = line();
        let view = Fixed { counts: vec![None; 2], plans: vec![] };
        let e = estimate_route(&net, &route(&[0]), &view, &CostModelParams::default()).unwrap();
        assert_eq!(e.total_delay, 60.0);
        assert_eq!(e.data_coverage, 0.0);
    }

    #[test]
    fn adds_signal_wait_at_downstream_light() {
        let net = line();
        let view = Fixed { counts: vec![None; 2], plans: vec![half_green()] };
        let e = estimate_route(&net, &route(&[0, 1]), &view, &CostModelParams::default()).unwrap();
        assert_eq!(e.total_delay, 60.0 + 60.0 + 15.0);
        let sum: f64 = e.per_edge.iter().map(|p| p.travel + p.signal_wait).sum();
        assert_eq!(sum, e.total_delay);
    }

    #[test]
    fn congestion_raises_estimate() {
        let net = line();
        let cost = CostModelParams::default();
        let empty = Fixed { counts: vec![Some((0.0, 0.0)), None], plans: vec![half_green()] };
        let full = Fixed { counts: vec![Some((20.0, 0.0)), None], plans: vec![half_green()] };
        let a = estimate_route(&net, &route(&[0, 1]), &empty, &cost).unwrap();
        let b = estimate_route(&net, &route(&[0, 1]), &full, &cost).unwrap();
        assert!(b.total_delay > a.total_delay);
        assert_eq!(b.data_coverage, 0.5);
    }

    #[test]
    fn unknown_edge_is_an_error() {
        let net = line();
        let view = Fixed { counts: vec![None; 2], plans: vec![] };
        let bad = Route { origin: IntersectionId(0), destination: IntersectionId(1), edges: vec![EdgeId(5)] };
        assert_eq!(estimate_route(&net, &bad, &view, &CostModelParams::default()), Err(RouteError::UnknownEdge(EdgeId(5))));
    }

    #[test]
    fn decision_rule() {
        let p = RoutingParams { compliance: 1.0, ..RoutingParams::default() };
        assert_eq!(decide(&est(300.0), &[est(310.0)], &p, || 0.0).decision, Decision::Stay);
        assert_eq!(decide(&est(300.0), &[est(200.0)], &p, || 0.5).decision, Decision::Switch(0));
        let p85 = RoutingParams::default();
        let declined = decide(&est(300.0), &[est(200.0)], &p85, || 0.9);
        assert_eq!(declined, DecisionOutcome { recommended: Some(0), decision: Decision::Stay });
        // within the margin: no recommendation and no draw consumed
        let out = decide(&est(300.0), &[est(290.0)], &p, || panic!("draw used"));
        assert_eq!(out.recommended, None);
        // best option wins; equal options resolve to the lower index
        assert_eq!(decide(&est(300.0), &[est(250.0), est(100.0), est(100.0)], &p, || 0.0).decision, Decision::Switch(1));
        let p0 = RoutingParams { compliance: 0.0, ..p };
        assert_eq!(decide(&est(300.0), &[est(1.0)], &p0, || 0.0).decision, Decision::Stay);
    }

    #[test]
    fn params_validate() {
        assert!(RoutingParams::default().validate().is_ok());
        assert!(RoutingParams { compliance: 1.5, ..RoutingParams::default() }.validate().is_err());
        assert!(RoutingParams { switch_margin: -0.1, ..RoutingParams::default() }.validate().is_err());
    }
}
