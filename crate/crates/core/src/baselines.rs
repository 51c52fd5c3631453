//! Comparison strategies: omniscient centralized routing, congestion-zone
//! alerts, and no action.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::control::SignalPlan;
use crate::network::{distances_to, route_from_field, shortest_route, Edge, EdgeId, IntersectionId, Route, RouteError};
use crate::routing::TrafficView;
use crate::traffic::{edge_travel_time_with_lanes, signal_wait_estimate, Tick, VehicleId, VehicleState, World};

/// Exact network-wide state: every on-network vehicle counts toward the
/// next `horizon` edges of its route, and queues are the real ones.
pub struct GlobalView<'a> {
    world: &'a World,
    counts: Vec<f64>,
}

impl<'a> GlobalView<'a> {
    pub fn new(world: &'a World, horizon: usize) -> Self {
        let net = world.network();
        let mut counts = vec![0.0; net.edge_count()];
        for v in world.vehicles() {
            for e in v.next_edges(horizon) {
                counts[net.edge_slot(*e).expect("route edge")] += 1.0;
            }
        }
        Self { world, counts }
    }

    /// Per-slot cost: congested travel time plus the wait at the
    /// downstream signal.
    pub fn edge_costs(&self) -> Vec<f64> {
        let net = self.world.network();
        let cost = self.world.cost_params();
        net.edges()
            .iter()
            .enumerate()
            .map(|(s, e)| {
                let (count, queue) = self.observe(s).expect("global view");
                let lanes = self.lanes(s);
                let wait = self
                    .signal(e.to)
                    .and_then(|p| signal_wait_estimate(p, e.id, lanes, queue, cost).ok())
                    .unwrap_or(0.0);
                edge_travel_time_with_lanes(e, lanes, count, cost) + wait
            })
            .collect()
    }
}

impl TrafficView for GlobalView<'_> {
    fn observe(&self, slot: usize) -> Option<(f64, f64)> {
        let queue = self.world.edge_states()[slot].queue.len() as f64;
        Some((self.counts[slot], queue))
    }

    fn lanes(&self, slot: usize) -> u32 {
        self.world.edge_states()[slot].lanes
    }

    fn signal(&self, node: IntersectionId) -> Option<&SignalPlan> {
        self.world.signal_plan(node)
    }
}

/// Where a vehicle can next choose a route: its next intersection, or its
/// origin before departure.
fn decision_point(world: &World, id: VehicleId) -> Option<IntersectionId> {
    let v = world.vehicle(id)?;
    match v.state {
        VehicleState::Pending => Some(v.origin),
        VehicleState::Arrived => None,
        _ => world.next_intersection(id),
    }
}

/// Minimum current-cost route from the vehicle's decision point using exact
/// global state.
pub fn centralized_route(world: &World, id: VehicleId, horizon: usize) -> Result<Route, RouteError> {
    let at = decision_point(world, id).ok_or(RouteError::UnknownIntersection(IntersectionId(u32::MAX)))?;
    let dest = world.vehicle(id).expect("vehicle").destination;
    let costs = GlobalView::new(world, horizon).edge_costs();
    let net = world.network();
    shortest_route(net, at, dest, |e| costs[net.edge_slot(e.id).expect("edge")])
}

#[derive(Debug, Clone)]
pub struct CentralizedController {
    interval: u64,
    horizon: usize,
    switch_margin: f64,
}

impl CentralizedController {
    pub fn new(interval: u64, horizon: usize, switch_margin: f64) -> Self {
        Self {
            interval: interval.max(1),
            horizon,
            switch_margin,
        }
    }

    /// Reroutes every on-network vehicle whose best route beats its current
    /// remaining route by more than the switch margin.
    pub fn before_step(&mut self, world: &mut World) {
        let t = world.tick();
        if t % self.interval != 0 {
            return;
        }
        let (costs, groups) = {
            let costs = GlobalView::new(world, self.horizon).edge_costs();
            let mut groups: BTreeMap<IntersectionId, Vec<VehicleId>> = BTreeMap::new();
            for v in world.vehicles() {
                if v.state.on_network() && !v.on_last_edge() && !v.pinned {
                    groups.entry(v.destination).or_default().push(v.id);
                }
            }
            (costs, groups)
        };
        let net = world.network().clone();
        for (dest, ids) in groups {
            let field = distances_to(&net, dest, &costs).expect("known destination");
            for id in ids {
                let at = world.next_intersection(id).expect("on network");
                let current = world.remaining_route(id).expect("on network");
                let now: f64 = current.edges.iter().map(|e| costs[net.edge_slot(*e).expect("edge")]).sum();
                let best = field.distance(net.node_slot(at).expect("node"));
                if best < (1.0 - self.switch_margin) * now {
                    let route = route_from_field(&net, &field, &costs, at).expect("reachable");
                    if route.edges != current.edges {
                        world.switch_route(id, &route).expect("valid suffix");
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlertParams {
    /// Zone triggers below this fraction of free-flow speed ...
    pub speed_fraction: f64,
    /// ... held for this many consecutive ticks.
    pub persistence: u32,
    /// Meters around the congested edge's midpoint.
    pub radius: f64,
    /// Alerts reach vehicles this many edges upstream of a zone.
    pub alert_distance: usize,
    /// Cost multiplier for zone edges when rerouting.
    pub penalty: f64,
}

impl Default for AlertParams {
    fn default() -> Self {
        Self {
            speed_fraction: 0.3,
            persistence: 10,
            radius: 800.0,
            alert_distance: 2,
            penalty: 10.0,
        }
    }
}

impl AlertParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.radius > 0.0) {
            return Err("alert radius must be positive".into());
        }
        if !(self.penalty >= 1.0) {
            return Err("alert penalty must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.speed_fraction) {
            return Err("alert speed fraction outside [0, 1]".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CongestionZone {
    pub center: EdgeId,
    pub radius: f64,
    pub active_since: Tick,
    /// Edges with midpoints inside the radius, sorted.
    pub edges: Vec<EdgeId>,
}

impl CongestionZone {
    pub fn contains(&self, e: EdgeId) -> bool {
        self.edges.binary_search(&e).is_ok()
    }
}

/// Tracks slow edges and the zones they produce.
///
/// A vehicle's speed on an edge is its mean since entering the edge, so a
/// normal stop at a red light does not by itself mark the edge as slow.
#[derive(Debug, Clone)]
pub struct ZoneMonitor {
    params: AlertParams,
    slow_for: Vec<u32>,
    zones: Vec<Option<CongestionZone>>,
    /// Edge each vehicle was last seen on and the tick it was first seen there.
    entered: Vec<Option<(EdgeId, Tick)>>,
}

impl ZoneMonitor {
    pub fn new(world: &World, params: AlertParams) -> Self {
        let n = world.network().edge_count();
        Self {
            params,
            slow_for: vec![0; n],
            zones: vec![None; n],
            entered: vec![None; world.vehicles().len()],
        }
    }

    pub fn active(&self) -> impl Iterator<Item = &CongestionZone> {
        self.zones.iter().flatten()
    }

    /// Updates slow-edge streaks from the current vehicle positions.
    pub fn observe(&mut self, world: &World) {
        let net = world.network();
        let t = world.tick();
        let spt = world.seconds_per_tick();
        let mut speed_sum = vec![0.0; net.edge_count()];
        let mut count = vec![0u32; net.edge_count()];
        if self.entered.len() < world.vehicles().len() {
            self.entered.resize(world.vehicles().len(), None);
        }
        for v in world.vehicles() {
            let i = v.id.0 as usize;
            let Some((e, progress)) = v.position() else {
                self.entered[i] = None;
                continue;
            };
            let since = match self.entered[i] {
                Some((seen, since)) if seen == e => since,
                _ => {
                    self.entered[i] = Some((e, t));
                    t
                }
            };
            let s = net.edge_slot(e).expect("edge");
            let elapsed = (t - since + 1) as f64 * spt;
            speed_sum[s] += progress * net.edges()[s].length / elapsed;
            count[s] += 1;
        }
        for (s, edge) in net.edges().iter().enumerate() {
            let slow = count[s] > 0 && speed_sum[s] / f64::from(count[s]) < self.params.speed_fraction * edge.free_flow_speed;
            if !slow {
                self.slow_for[s] = 0;
                self.zones[s] = None;
                continue;
            }
            self.slow_for[s] += 1;
            if self.slow_for[s] >= self.params.persistence && self.zones[s].is_none() {
                let c = net.point_on_edge(s, 0.5);
                let r2 = self.params.radius * self.params.radius;
                let edges = (0..net.edge_count())
                    .filter(|&o| {
                        let p = net.point_on_edge(o, 0.5);
                        (p.x - c.x).powi(2) + (p.y - c.y).powi(2) <= r2
                    })
                    .map(|o| net.edges()[o].id)
                    .collect();
                self.zones[s] = Some(CongestionZone {
                    center: edge.id,
                    radius: self.params.radius,
                    active_since: t,
                    edges,
                });
            }
        }
    }
}

/// Replacement route for a vehicle approaching an active zone on its
/// remaining route, or `None` to stay.
pub fn alert_reroute(world: &World, id: VehicleId, zones: &[&CongestionZone], params: &AlertParams) -> Option<Route> {
    if zones.is_empty() {
        return None;
    }
    let v = world.vehicle(id)?;
    if !v.state.on_network() || v.on_last_edge() || v.pinned {
        return None;
    }
    let ahead = v.remaining_after_current();
    let near = &ahead[..ahead.len().min(params.alert_distance)];
    if !near.iter().any(|e| zones.iter().any(|z| z.contains(*e))) {
        return None;
    }
    let at = world.next_intersection(id)?;
    let cost = |e: &Edge| {
        let base = e.free_flow_time();
        if zones.iter().any(|z| z.contains(e.id)) {
            base * params.penalty
        } else {
            base
        }
    };
    let net = world.network();
    let route = shortest_route(net, at, v.destination, cost).ok()?;
    let current: f64 = ahead.iter().map(|e| cost(net.edge(*e).expect("edge"))).sum();
    let best: f64 = route.edges.iter().map(|e| cost(net.edge(*e).expect("edge"))).sum();
    (best < current * (1.0 - 1e-9)).then_some(route)
}

#[derive(Debug, Clone)]
pub struct AlertController {
    params: AlertParams,
    monitor: ZoneMonitor,
    /// Per vehicle: zones (center, activation tick) already alerted.
    alerted: Vec<Vec<(EdgeId, Tick)>>,
}

impl AlertController {
    pub fn new(world: &World, params: AlertParams) -> Self {
        Self {
            params,
            monitor: ZoneMonitor::new(world, params),
            alerted: vec![Vec::new(); world.vehicles().len()],
        }
    }

    pub fn monitor(&self) -> &ZoneMonitor {
        &self.monitor
    }

    pub fn before_step(&mut self, world: &mut World) {
        self.monitor.observe(world);
        let zones: Vec<&CongestionZone> = self.monitor.active().collect();
        if zones.is_empty() {
            return;
        }
        if self.alerted.len() < world.vehicles().len() {
            self.alerted.resize(world.vehicles().len(), Vec::new());
        }
        let ids: Vec<VehicleId> = world.vehicles().iter().filter(|v| v.state.on_network() && !v.pinned).map(|v| v.id).collect();
        for id in ids {
            // each zone alerts a given vehicle once
            let v = world.vehicle(id).expect("vehicle");
            let ahead = v.remaining_after_current();
            let near = &ahead[..ahead.len().min(self.params.alert_distance)];
            let seen = &mut self.alerted[id.0 as usize];
            let mut fresh = false;
            for z in &zones {
                let key = (z.center, z.active_since);
                if !seen.contains(&key) && near.iter().any(|e| z.contains(*e)) {
                    seen.push(key);
                    fresh = true;
                }
            }
            if fresh {
                if let Some(route) = alert_reroute(world, id, &zones, &self.params) {
                    world.switch_route(id, &route).expect("valid suffix");
                }
            }
        }
    }
}
