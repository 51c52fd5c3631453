use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::cost::edge_travel_time_with_lanes;
use super::{CostModelParams, Tick, VehicleId, VehicleState};
use crate::control::{LaneOccupancy, SignalError, SignalPlan};
use crate::network::{EdgeId, IntersectionId, Point, RoadNetwork, Route, RouteError};

const NO_EDGE: usize = usize::MAX;

/// Origin, destination and scheduled departure of one trip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TripSpec {
    pub origin: IntersectionId,
    pub destination: IntersectionId,
    pub departure: Tick,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WorldError {
    #[error("vehicle {vehicle}: {reason}")]
    InvalidTrip { vehicle: VehicleId, reason: String },
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("unknown vehicle {0}")]
    UnknownVehicle(VehicleId),
    #[error("vehicle {0} is not on the network")]
    NotOnNetwork(VehicleId),
    #[error("intersection {0} is not signalized or unknown")]
    NotSignalized(IntersectionId),
    #[error("vehicles can only be added before the first step")]
    AlreadyStarted,
    #[error("seconds_per_tick must be positive")]
    BadTimeScale,
}

/// A vehicle and its trip state. Position fields are only meaningful while
/// the vehicle is on the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub id: VehicleId,
    pub origin: IntersectionId,
    pub destination: IntersectionId,
    pub departure_time: Tick,
    pub current_route: Route,
    pub optional_routes: Vec<Route>,
    pub state: VehicleState,
    pub arrived_at: Option<Tick>,
    pub switches: u32,
    /// Held to its route by the harness (incident vehicles); strategies
    /// leave it alone.
    pub pinned: bool,
    /// Meters covered on completed edges.
    pub distance: f64,
    route_index: usize,
    edge_slot: usize,
    progress: f64,
    lane: u32,
    reached_end_at: f64,
}

impl Vehicle {
    pub fn current_edge(&self) -> Option<EdgeId> {
        self.state
            .on_network()
            .then(|| self.current_route.edges[self.route_index])
    }

    /// Current edge and progress fraction in [0, 1].
    pub fn position(&self) -> Option<(EdgeId, f64)> {
        self.current_edge().map(|e| (e, self.progress))
    }

    pub fn route_index(&self) -> usize {
        self.route_index
    }

    pub fn lane(&self) -> u32 {
        self.lane
    }

    /// Route edges after the current one.
    pub fn remaining_after_current(&self) -> &[EdgeId] {
        if self.state.on_network() {
            &self.current_route.edges[self.route_index + 1..]
        } else if self.state == VehicleState::Pending {
            &self.current_route.edges
        } else {
            &[]
        }
    }

    /// Up to `n` route edges starting with the current one.
    pub fn next_edges(&self, n: usize) -> &[EdgeId] {
        if !self.state.on_network() {
            return &[];
        }
        let end = (self.route_index + n).min(self.current_route.edges.len());
        &self.current_route.edges[self.route_index..end]
    }

    pub fn on_last_edge(&self) -> bool {
        self.state.on_network() && self.route_index + 1 == self.current_route.edges.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeState {
    pub edge: EdgeId,
    pub count: u32,
    pub queue: VecDeque<VehicleId>,
    pub lanes: u32,
    /// Lanes accepting new vehicles (`lanes - 1` while a lane is clearing).
    pub open_lanes: u32,
    pub lane_counts: Vec<u32>,
    /// Vehicles admitted since the start of the run.
    pub entered_total: u64,
    pub peak: u32,
    credit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalState {
    pub plan: SignalPlan,
    pub cycle_start: Tick,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SimEvent {
    Departed { vehicle: VehicleId, edge: EdgeId, tick: Tick },
    EnteredEdge { vehicle: VehicleId, edge: EdgeId, tick: Tick },
    Queued { vehicle: VehicleId, edge: EdgeId, tick: Tick },
    Resumed { vehicle: VehicleId, tick: Tick },
    Arrived { vehicle: VehicleId, tick: Tick },
}

/// Vehicle counts by state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Census {
    pub pending: u64,
    pub moving: u64,
    pub queued: u64,
    pub stopped: u64,
    pub arrived: u64,
    /// Running total of admissions, tracked independently of the states.
    pub departed: u64,
}

impl Census {
    pub fn in_flight(&self) -> u64 {
        self.moving + self.queued
    }

    /// departed == arrived + in-flight + stopped
    pub fn conserved(&self) -> bool {
        self.departed == self.arrived + self.in_flight() + self.stopped
    }
}

/// Complete mutable simulation state. Single writer: one engine steps it.
#[derive(Debug, Clone)]
pub struct World {
    net: Arc<RoadNetwork>,
    cost: CostModelParams,
    seconds_per_tick: f64,
    tick: Tick,
    vehicles: Vec<Vehicle>,
    edges: Vec<EdgeState>,
    signals: Vec<Option<SignalState>>,
    edge_phase: Vec<Option<usize>>,
    departure_order: Vec<u32>,
    next_departure: usize,
    waiting: VecDeque<u32>,
    stopped: Vec<u32>,
    departed: u64,
    arrived: u64,
}

impl World {
    pub fn new(
        net: Arc<RoadNetwork>,
        cost: CostModelParams,
        seconds_per_tick: f64,
    ) -> Result<Self, WorldError> {
        if !(seconds_per_tick > 0.0 && seconds_per_tick.is_finite()) {
            return Err(WorldError::BadTimeScale);
        }
        let edges = net
            .edges()
            .iter()
            .map(|e| EdgeState {
                edge: e.id,
                count: 0,
                queue: VecDeque::new(),
                lanes: e.lanes,
                open_lanes: e.lanes,
                lane_counts: vec![0; e.lanes as usize],
                entered_total: 0,
                peak: 0,
                credit: 0.0,
            })
            .collect();
        Ok(Self {
            signals: vec![None; net.node_count()],
            edge_phase: vec![None; net.edge_count()],
            net,
            cost,
            seconds_per_tick,
            tick: 0,
            vehicles: Vec::new(),
            edges,
            departure_order: Vec::new(),
            next_departure: 0,
            waiting: VecDeque::new(),
            stopped: Vec::new(),
            departed: 0,
            arrived: 0,
        })
    }

    /// Adds a trip following `route`. Vehicle ids are assigned densely in
    /// insertion order.
    pub fn add_vehicle(
        &mut self,
        trip: TripSpec,
        route: Route,
        optional_routes: Vec<Route>,
    ) -> Result<VehicleId, WorldError> {
        if self.tick > 0 {
            return Err(WorldError::AlreadyStarted);
        }
        let id = VehicleId(self.vehicles.len() as u32);
        if trip.origin == trip.destination || route.is_empty() {
            return Err(WorldError::InvalidTrip {
                vehicle: id,
                reason: "origin equals destination".into(),
            });
        }
        if route.origin != trip.origin || route.destination != trip.destination {
            return Err(WorldError::InvalidTrip {
                vehicle: id,
                reason: "route endpoints differ from trip".into(),
            });
        }
        route.validate(&self.net)?;
        self.vehicles.push(Vehicle {
            id,
            origin: trip.origin,
            destination: trip.destination,
            departure_time: trip.departure,
            current_route: route,
            optional_routes,
            state: VehicleState::Pending,
            arrived_at: None,
            switches: 0,
            pinned: false,
            distance: 0.0,
            route_index: 0,
            edge_slot: NO_EDGE,
            progress: 0.0,
            lane: 0,
            reached_end_at: 0.0,
        });
        let pos = self.departure_order[self.next_departure..]
            .partition_point(|&v| {
                let o = &self.vehicles[v as usize];
                (o.departure_time, o.id) < (trip.departure, id)
            })
            + self.next_departure;
        self.departure_order.insert(pos, id.0);
        Ok(id)
    }

    /// Installs a plan; every incoming edge of the intersection must be
    /// served by exactly one phase.
    pub fn install_signal(&mut self, plan: SignalPlan, cycle_start: Tick) -> Result<(), WorldError> {
        plan.validate()?;
        let node = self
            .net
            .node_slot(plan.intersection)
            .ok_or(WorldError::NotSignalized(plan.intersection))?;
        let incoming = self.net.incoming_slots(node).to_vec();
        for slot in &incoming {
            let id = self.net.edges()[*slot].id;
            let phase = plan.phase_of(id)?;
            self.edge_phase[*slot] = Some(phase);
        }
        for p in &plan.phases {
            for a in &p.approaches {
                if !incoming.iter().any(|s| self.net.edges()[*s].id == *a) {
                    return Err(WorldError::Signal(SignalError::UnknownApproach {
                        intersection: plan.intersection,
                        approach: *a,
                    }));
                }
            }
        }
        self.signals[node] = Some(SignalState { plan, cycle_start });
        Ok(())
    }

    pub fn network(&self) -> &Arc<RoadNetwork> {
        &self.net
    }

    pub fn cost_params(&self) -> &CostModelParams {
        &self.cost
    }

    pub fn seconds_per_tick(&self) -> f64 {
        self.seconds_per_tick
    }

    /// The tick the next call to [`World::step`] will simulate.
    pub fn tick(&self) -> Tick {
        self.tick
    }

    pub fn vehicles(&self) -> &[Vehicle] {
        &self.vehicles
    }

    pub fn vehicle(&self, id: VehicleId) -> Option<&Vehicle> {
        self.vehicles.get(id.0 as usize)
    }

    pub fn vehicle_mut(&mut self, id: VehicleId) -> Option<&mut Vehicle> {
        self.vehicles.get_mut(id.0 as usize)
    }

    pub fn edge_states(&self) -> &[EdgeState] {
        &self.edges
    }

    pub fn edge_state(&self, id: EdgeId) -> Option<&EdgeState> {
        self.net.edge_slot(id).map(|s| &self.edges[s])
    }

    pub fn signal(&self, node: IntersectionId) -> Option<&SignalState> {
        self.net.node_slot(node).and_then(|s| self.signals[s].as_ref())
    }

    pub fn signal_plan(&self, node: IntersectionId) -> Option<&SignalPlan> {
        self.signal(node).map(|s| &s.plan)
    }

    pub fn signals(&self) -> impl Iterator<Item = &SignalState> {
        self.signals.iter().flatten()
    }

    pub fn signal_mut(&mut self, node: IntersectionId) -> Option<&mut SignalState> {
        let slot = self.net.node_slot(node)?;
        self.signals[slot].as_mut()
    }

    pub fn all_arrived(&self) -> bool {
        self.arrived as usize == self.vehicles.len()
    }

    pub fn census(&self) -> Census {
        let mut c = Census {
            departed: self.departed,
            ..Census::default()
        };
        for v in &self.vehicles {
            match v.state {
                VehicleState::Pending => c.pending += 1,
                VehicleState::Moving => c.moving += 1,
                VehicleState::Queued => c.queued += 1,
                VehicleState::Stopped { .. } => c.stopped += 1,
                VehicleState::Arrived => c.arrived += 1,
            }
        }
        c
    }

    /// Recounts edge occupancy from vehicle positions and checks it against
    /// the per-edge counters and storage limits.
    pub fn check_edge_counts(&self) -> Result<(), String> {
        let mut counts = vec![0u32; self.edges.len()];
        let mut lanes: Vec<Vec<u32>> = self.edges.iter().map(|e| vec![0; e.lanes as usize]).collect();
        for v in &self.vehicles {
            if v.state.on_network() {
                counts[v.edge_slot] += 1;
                let l = lanes[v.edge_slot]
                    .get_mut(v.lane as usize)
                    .ok_or_else(|| format!("{} in missing lane {}", v.id, v.lane))?;
                *l += 1;
                if v.current_route.edges[v.route_index] != self.edges[v.edge_slot].edge {
                    return Err(format!("{} position is off its route", v.id));
                }
            }
        }
        for (slot, es) in self.edges.iter().enumerate() {
            if es.count != counts[slot] || es.lane_counts != lanes[slot] {
                return Err(format!("{}: counter {} vs {} recounted", es.edge, es.count, counts[slot]));
            }
            let cap = self.net.edges()[slot].per_lane_capacity;
            if es.lane_counts.iter().any(|&c| c > cap) {
                return Err(format!("{}: lane over storage capacity", es.edge));
            }
        }
        Ok(())
    }

    /// Current traversal time of an edge in seconds.
    pub fn travel_time(&self, edge_slot: usize) -> f64 {
        let es = &self.edges[edge_slot];
        edge_travel_time_with_lanes(
            &self.net.edges()[edge_slot],
            es.lanes,
            f64::from(es.count),
            &self.cost,
        )
    }

    /// Instantaneous speed in m/s (0 unless moving).
    pub fn speed(&self, id: VehicleId) -> f64 {
        let v = &self.vehicles[id.0 as usize];
        if v.state != VehicleState::Moving {
            return 0.0;
        }
        self.net.edges()[v.edge_slot].length / self.travel_time(v.edge_slot)
    }

    pub fn location(&self, id: VehicleId) -> Option<Point> {
        let v = self.vehicles.get(id.0 as usize)?;
        v.state
            .on_network()
            .then(|| self.net.point_on_edge(v.edge_slot, v.progress.min(1.0)))
    }

    /// Whether vehicles on `edge_slot` may currently leave it.
    pub fn is_green(&self, edge_slot: usize, tick: Tick) -> bool {
        let node = self.net.edge_to_slot(edge_slot);
        let (Some(sig), Some(phase)) = (&self.signals[node], self.edge_phase[edge_slot]) else {
            return true;
        };
        let elapsed = (tick as f64 - sig.cycle_start as f64) * self.seconds_per_tick;
        let offset = elapsed.rem_euclid(f64::from(sig.plan.cycle));
        sig.plan.phase_green_at(phase, offset)
    }

    fn can_admit(&self, slot: usize) -> Option<u32> {
        let es = &self.edges[slot];
        let cap = self.net.edges()[slot].per_lane_capacity;
        (0..es.open_lanes)
            .filter(|&l| es.lane_counts[l as usize] < cap)
            .min_by_key(|&l| (es.lane_counts[l as usize], l))
    }

    fn place(&mut self, v: u32, slot: usize, lane: u32, progress: f64) {
        let es = &mut self.edges[slot];
        es.count += 1;
        es.lane_counts[lane as usize] += 1;
        es.entered_total += 1;
        es.peak = es.peak.max(es.count);
        let veh = &mut self.vehicles[v as usize];
        veh.edge_slot = slot;
        veh.lane = lane;
        veh.progress = progress;
        veh.state = VehicleState::Moving;
    }

    fn lift(&mut self, v: u32) {
        let veh = &mut self.vehicles[v as usize];
        let slot = veh.edge_slot;
        let es = &mut self.edges[slot];
        es.count -= 1;
        es.lane_counts[veh.lane as usize] -= 1;
        veh.distance += self.net.edges()[slot].length;
        veh.edge_slot = NO_EDGE;
    }

    /// Advances the world by one tick and returns what happened.
    pub fn step(&mut self) -> Vec<SimEvent> {
        let t = self.tick;
        let mut events = Vec::new();
        self.admit_departures(t, &mut events);
        self.move_vehicles(t, &mut events);
        self.discharge(t, &mut events);
        self.tick += 1;
        events
    }

    fn admit_departures(&mut self, t: Tick, events: &mut Vec<SimEvent>) {
        while let Some(&v) = self.departure_order.get(self.next_departure) {
            if self.vehicles[v as usize].departure_time > t {
                break;
            }
            self.waiting.push_back(v);
            self.next_departure += 1;
        }
        let mut blocked = VecDeque::new();
        while let Some(v) = self.waiting.pop_front() {
            let first = self.vehicles[v as usize].current_route.edges[0];
            let slot = self.net.edge_slot(first).expect("validated route");
            match self.can_admit(slot) {
                Some(lane) => {
                    self.place(v, slot, lane, 0.0);
                    self.vehicles[v as usize].route_index = 0;
                    self.departed += 1;
                    events.push(SimEvent::Departed {
                        vehicle: VehicleId(v),
                        edge: first,
                        tick: t,
                    });
                }
                None => blocked.push_back(v),
            }
        }
        self.waiting = blocked;
    }

    fn move_vehicles(&mut self, t: Tick, events: &mut Vec<SimEvent>) {
        let mut blocker = vec![f64::INFINITY; self.edges.len()];
        let mut still_stopped = Vec::with_capacity(self.stopped.len());
        for &v in &self.stopped {
            let veh = &mut self.vehicles[v as usize];
            let VehicleState::Stopped { until } = veh.state else {
                continue;
            };
            if t >= until {
                veh.state = if veh.progress >= 1.0 {
                    VehicleState::Queued
                } else {
                    VehicleState::Moving
                };
                events.push(SimEvent::Resumed {
                    vehicle: VehicleId(v),
                    tick: t,
                });
            } else {
                blocker[veh.edge_slot] = blocker[veh.edge_slot].min(veh.progress);
                still_stopped.push(v);
            }
        }
        self.stopped = still_stopped;

        let spt = self.seconds_per_tick;
        let mut reached = Vec::new();
        for i in 0..self.vehicles.len() {
            if self.vehicles[i].state != VehicleState::Moving {
                continue;
            }
            let slot = self.vehicles[i].edge_slot;
            let tt = self.travel_time(slot) / spt;
            let veh = &mut self.vehicles[i];
            let mut p = veh.progress + 1.0 / tt;
            let limit = blocker[slot];
            if veh.progress <= limit && p > limit {
                // Held behind a stopped vehicle.
                p = limit.min(p);
            }
            if p >= 1.0 {
                let overshoot = ((p - 1.0) * tt).min(1.0);
                veh.reached_end_at = (t + 1) as f64 - overshoot;
                veh.progress = 1.0;
                veh.state = VehicleState::Queued;
                reached.push((veh.reached_end_at, i as u32, slot));
            } else {
                veh.progress = p;
            }
        }
        reached.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (_, v, slot) in reached {
            self.edges[slot].queue.push_back(VehicleId(v));
            events.push(SimEvent::Queued {
                vehicle: VehicleId(v),
                edge: self.edges[slot].edge,
                tick: t,
            });
        }
    }

    fn discharge(&mut self, t: Tick, events: &mut Vec<SimEvent>) {
        let spt = self.seconds_per_tick;
        for node in 0..self.net.node_count() {
            for ai in 0..self.net.incoming_slots(node).len() {
                let slot = self.net.incoming_slots(node)[ai];
                if !self.is_green(slot, t) {
                    self.edges[slot].credit = 0.0;
                    continue;
                }
                let rate = self.cost.saturation_flow * f64::from(self.edges[slot].lanes) * spt;
                self.edges[slot].credit += rate;
                while self.edges[slot].credit >= 1.0 - CREDIT_EPS {
                    let Some(&VehicleId(v)) = self.edges[slot].queue.front() else {
                        idle(&mut self.edges[slot].credit, rate);
                        break;
                    };
                    let veh = &self.vehicles[v as usize];
                    if veh.state != VehicleState::Queued {
                        // A stopped vehicle at the head blocks the approach.
                        idle(&mut self.edges[slot].credit, rate);
                        break;
                    }
                    let carry = ((t + 1) as f64 - veh.reached_end_at.max(t as f64)).clamp(0.0, 1.0);
                    if veh.route_index + 1 == veh.current_route.edges.len() {
                        self.edges[slot].queue.pop_front();
                        self.edges[slot].credit -= 1.0;
                        self.lift(v);
                        let veh = &mut self.vehicles[v as usize];
                        veh.state = VehicleState::Arrived;
                        veh.arrived_at = Some(t + 1);
                        self.arrived += 1;
                        events.push(SimEvent::Arrived {
                            vehicle: VehicleId(v),
                            tick: t + 1,
                        });
                        continue;
                    }
                    let next = veh.current_route.edges[veh.route_index + 1];
                    let next_slot = self.net.edge_slot(next).expect("validated route");
                    let Some(lane) = self.can_admit(next_slot) else {
                        idle(&mut self.edges[slot].credit, rate);
                        break;
                    };
                    self.edges[slot].queue.pop_front();
                    self.edges[slot].credit -= 1.0;
                    self.lift(v);
                    let tt = self.travel_time(next_slot) / spt;
                    self.place(v, next_slot, lane, carry / tt);
                    self.vehicles[v as usize].route_index += 1;
                    events.push(SimEvent::EnteredEdge {
                        vehicle: VehicleId(v),
                        edge: next,
                        tick: t,
                    });
                }
            }
        }
    }

    /// Forces an on-network vehicle to halt until `until` (exclusive).
    /// Vehicles behind it on the same edge cannot pass.
    pub fn stop_vehicle(&mut self, id: VehicleId, until: Tick) -> Result<(), WorldError> {
        let veh = self
            .vehicles
            .get_mut(id.0 as usize)
            .ok_or(WorldError::UnknownVehicle(id))?;
        if !veh.state.on_network() {
            return Err(WorldError::NotOnNetwork(id));
        }
        if !matches!(veh.state, VehicleState::Stopped { .. }) {
            self.stopped.push(id.0);
        }
        veh.state = VehicleState::Stopped { until };
        Ok(())
    }

    /// Resets an on-network vehicle's progress (used when an injection
    /// catches a vehicle at the entrance of its trigger edge).
    pub fn set_progress(&mut self, id: VehicleId, progress: f64) -> Result<(), WorldError> {
        let veh = self
            .vehicles
            .get_mut(id.0 as usize)
            .ok_or(WorldError::UnknownVehicle(id))?;
        if !veh.state.on_network() || veh.progress >= 1.0 {
            return Err(WorldError::NotOnNetwork(id));
        }
        veh.progress = progress.clamp(0.0, 1.0 - f64::EPSILON);
        Ok(())
    }

    /// The rest of the vehicle's route after its current edge.
    pub fn remaining_route(&self, id: VehicleId) -> Result<Route, WorldError> {
        let v = self
            .vehicles
            .get(id.0 as usize)
            .ok_or(WorldError::UnknownVehicle(id))?;
        if !v.state.on_network() {
            return Err(WorldError::NotOnNetwork(id));
        }
        Ok(v.current_route.suffix(&self.net, v.route_index + 1))
    }

    /// Intersection at the end of the vehicle's current edge.
    pub fn next_intersection(&self, id: VehicleId) -> Option<IntersectionId> {
        let v = self.vehicles.get(id.0 as usize)?;
        v.state
            .on_network()
            .then(|| self.net.edges()[v.edge_slot].to)
    }

    /// Replaces the route beyond the current edge. The vehicle finishes its
    /// current edge and continues along `suffix` from the next intersection.
    pub fn switch_route(&mut self, id: VehicleId, suffix: &Route) -> Result<(), WorldError> {
        let at = self.next_intersection(id).ok_or(WorldError::NotOnNetwork(id))?;
        let v = &self.vehicles[id.0 as usize];
        if suffix.origin != at || suffix.destination != v.destination {
            return Err(WorldError::InvalidTrip {
                vehicle: id,
                reason: format!("replacement route must run {at} -> {}", v.destination),
            });
        }
        suffix.validate(&self.net)?;
        let current = v.current_route.edges[v.route_index];
        let mut edges = Vec::with_capacity(suffix.edges.len() + 1);
        edges.push(current);
        edges.extend_from_slice(&suffix.edges);
        let origin = self.net.edges()[v.edge_slot].from;
        let v = &mut self.vehicles[id.0 as usize];
        v.current_route = Route {
            origin,
            destination: v.destination,
            edges,
        };
        v.route_index = 0;
        v.switches += 1;
        Ok(())
    }

    /// Changes an edge's physical and open lane counts. Lanes being removed
    /// must be empty.
    pub fn set_lanes(&mut self, edge: EdgeId, lanes: u32, open_lanes: u32) -> Result<(), String> {
        let slot = self.net.edge_slot(edge).ok_or("unknown edge")?;
        let es = &mut self.edges[slot];
        if lanes == 0 || open_lanes > lanes {
            return Err(format!("{edge}: invalid lanes {lanes}/{open_lanes}"));
        }
        if es.lane_counts[lanes.min(es.lanes) as usize..].iter().any(|&c| c > 0) {
            return Err(format!("{edge}: removed lane still occupied"));
        }
        es.lane_counts.resize(lanes as usize, 0);
        es.lanes = lanes;
        es.open_lanes = open_lanes;
        Ok(())
    }
}

impl LaneOccupancy for World {
    fn lane_occupancy(&self, edge: EdgeId, lane: u32) -> u32 {
        self.edge_state(edge)
            .and_then(|e| e.lane_counts.get(lane as usize).copied())
            .unwrap_or(0)
    }
}

/// Absorbs rounding in accumulated discharge credit.
const CREDIT_EPS: f64 = 1e-9;

/// Unused green does not pile up: with nothing to discharge, the approach
/// keeps just enough credit to release one vehicle on the next tick.
fn idle(credit: &mut f64, rate: f64) {
    *credit = credit.min((1.0 - rate).max(0.0));
}
