//! Range-gated beacon exchange between vehicles and the neighbor tables
//! built from it.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::network::{EdgeId, Point, RoadNetwork};
use crate::rng::unit_draw;
use crate::traffic::{Tick, VehicleId, VehicleState, World};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommsParams {
    /// Meters; pairs at exactly this distance still exchange.
    pub range: f64,
    /// Ticks between beacon rounds.
    pub interval: u64,
    /// Route edges announced, current edge included.
    pub horizon: usize,
    /// Per-delivery loss probability. Zero gives the ideal channel.
    pub drop_probability: f64,
}

impl Default for CommsParams {
    fn default() -> Self {
        Self {
            range: 5000.0,
            interval: 5,
            horizon: 5,
            drop_probability: 0.0,
        }
    }
}

impl CommsParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.range > 0.0) {
            return Err(format!("comms range must be positive, got {}", self.range));
        }
        if self.interval < 1 {
            return Err("comms interval must be at least 1 tick".into());
        }
        if self.horizon < 1 {
            return Err("comms horizon must be at least 1 edge".into());
        }
        if !(0.0..=1.0).contains(&self.drop_probability) {
            return Err(format!("drop probability {} outside [0, 1]", self.drop_probability));
        }
        Ok(())
    }

    /// Entries older than this many ticks are evicted.
    pub fn staleness(&self) -> u64 {
        2 * self.interval
    }

    pub fn is_round(&self, tick: Tick) -> bool {
        tick % self.interval == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeaconMessage {
    pub sender: VehicleId,
    pub location: Point,
    /// m/s; zero while queued or stopped.
    pub speed: f64,
    /// Current edge first.
    pub next_edges: Vec<EdgeId>,
    /// Every edge on any optional route, sorted.
    pub optional_edges: Vec<EdgeId>,
    pub issued_at: Tick,
}

/// Builds the beacon of an on-network vehicle.
pub fn make_beacon(world: &World, id: VehicleId, params: &CommsParams) -> Option<BeaconMessage> {
    let v = world.vehicle(id)?;
    if !v.state.on_network() {
        return None;
    }
    let mut optional_edges: Vec<EdgeId> = v.optional_routes.iter().flat_map(|r| r.edges.iter().copied()).collect();
    optional_edges.sort_unstable();
    optional_edges.dedup();
    Some(BeaconMessage {
        sender: id,
        location: world.location(id)?,
        speed: if v.state == VehicleState::Moving { world.speed(id) } else { 0.0 },
        next_edges: v.next_edges(params.horizon).to_vec(),
        optional_edges,
        issued_at: world.tick(),
    })
}

/// Beacons of every on-network vehicle, in vehicle id order.
pub fn collect_beacons(world: &World, params: &CommsParams) -> Vec<Arc<BeaconMessage>> {
    world
        .vehicles()
        .iter()
        .filter_map(|v| make_beacon(world, v.id, params).map(Arc::new))
        .collect()
}

/// One symmetric exchange: entry `i` of the result holds the beacons
/// delivered to the sender of `beacons[i]`, in sender order. With a nonzero
/// drop probability each direction of each pair is lost independently,
/// decided by a hash of (`seed`, tick, receiver, sender).
pub fn broadcast_round(beacons: &[Arc<BeaconMessage>], params: &CommsParams, seed: u64) -> Vec<Vec<Arc<BeaconMessage>>> {
    let n = beacons.len();
    let mut inbox: Vec<Vec<Arc<BeaconMessage>>> = vec![Vec::new(); n];
    let r2 = params.range * params.range;
    let lossy = params.drop_probability > 0.0;
    let delivered = |to: &BeaconMessage, from: &BeaconMessage| {
        !lossy || unit_draw(seed, &[to.issued_at, u64::from(to.sender.0), u64::from(from.sender.0)]) >= params.drop_probability
    };
    for i in 0..n {
        let a = &beacons[i];
        for j in i + 1..n {
            let b = &beacons[j];
            let dx = a.location.x - b.location.x;
            let dy = a.location.y - b.location.y;
            if dx * dx + dy * dy <= r2 {
                if delivered(a, b) {
                    inbox[i].push(b.clone());
                }
                if delivered(b, a) {
                    inbox[j].push(a.clone());
                }
            }
        }
    }
    // pairs are visited in sender order, so each inbox is already sorted
    // when the beacons are
    if !beacons.is_sorted_by_key(|m| m.sender) {
        for list in &mut inbox {
            list.sort_by_key(|m| m.sender);
        }
    }
    inbox
}

/// Latest beacon per neighbor, sorted by sender.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTable {
    pub owner: VehicleId,
    entries: Vec<Arc<BeaconMessage>>,
}

impl NeighborTable {
    pub fn new(owner: VehicleId) -> Self {
        Self {
            owner,
            entries: Vec::new(),
        }
    }

    pub fn entries(&self) -> &[Arc<BeaconMessage>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, sender: VehicleId) -> Option<&BeaconMessage> {
        self.entries
            .binary_search_by_key(&sender, |m| m.sender)
            .ok()
            .map(|i| &*self.entries[i])
    }
}

/// Merges received beacons (newest per sender wins, own beacons ignored)
/// and evicts entries older than twice the beacon interval.
pub fn update_neighbor_table(table: &mut NeighborTable, received: &[Arc<BeaconMessage>], tick: Tick, params: &CommsParams) {
    let owner = table.owner;
    let mut incoming: Vec<&Arc<BeaconMessage>> = received.iter().filter(|m| m.sender != owner).collect();
    if !incoming.windows(2).all(|w| w[0].sender < w[1].sender) {
        incoming.sort_by_key(|m| (m.sender, std::cmp::Reverse(m.issued_at)));
        incoming.dedup_by_key(|m| m.sender);
    }
    let horizon = params.staleness();
    let fresh = |m: &Arc<BeaconMessage>| tick.saturating_sub(m.issued_at) <= horizon;

    let old = std::mem::take(&mut table.entries);
    let mut merged = Vec::with_capacity(old.len().max(incoming.len()));
    let mut old = old.into_iter().peekable();
    let mut incoming = incoming.into_iter().peekable();
    loop {
        let take = match (old.peek(), incoming.peek()) {
            (Some(a), Some(b)) if a.sender == b.sender => {
                let a = old.next().expect("peeked");
                let b = incoming.next().expect("peeked");
                if b.issued_at >= a.issued_at { b.clone() } else { a }
            }
            (Some(a), Some(b)) if a.sender < b.sender => old.next().expect("peeked"),
            (Some(_), None) => old.next().expect("peeked"),
            (_, Some(_)) => incoming.next().expect("peeked").clone(),
            (None, None) => break,
        };
        if fresh(&take) {
            merged.push(take);
        }
    }
    table.entries = merged;
}

/// Number of distinct neighbors announcing each edge among their next
/// edges. Optional-route edges are not counted.
pub fn count_vehicles_per_edge(table: &NeighborTable, edges: &[EdgeId]) -> Vec<(EdgeId, u32)> {
    let mut out: Vec<(EdgeId, u32)> = edges.iter().map(|e| (*e, 0)).collect();
    out.sort();
    out.dedup();
    for m in table.entries() {
        for e in &m.next_edges {
            if let Ok(i) = out.binary_search_by_key(e, |(id, _)| *id) {
                out[i].1 += 1;
            }
        }
    }
    out
}

/// Dense per-edge counts for one table, reusable across vehicles.
#[derive(Debug, Clone)]
pub struct EdgeCounter {
    counts: Vec<u32>,
    queues: Vec<u32>,
    touched: Vec<usize>,
}

impl EdgeCounter {
    pub fn new(net: &RoadNetwork) -> Self {
        Self {
            counts: vec![0; net.edge_count()],
            queues: vec![0; net.edge_count()],
            touched: Vec::new(),
        }
    }

    fn reset(&mut self) {
        for &s in &self.touched {
            self.counts[s] = 0;
            self.queues[s] = 0;
        }
        self.touched.clear();
    }

    #[inline]
    fn add(&mut self, s: usize, queued: bool) {
        if self.counts[s] == 0 {
            self.touched.push(s);
        }
        self.counts[s] += 1;
        if queued {
            self.queues[s] += 1;
        }
    }

    /// Resets and counts the table. A neighbor also counts toward the queue
    /// of its current edge when it reports zero speed.
    pub fn fill(&mut self, net: &RoadNetwork, table: &NeighborTable) {
        self.reset();
        for m in table.entries() {
            for (k, e) in m.next_edges.iter().enumerate() {
                if let Some(s) = net.edge_slot(*e) {
                    self.add(s, k == 0 && m.speed == 0.0);
                }
            }
        }
    }

    pub fn count(&self, slot: usize) -> u32 {
        self.counts[slot]
    }

    pub fn queue(&self, slot: usize) -> u32 {
        self.queues[slot]
    }
}

/// Beacon rounds for a whole fleet, with each neighbor table kept as
/// (sender, tick) pairs into the retained rounds. Gives the same tables and
/// counts as `collect_beacons`, `broadcast_round` and
/// `update_neighbor_table` without allocating per message.
#[derive(Debug, Clone)]
pub struct BeaconExchange {
    params: CommsParams,
    seed: u64,
    rounds: VecDeque<Round>,
    spare: Vec<Round>,
    tables: Vec<Vec<(u32, Tick)>>,
    incoming: Vec<Vec<u32>>,
    merged: Vec<(u32, Tick)>,
}

#[derive(Debug, Clone, Default)]
struct Round {
    tick: Tick,
    /// Vehicle id to beacon index, `u32::MAX` when silent.
    index: Vec<u32>,
    senders: Vec<u32>,
    location: Vec<Point>,
    stopped: Vec<bool>,
    /// Beacon `i` announces `slots[offsets[i]..offsets[i + 1]]`.
    offsets: Vec<usize>,
    slots: Vec<usize>,
}

impl Round {
    fn reset(&mut self, vehicles: usize, tick: Tick) {
        self.tick = tick;
        self.index.clear();
        self.index.resize(vehicles, u32::MAX);
        self.senders.clear();
        self.location.clear();
        self.stopped.clear();
        self.offsets.clear();
        self.offsets.push(0);
        self.slots.clear();
    }
}

impl BeaconExchange {
    pub fn new(vehicles: usize, params: CommsParams, seed: u64) -> Self {
        Self {
            params,
            seed,
            rounds: VecDeque::new(),
            spare: Vec::new(),
            tables: vec![Vec::new(); vehicles],
            incoming: Vec::new(),
            merged: Vec::new(),
        }
    }

    /// Every on-network vehicle beacons and updates its table.
    pub fn round(&mut self, world: &World) {
        let t = world.tick();
        let net = world.network();
        let horizon = self.params.staleness();
        while self.rounds.front().is_some_and(|r| t.saturating_sub(r.tick) > horizon) {
            let old = self.rounds.pop_front().expect("front");
            self.spare.push(old);
        }
        let n = world.vehicles().len();
        if self.tables.len() < n {
            self.tables.resize(n, Vec::new());
        }
        let mut r = self.spare.pop().unwrap_or_default();
        r.reset(n, t);
        for v in world.vehicles() {
            let Some(location) = world.location(v.id) else { continue };
            r.index[v.id.0 as usize] = r.senders.len() as u32;
            r.senders.push(v.id.0);
            r.location.push(location);
            r.stopped.push(v.state != VehicleState::Moving);
            r.slots.extend(v.next_edges(self.params.horizon).iter().map(|e| net.edge_slot(*e).expect("route edge")));
            r.offsets.push(r.slots.len());
        }

        let m = r.senders.len();
        if self.incoming.len() < m {
            self.incoming.resize(m, Vec::new());
        }
        for list in &mut self.incoming[..m] {
            list.clear();
        }
        let r2 = self.params.range * self.params.range;
        let (p, seed) = (self.params.drop_probability, self.seed);
        let delivered = |to: u32, from: u32| p <= 0.0 || unit_draw(seed, &[t, u64::from(to), u64::from(from)]) >= p;
        for a in 0..m {
            let (pa, sa) = (r.location[a], r.senders[a]);
            for b in a + 1..m {
                let pb = r.location[b];
                let (dx, dy) = (pa.x - pb.x, pa.y - pb.y);
                if dx * dx + dy * dy <= r2 {
                    let sb = r.senders[b];
                    if delivered(sa, sb) {
                        self.incoming[a].push(sb);
                    }
                    if delivered(sb, sa) {
                        self.incoming[b].push(sa);
                    }
                }
            }
        }

        for a in 0..m {
            let table = &mut self.tables[r.senders[a] as usize];
            let fresh = &self.incoming[a];
            self.merged.clear();
            let (mut i, mut j) = (0, 0);
            while i < table.len() || j < fresh.len() {
                let next = match (table.get(i), fresh.get(j)) {
                    (Some(&(s, _)), Some(&f)) if s == f => {
                        i += 1;
                        j += 1;
                        (f, t)
                    }
                    (Some(&old), Some(&f)) if old.0 < f => {
                        i += 1;
                        old
                    }
                    (Some(&old), None) => {
                        i += 1;
                        old
                    }
                    (_, Some(&f)) => {
                        j += 1;
                        (f, t)
                    }
                    (None, None) => unreachable!(),
                };
                if t.saturating_sub(next.1) <= horizon {
                    self.merged.push(next);
                }
            }
            std::mem::swap(table, &mut self.merged);
        }
        self.rounds.push_back(r);
    }

    /// Neighbors in `owner`'s table with the tick of the beacon kept.
    pub fn neighbors(&self, owner: VehicleId) -> impl Iterator<Item = (VehicleId, Tick)> + '_ {
        self.tables.get(owner.0 as usize).into_iter().flatten().map(|&(s, t)| (VehicleId(s), t))
    }

    /// Same result as `EdgeCounter::fill` on the owner's table.
    pub fn fill(&self, owner: VehicleId, counter: &mut EdgeCounter) {
        counter.reset();
        let Some(table) = self.tables.get(owner.0 as usize) else { return };
        for &(sender, tick) in table {
            let r = self.rounds.iter().rev().find(|r| r.tick == tick).expect("retained round");
            let i = r.index[sender as usize] as usize;
            let queued = r.stopped[i];
            for (k, &s) in r.slots[r.offsets[i]..r.offsets[i + 1]].iter().enumerate() {
                counter.add(s, k == 0 && queued);
            }
        }
    }
}
