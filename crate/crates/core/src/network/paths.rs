//! Least-cost routing and loop-free k-shortest paths.
//!
//! Ties between equal-cost paths are broken by the lexicographically smallest
//! edge-id sequence, which makes every result a deterministic function of the
//! graph and the costs. Lexicographic minimality is guaranteed for strictly
//! positive costs; zero-cost edges still yield a minimum-cost route.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::sync::{Arc, Mutex};

use super::{Edge, IntersectionId, RoadNetwork, Route, RouteError};

const NONE: usize = usize::MAX;

pub fn free_flow_cost(edge: &Edge) -> f64 {
    edge.free_flow_time()
}

/// Forward sum of edge costs along a route. Unknown edges contribute nothing.
pub fn route_cost<F: Fn(&Edge) -> f64>(net: &RoadNetwork, route: &Route, cost: F) -> f64 {
    route
        .edges
        .iter()
        .filter_map(|e| net.edge(*e))
        .fold(0.0, |acc, e| acc + cost(e))
}

fn edge_costs<F: Fn(&Edge) -> f64>(net: &RoadNetwork, cost: F) -> Vec<f64> {
    net.edges().iter().map(cost).collect()
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem {
    dist: f64,
    node: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Cost-to-destination for every node, with a shortest-path successor tree.
#[derive(Debug, Clone)]
pub struct DistanceField {
    destination: usize,
    dist: Vec<f64>,
    succ: Vec<usize>,
}

impl DistanceField {
    pub fn distance(&self, node_slot: usize) -> f64 {
        self.dist[node_slot]
    }
}

struct Mask<'a> {
    edges: &'a [bool],
    nodes: &'a [bool],
}

impl Mask<'_> {
    fn edge_ok(&self, e: usize) -> bool {
        self.edges.is_empty() || !self.edges[e]
    }
    fn node_ok(&self, n: usize) -> bool {
        self.nodes.is_empty() || !self.nodes[n]
    }
}

const OPEN: Mask<'static> = Mask {
    edges: &[],
    nodes: &[],
};

fn reverse_dijkstra(net: &RoadNetwork, costs: &[f64], dest: usize, mask: &Mask) -> DistanceField {
    let n = net.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut succ = vec![NONE; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    if mask.node_ok(dest) {
        dist[dest] = 0.0;
        heap.push(HeapItem { dist: 0.0, node: dest });
    }
    while let Some(HeapItem { dist: d, node: v }) = heap.pop() {
        if done[v] {
            continue;
        }
        done[v] = true;
        for &e in net.incoming_slots(v) {
            if !mask.edge_ok(e) {
                continue;
            }
            let u = net.edge_from_slot(e);
            if !mask.node_ok(u) || done[u] {
                continue;
            }
            let nd = d + costs[e];
            if nd < dist[u] || (nd == dist[u] && succ[u] != NONE && e < succ[u]) {
                dist[u] = nd;
                succ[u] = e;
                heap.push(HeapItem { dist: nd, node: u });
            }
        }
    }
    DistanceField {
        destination: dest,
        dist,
        succ,
    }
}

fn is_tight(edge_cost: f64, d_next: f64, d_here: f64) -> bool {
    let tol = 1e-9 * d_here.abs().max(1.0);
    (edge_cost + d_next - d_here).abs() <= tol
}

/// Lexicographically smallest minimum-cost edge-slot sequence from `origin`.
fn lexmin_path(
    net: &RoadNetwork,
    costs: &[f64],
    field: &DistanceField,
    origin: usize,
    mask: &Mask,
) -> Option<Vec<usize>> {
    if !field.dist[origin].is_finite() {
        return None;
    }
    let mut visited = vec![false; net.node_count()];
    let mut path = Vec::new();
    let mut at = origin;
    visited[at] = true;
    while at != field.destination {
        let next = net.outgoing_slots(at).iter().copied().find(|&e| {
            let v = net.edge_to_slot(e);
            mask.edge_ok(e)
                && mask.node_ok(v)
                && !visited[v]
                && field.dist[v].is_finite()
                && is_tight(costs[e], field.dist[v], field.dist[at])
        });
        match next {
            Some(e) => {
                path.push(e);
                at = net.edge_to_slot(e);
                visited[at] = true;
            }
            None => return Some(tree_path(net, field, origin)),
        }
    }
    Some(path)
}

fn tree_path(net: &RoadNetwork, field: &DistanceField, origin: usize) -> Vec<usize> {
    let mut path = Vec::new();
    let mut at = origin;
    while at != field.destination {
        let e = field.succ[at];
        path.push(e);
        at = net.edge_to_slot(e);
    }
    path
}

fn to_route(net: &RoadNetwork, origin: usize, dest: usize, slots: &[usize]) -> Route {
    Route {
        origin: net.intersections()[origin].id,
        destination: net.intersections()[dest].id,
        edges: slots.iter().map(|&s| net.edges()[s].id).collect(),
    }
}

fn slots_of(net: &RoadNetwork, origin: IntersectionId, dest: IntersectionId) -> Result<(usize, usize), RouteError> {
    let o = net
        .node_slot(origin)
        .ok_or(RouteError::UnknownIntersection(origin))?;
    let d = net
        .node_slot(dest)
        .ok_or(RouteError::UnknownIntersection(dest))?;
    Ok((o, d))
}

/// Cost-to-`destination` field for precomputed per-slot edge costs. Lets
/// many vehicles sharing a destination reuse a single search.
pub fn distances_to(
    net: &RoadNetwork,
    destination: IntersectionId,
    costs: &[f64],
) -> Result<DistanceField, RouteError> {
    let d = net
        .node_slot(destination)
        .ok_or(RouteError::UnknownIntersection(destination))?;
    Ok(reverse_dijkstra(net, costs, d, &OPEN))
}

/// Least-cost route from `origin` using a field built by [`distances_to`]
/// with the same `costs`.
pub fn route_from_field(
    net: &RoadNetwork,
    field: &DistanceField,
    costs: &[f64],
    origin: IntersectionId,
) -> Result<Route, RouteError> {
    let o = net
        .node_slot(origin)
        .ok_or(RouteError::UnknownIntersection(origin))?;
    let slots = lexmin_path(net, costs, field, o, &OPEN).ok_or(RouteError::Unreachable {
        from: origin,
        to: net.intersections()[field.destination].id,
    })?;
    Ok(to_route(net, o, field.destination, &slots))
}

/// Minimum-cost route (Dijkstra). `cost` must be non-negative.
pub fn shortest_route<F: Fn(&Edge) -> f64>(
    net: &RoadNetwork,
    origin: IntersectionId,
    destination: IntersectionId,
    cost: F,
) -> Result<Route, RouteError> {
    let (o, d) = slots_of(net, origin, destination)?;
    if o == d {
        return Ok(Route::empty_at(origin));
    }
    let costs = edge_costs(net, cost);
    let field = reverse_dijkstra(net, &costs, d, &OPEN);
    let slots = lexmin_path(net, &costs, &field, o, &OPEN).ok_or(RouteError::Unreachable {
        from: origin,
        to: destination,
    })?;
    Ok(to_route(net, o, d, &slots))
}

#[derive(Debug, Clone)]
struct Candidate {
    cost: f64,
    slots: Vec<usize>,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl Ord for Candidate {
    // Slots are id-sorted, so slot order is edge-id order.
    fn cmp(&self, other: &Self) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then_with(|| self.slots.cmp(&other.slots))
    }
}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn forward_cost(costs: &[f64], slots: &[usize]) -> f64 {
    slots.iter().fold(0.0, |acc, &e| acc + costs[e])
}

/// Up to `k` loop-free routes in nondecreasing (cost, edge-id sequence)
/// order; the first is the shortest route (Yen's algorithm).
pub fn k_shortest_routes<F: Fn(&Edge) -> f64>(
    net: &RoadNetwork,
    origin: IntersectionId,
    destination: IntersectionId,
    k: usize,
    cost: F,
) -> Result<Vec<Route>, RouteError> {
    let (o, d) = slots_of(net, origin, destination)?;
    if k == 0 {
        // Still report unreachable destinations.
        shortest_route(net, origin, destination, &cost)?;
        return Ok(Vec::new());
    }
    if o == d {
        return Ok(vec![Route::empty_at(origin)]);
    }
    let costs = edge_costs(net, cost);
    let field = reverse_dijkstra(net, &costs, d, &OPEN);
    let first = lexmin_path(net, &costs, &field, o, &OPEN).ok_or(RouteError::Unreachable {
        from: origin,
        to: destination,
    })?;

    let mut found: Vec<Candidate> = vec![Candidate {
        cost: forward_cost(&costs, &first),
        slots: first,
    }];
    let mut pool: BTreeSet<Candidate> = BTreeSet::new();
    let mut banned_edges = vec![false; net.edge_count()];
    let mut banned_nodes = vec![false; net.node_count()];

    while found.len() < k {
        let prev = found.last().expect("at least one path").slots.clone();
        let mut spur_node = o;
        for spur_idx in 0..prev.len() {
            let root = &prev[..spur_idx];
            banned_edges.iter_mut().for_each(|b| *b = false);
            banned_nodes.iter_mut().for_each(|b| *b = false);
            for p in &found {
                if p.slots.len() > spur_idx && &p.slots[..spur_idx] == root {
                    banned_edges[p.slots[spur_idx]] = true;
                }
            }
            banned_nodes[o] = spur_node != o;
            for &e in root {
                let v = net.edge_to_slot(e);
                if v != spur_node {
                    banned_nodes[v] = true;
                }
            }
            let mask = Mask {
                edges: &banned_edges,
                nodes: &banned_nodes,
            };
            let spur_field = reverse_dijkstra(net, &costs, d, &mask);
            if let Some(spur) = lexmin_path(net, &costs, &spur_field, spur_node, &mask) {
                let mut slots = root.to_vec();
                slots.extend(spur);
                let cand = Candidate {
                    cost: forward_cost(&costs, &slots),
                    slots,
                };
                if !found.iter().any(|f| f.slots == cand.slots) {
                    pool.insert(cand);
                }
            }
            spur_node = net.edge_to_slot(prev[spur_idx]);
        }
        match pool.pop_first() {
            Some(c) => found.push(c),
            None => break,
        }
    }

    Ok(found
        .iter()
        .map(|c| to_route(net, o, d, &c.slots))
        .collect())
}

/// Up to `k` loop-free alternatives to the shortest route, cheapest first.
pub fn optional_routes<F: Fn(&Edge) -> f64>(
    net: &RoadNetwork,
    origin: IntersectionId,
    destination: IntersectionId,
    k: usize,
    cost: F,
) -> Result<Vec<Route>, RouteError> {
    if k == 0 {
        shortest_route(net, origin, destination, &cost)?;
        return Ok(Vec::new());
    }
    let mut all = k_shortest_routes(net, origin, destination, k + 1, cost)?;
    all.remove(0);
    Ok(all)
}

/// Memoized free-flow k-shortest route sets, keyed by (from, to). Safe to
/// share between concurrent runs over the same network.
#[derive(Debug)]
pub struct RouteCache {
    net: Arc<RoadNetwork>,
    depth: usize,
    entries: Mutex<HashMap<(IntersectionId, IntersectionId), Arc<Vec<Route>>>>,
}

impl RouteCache {
    /// `depth` routes are kept per pair: the shortest plus `depth - 1`
    /// alternatives.
    pub fn new(net: Arc<RoadNetwork>, depth: usize) -> Self {
        Self {
            net,
            depth: depth.max(1),
            entries: Mutex::new(HashMap::new()),
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn network(&self) -> &Arc<RoadNetwork> {
        &self.net
    }

    pub fn get(&self, from: IntersectionId, to: IntersectionId) -> Result<Arc<Vec<Route>>, RouteError> {
        if let Some(hit) = self.entries.lock().unwrap().get(&(from, to)) {
            return Ok(hit.clone());
        }
        let routes = Arc::new(k_shortest_routes(
            &self.net,
            from,
            to,
            self.depth,
            free_flow_cost,
        )?);
        self.entries
            .lock()
            .unwrap()
            .insert((from, to), routes.clone());
        Ok(routes)
    }

    pub fn shortest(&self, from: IntersectionId, to: IntersectionId) -> Result<Route, RouteError> {
        Ok(self.get(from, to)?[0].clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::EdgeId;
    use crate::network::{generate_grid, GridSpec, Intersection, Point};

    fn graph(n: u32, arcs: &[(u32, u32, f64)]) -> RoadNetwork {
        let nodes = (0..n)
            .map(|i| Intersection {
                id: IntersectionId(i),
                position: Point::new(i as f64, 0.0),
                signalized: false,
            })
            .collect();
        let edges = arcs
            .iter()
            .enumerate()
            .map(|(i, &(f, t, len))| Edge {
                id: EdgeId(i as u32),
                from: IntersectionId(f),
                to: IntersectionId(t),
                length: len,
                lanes: 1,
                free_flow_speed: 1.0,
                per_lane_capacity: 5,
                dual: None,
            })
            .collect();
        RoadNetwork::new(nodes, edges).unwrap()
    }

    #[test]
    fn triangle() {
        // A=0, B=1, C=2
        let net = graph(3, &[(0, 1, 10.0), (1, 2, 10.0), (0, 2, 25.0)]);
        let r = shortest_route(&net, IntersectionId(0), IntersectionId(2), free_flow_cost).unwrap();
        assert_eq!(r.edges, vec![EdgeId(0), EdgeId(1)]);
        assert_eq!(route_cost(&net, &r, free_flow_cost), 20.0);
    }

    #[test]
    fn identity_route() {
        let net = graph(2, &[(0, 1, 1.0)]);
        let r = shortest_route(&net, IntersectionId(1), IntersectionId(1), free_flow_cost).unwrap();
        assert!(r.is_empty());
        assert_eq!(route_cost(&net, &r, free_flow_cost), 0.0);
    }

    #[test]
    fn unreachable_and_unknown() {
        let net = graph(3, &[(0, 1, 1.0)]);
        assert!(matches!(
            shortest_route(&net, IntersectionId(0), IntersectionId(2), free_flow_cost),
            Err(RouteError::Unreachable { .. })
        ));
        assert_eq!(
            shortest_route(&net, IntersectionId(0), IntersectionId(9), free_flow_cost),
            Err(RouteError::UnknownIntersection(IntersectionId(9)))
        );
        assert!(optional_routes(&net, IntersectionId(0), IntersectionId(2), 3, free_flow_cost).is_err());
    }

    #[test]
    fn ties_pick_smallest_edge_sequence() {
        // Two equal-cost paths 0->1->3 (edges 2,3) and 0->2->3 (edges 0,1).
        let net = graph(4, &[(0, 2, 1.0), (2, 3, 1.0), (0, 1, 1.0), (1, 3, 1.0)]);
        let r = shortest_route(&net, IntersectionId(0), IntersectionId(3), free_flow_cost).unwrap();
        assert_eq!(r.edges, vec![EdgeId(0), EdgeId(1)]);
    }

    #[test]
    fn zero_k_and_single_path() {
        let net = graph(3, &[(0, 1, 1.0), (1, 2, 1.0)]);
        let o = IntersectionId(0);
        let d = IntersectionId(2);
        assert!(optional_routes(&net, o, d, 0, free_flow_cost).unwrap().is_empty());
        assert!(optional_routes(&net, o, d, 3, free_flow_cost).unwrap().is_empty());
    }

    #[test]
    fn grid_alternatives_are_loop_free_and_sorted() {
        let net = generate_grid(&GridSpec::new(3, 3, 100.0, 1, 10.0)).unwrap();
        let o = IntersectionId(0);
        let d = IntersectionId(8);
        let best = shortest_route(&net, o, d, free_flow_cost).unwrap();
        let alts = optional_routes(&net, o, d, 2, free_flow_cost).unwrap();
        assert_eq!(alts.len(), 2);
        let best_cost = route_cost(&net, &best, free_flow_cost);
        let mut last = best_cost;
        for a in &alts {
            a.validate(&net).unwrap();
            assert!(a.is_loop_free(&net));
            assert_ne!(a, &best);
            let c = route_cost(&net, a, free_flow_cost);
            assert!(c >= last);
            last = c;
        }
        assert_ne!(alts[0], alts[1]);
    }

    #[test]
    fn field_matches_direct_search() {
        let net = generate_grid(&GridSpec::new(4, 4, 100.0, 1, 10.0)).unwrap();
        let costs: Vec<f64> = net
            .edges()
            .iter()
            .map(|e| 1.0 + (e.id.0 % 5) as f64)
            .collect();
        let dest = IntersectionId(15);
        let field = distances_to(&net, dest, &costs).unwrap();
        for origin in 0..15 {
            let o = IntersectionId(origin);
            let a = route_from_field(&net, &field, &costs, o).unwrap();
            let b = shortest_route(&net, o, dest, |e| 1.0 + (e.id.0 % 5) as f64).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn cache_returns_shortest_first() {
        let net = Arc::new(generate_grid(&GridSpec::new(3, 3, 100.0, 1, 10.0)).unwrap());
        let cache = RouteCache::new(net.clone(), 3);
        let routes = cache.get(IntersectionId(0), IntersectionId(8)).unwrap();
        assert_eq!(routes.len(), 3);
        assert_eq!(
            routes[0],
            shortest_route(&net, IntersectionId(0), IntersectionId(8), free_flow_cost).unwrap()
        );
        let again = cache.get(IntersectionId(0), IntersectionId(8)).unwrap();
        assert!(Arc::ptr_eq(&routes, &again));
    }
}
