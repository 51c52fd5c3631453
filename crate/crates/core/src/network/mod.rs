//! Road graph: intersections, directed lane-bearing edges, dual pairing for
//! lane reversal, plus the on-disk network description.

mod grid;
mod paths;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use grid::{generate_grid, GridSpec};
pub use paths::{
    distances_to, free_flow_cost, k_shortest_routes, optional_routes, route_cost, route_from_field,
    shortest_route, DistanceField, RouteCache,
};

/// Version written into (and required from) network description files.
pub const NETWORK_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntersectionId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub u32);

impl fmt::Display for IntersectionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// Planar coordinates in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(&self, other: &Point, t: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

impl From<[f64; 2]> for Point {
    fn from(p: [f64; 2]) -> Self {
        Point::new(p[0], p[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intersection {
    pub id: IntersectionId,
    pub position: Point,
    #[serde(default)]
    pub signalized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub id: EdgeId,
    pub from: IntersectionId,
    pub to: IntersectionId,
    /// Meters.
    pub length: f64,
    pub lanes: u32,
    /// Meters per second.
    pub free_flow_speed: f64,
    /// Jam storage per lane, in vehicles.
    pub per_lane_capacity: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dual: Option<EdgeId>,
}

impl Edge {
    /// Free-flow traversal time in seconds.
    pub fn free_flow_time(&self) -> f64 {
        self.length / self.free_flow_speed
    }

    pub fn storage(&self) -> u32 {
        self.lanes * self.per_lane_capacity
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NetworkError {
    #[error("unsupported network format_version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },
    #[error("duplicate intersection id {0}")]
    DuplicateIntersection(IntersectionId),
    #[error("intersection {0} has a non-finite position")]
    NonFinitePosition(IntersectionId),
    #[error("duplicate edge id {0}")]
    DuplicateEdge(EdgeId),
    #[error("edge {edge} references unknown intersection {node}")]
    DanglingEndpoint { edge: EdgeId, node: IntersectionId },
    #[error("edge {0} starts and ends at the same intersection")]
    SelfLoop(EdgeId),
    #[error("edge {edge} has non-positive {field}")]
    NonPositive { edge: EdgeId, field: &'static str },
    #[error("edge {edge} names unknown dual {dual}")]
    DanglingDual { edge: EdgeId, dual: EdgeId },
    #[error("edge {edge} pairs with {dual}, but {dual} does not pair back")]
    AsymmetricDual { edge: EdgeId, dual: EdgeId },
    #[error("edge {edge} and its dual {dual} do not connect opposite endpoints")]
    DualEndpointMismatch { edge: EdgeId, dual: EdgeId },
    #[error("grid needs at least 2 rows and 2 columns, got {rows}x{cols}")]
    GridTooSmall { rows: u32, cols: u32 },
    #[error("invalid grid parameter: {0}")]
    GridParameter(&'static str),
    #[error("network description parse error: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RouteError {
    #[error("unknown intersection {0}")]
    UnknownIntersection(IntersectionId),
    #[error("unknown edge {0}")]
    UnknownEdge(EdgeId),
    #[error("no route from {from} to {to}")]
    Unreachable {
        from: IntersectionId,
        to: IntersectionId,
    },
    #[error("route is not contiguous at position {0}")]
    Discontinuous(usize),
}

/// Serialized form of a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDescription {
    pub format_version: u32,
    #[serde(default)]
    pub intersections: Vec<Intersection>,
    #[serde(default)]
    pub edges: Vec<Edge>,
}

impl NetworkDescription {
    pub fn from_toml_str(text: &str) -> Result<Self, NetworkError> {
        toml::from_str(text).map_err(|e| NetworkError::Parse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("network description always serializes")
    }
}

/// Immutable road graph. Intersections and edges are kept sorted by id; the
/// position of an element in those vectors is its "slot".
#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    intersections: Vec<Intersection>,
    edges: Vec<Edge>,
    outgoing: Vec<Vec<usize>>,
    incoming: Vec<Vec<usize>>,
    edge_to_slot: Vec<usize>,
    edge_from_slot: Vec<usize>,
    node_lookup: Option<Vec<u32>>,
    edge_lookup: Option<Vec<u32>>,
}

/// Direct id -> slot table when ids are reasonably dense.
fn dense_lookup(ids: impl Iterator<Item = u32> + Clone, len: usize) -> Option<Vec<u32>> {
    let max = ids.clone().max()? as usize;
    if max > 4 * len + 64 {
        return None;
    }
    let mut table = vec![u32::MAX; max + 1];
    for (slot, id) in ids.enumerate() {
        table[id as usize] = slot as u32;
    }
    Some(table)
}

/// Validates a description and builds the network.
pub fn load_network(desc: &NetworkDescription) -> Result<RoadNetwork, NetworkError> {
    if desc.format_version != NETWORK_FORMAT_VERSION {
        return Err(NetworkError::UnsupportedVersion {
            found: desc.format_version,
            expected: NETWORK_FORMAT_VERSION,
        });
    }
    RoadNetwork::new(desc.intersections.clone(), desc.edges.clone())
}

impl RoadNetwork {
    pub fn new(
        mut intersections: Vec<Intersection>,
        mut edges: Vec<Edge>,
    ) -> Result<Self, NetworkError> {
        intersections.sort_by_key(|i| i.id);
        for w in intersections.windows(2) {
            if w[0].id == w[1].id {
                return Err(NetworkError::DuplicateIntersection(w[0].id));
            }
        }
        for i in &intersections {
            if !i.position.x.is_finite() || !i.position.y.is_finite() {
                return Err(NetworkError::NonFinitePosition(i.id));
            }
        }
        edges.sort_by_key(|e| e.id);
        for w in edges.windows(2) {
            if w[0].id == w[1].id {
                return Err(NetworkError::DuplicateEdge(w[0].id));
            }
        }

        let node_slot = |id: IntersectionId| intersections.binary_search_by_key(&id, |i| i.id).ok();
        let mut edge_from_slot = Vec::with_capacity(edges.len());
        let mut edge_to_slot = Vec::with_capacity(edges.len());
        for e in &edges {
            let from = node_slot(e.from).ok_or(NetworkError::DanglingEndpoint {
                edge: e.id,
                node: e.from,
            })?;
            let to = node_slot(e.to).ok_or(NetworkError::DanglingEndpoint {
                edge: e.id,
                node: e.to,
            })?;
            if from == to {
                return Err(NetworkError::SelfLoop(e.id));
            }
            for (field, value) in [
                ("length", e.length),
                ("free_flow_speed", e.free_flow_speed),
            ] {
                if !(value > 0.0 && value.is_finite()) {
                    return Err(NetworkError::NonPositive { edge: e.id, field });
                }
            }
            if e.lanes == 0 {
                return Err(NetworkError::NonPositive {
                    edge: e.id,
                    field: "lanes",
                });
            }
            if e.per_lane_capacity == 0 {
                return Err(NetworkError::NonPositive {
                    edge: e.id,
                    field: "per_lane_capacity",
                });
            }
            edge_from_slot.push(from);
            edge_to_slot.push(to);
        }

        for e in &edges {
            let Some(dual_id) = e.dual else { continue };
            let Ok(d) = edges.binary_search_by_key(&dual_id, |x| x.id) else {
                return Err(NetworkError::DanglingDual {
                    edge: e.id,
                    dual: dual_id,
                });
            };
            let dual = &edges[d];
            if dual.dual != Some(e.id) || dual_id == e.id {
                return Err(NetworkError::AsymmetricDual {
                    edge: e.id,
                    dual: dual_id,
                });
            }
            if dual.from != e.to || dual.to != e.from {
                return Err(NetworkError::DualEndpointMismatch {
                    edge: e.id,
                    dual: dual_id,
                });
            }
        }

        let mut outgoing = vec![Vec::new(); intersections.len()];
        let mut incoming = vec![Vec::new(); intersections.len()];
        for (slot, (&f, &t)) in edge_from_slot.iter().zip(&edge_to_slot).enumerate() {
            outgoing[f].push(slot);
            incoming[t].push(slot);
        }

        let node_lookup = dense_lookup(intersections.iter().map(|i| i.id.0), intersections.len());
        let edge_lookup = dense_lookup(edges.iter().map(|e| e.id.0), edges.len());
        Ok(Self {
            intersections,
            edges,
            outgoing,
            incoming,
            edge_to_slot,
            edge_from_slot,
            node_lookup,
            edge_lookup,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self, NetworkError> {
        load_network(&NetworkDescription::from_toml_str(text)?)
    }

    pub fn to_description(&self) -> NetworkDescription {
        NetworkDescription {
            format_version: NETWORK_FORMAT_VERSION,
            intersections: self.intersections.clone(),
            edges: self.edges.clone(),
        }
    }

    pub fn to_toml_string(&self) -> String {
        self.to_description().to_toml_string()
    }

    pub fn intersections(&self) -> &[Intersection] {
        &self.intersections
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.intersections.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node_slot(&self, id: IntersectionId) -> Option<usize> {
        match &self.node_lookup {
            Some(t) => t.get(id.0 as usize).filter(|s| **s != u32::MAX).map(|s| *s as usize),
            None => self.intersections.binary_search_by_key(&id, |i| i.id).ok(),
        }
    }

    pub fn edge_slot(&self, id: EdgeId) -> Option<usize> {
        match &self.edge_lookup {
            Some(t) => t.get(id.0 as usize).filter(|s| **s != u32::MAX).map(|s| *s as usize),
            None => self.edges.binary_search_by_key(&id, |e| e.id).ok(),
        }
    }

    pub fn intersection(&self, id: IntersectionId) -> Option<&Intersection> {
        self.node_slot(id).map(|s| &self.intersections[s])
    }

    pub fn edge(&self, id: EdgeId) -> Option<&Edge> {
        self.edge_slot(id).map(|s| &self.edges[s])
    }

    /// Outgoing edge slots of a node slot, in edge-id order.
    pub fn outgoing_slots(&self, node_slot: usize) -> &[usize] {
        &self.outgoing[node_slot]
    }

    /// Incoming edge slots of a node slot, in edge-id order.
    pub fn incoming_slots(&self, node_slot: usize) -> &[usize] {
        &self.incoming[node_slot]
    }

    pub fn outgoing(&self, id: IntersectionId) -> impl Iterator<Item = &Edge> + '_ {
        let slots: &[usize] = self.node_slot(id).map_or(&[], |s| &self.outgoing[s]);
        slots.iter().map(move |&e| &self.edges[e])
    }

    pub fn incoming(&self, id: IntersectionId) -> impl Iterator<Item = &Edge> + '_ {
        let slots: &[usize] = self.node_slot(id).map_or(&[], |s| &self.incoming[s]);
        slots.iter().map(move |&e| &self.edges[e])
    }

    pub fn edge_from_slot(&self, edge_slot: usize) -> usize {
        self.edge_from_slot[edge_slot]
    }

    pub fn edge_to_slot(&self, edge_slot: usize) -> usize {
        self.edge_to_slot[edge_slot]
    }

    /// Point at `progress` in [0, 1] along an edge.
    pub fn point_on_edge(&self, edge_slot: usize, progress: f64) -> Point {
        let a = self.intersections[self.edge_from_slot[edge_slot]].position;
        let b = self.intersections[self.edge_to_slot[edge_slot]].position;
        a.lerp(&b, progress)
    }

    /// Sum of edge lengths over a route, in meters.
    pub fn route_length(&self, route: &Route) -> f64 {
        route
            .edges
            .iter()
            .filter_map(|e| self.edge(*e))
            .map(|e| e.length)
            .sum()
    }

    /// Dual pairs as (lower id, higher id), sorted.
    pub fn dual_pairs(&self) -> Vec<(EdgeId, EdgeId)> {
        self.edges
            .iter()
            .filter_map(|e| e.dual.filter(|d| e.id < *d).map(|d| (e.id, d)))
            .collect()
    }
}

/// An ordered edge sequence from `origin` to `destination`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Route {
    pub origin: IntersectionId,
    pub destination: IntersectionId,
    pub edges: Vec<EdgeId>,
}

impl Route {
    pub fn empty_at(node: IntersectionId) -> Self {
        Self {
            origin: node,
            destination: node,
            edges: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// The sub-route starting at edge index `from`.
    pub fn suffix(&self, net: &RoadNetwork, from: usize) -> Route {
        let edges = self.edges[from.min(self.edges.len())..].to_vec();
        let origin = edges
            .first()
            .and_then(|e| net.edge(*e))
            .map_or(self.destination, |e| e.from);
        Route {
            origin,
            destination: self.destination,
            edges,
        }
    }

    /// Intersections visited, origin first.
    pub fn nodes(&self, net: &RoadNetwork) -> Vec<IntersectionId> {
        let mut nodes = vec![self.origin];
        nodes.extend(self.edges.iter().filter_map(|e| net.edge(*e)).map(|e| e.to));
        nodes
    }

    /// Checks endpoint and consecutive-edge adjacency.
    pub fn validate(&self, net: &RoadNetwork) -> Result<(), RouteError> {
        let mut at = self.origin;
        if net.node_slot(at).is_none() {
            return Err(RouteError::UnknownIntersection(at));
        }
        for (i, id) in self.edges.iter().enumerate() {
            let e = net.edge(*id).ok_or(RouteError::UnknownEdge(*id))?;
            if e.from != at {
                return Err(RouteError::Discontinuous(i));
            }
            at = e.to;
        }
        if at != self.destination {
            return Err(RouteError::Discontinuous(self.edges.len()));
        }
        Ok(())
    }

    pub fn is_loop_free(&self, net: &RoadNetwork) -> bool {
        let mut nodes = self.nodes(net);
        let n = nodes.len();
        nodes.sort();
        nodes.dedup();
        nodes.len() == n
    }
}
