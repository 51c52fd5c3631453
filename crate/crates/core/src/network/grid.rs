use serde::{Deserialize, Serialize};

use super::{Edge, EdgeId, Intersection, IntersectionId, NetworkError, Point, RoadNetwork};

/// Meters of lane per stored vehicle at jam density.
const JAM_SPACING_M: f64 = 7.5;

/// Parameters of a synthetic Manhattan grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub rows: u32,
    pub cols: u32,
    #[serde(default = "GridSpec::default_block")]
    pub block_length: f64,
    #[serde(default = "GridSpec::default_lanes")]
    pub lanes: u32,
    #[serde(default = "GridSpec::default_speed")]
    pub speed: f64,
    /// Defaults to `block_length / 7.5 m`.
    #[serde(default)]
    pub per_lane_capacity: Option<u32>,
    #[serde(default = "GridSpec::default_signalized")]
    pub signalized: bool,
}

impl GridSpec {
    fn default_block() -> f64 {
        1500.0
    }
    fn default_lanes() -> u32 {
        2
    }
    fn default_speed() -> f64 {
        13.9
    }
    fn default_signalized() -> bool {
        true
    }

    pub fn new(rows: u32, cols: u32, block_length: f64, lanes: u32, speed: f64) -> Self {
        Self {
            rows,
            cols,
            block_length,
            lanes,
            speed,
            per_lane_capacity: None,
            signalized: true,
        }
    }

    pub fn lane_capacity(&self) -> u32 {
        self.per_lane_capacity
            .unwrap_or_else(|| ((self.block_length / JAM_SPACING_M).floor() as u32).max(1))
    }
}

/// Builds a `rows x cols` grid. Intersection `(r, c)` gets id `r * cols + c`
/// and sits at `(c * block, r * block)`. Every adjacent pair is joined by two
/// dual-paired edges; ids are assigned walking intersections in id order,
/// eastward pair first, then northward pair.
pub fn generate_grid(spec: &GridSpec) -> Result<RoadNetwork, NetworkError> {
    let GridSpec {
        rows,
        cols,
        block_length,
        lanes,
        speed,
        ..
    } = *spec;
    if rows < 2 || cols < 2 {
        return Err(NetworkError::GridTooSmall { rows, cols });
    }
    if !(block_length > 0.0 && block_length.is_finite()) {
        return Err(NetworkError::GridParameter("block_length must be positive"));
    }
    if !(speed > 0.0 && speed.is_finite()) {
        return Err(NetworkError::GridParameter("speed must be positive"));
    }
    if lanes == 0 {
        return Err(NetworkError::GridParameter("lanes must be at least 1"));
    }
    let capacity = spec.lane_capacity();

    let id_of = |r: u32, c: u32| IntersectionId(r * cols + c);
    let mut intersections = Vec::with_capacity((rows * cols) as usize);
    for r in 0..rows {
        for c in 0..cols {
            intersections.push(Intersection {
                id: id_of(r, c),
                position: Point::new(c as f64 * block_length, r as f64 * block_length),
                signalized: spec.signalized,
            });
        }
    }

    let mut edges = Vec::new();
    let mut push_pair = |a: IntersectionId, b: IntersectionId| {
        let fwd = EdgeId(edges.len() as u32);
        let back = EdgeId(fwd.0 + 1);
        let mk = |id, from, to, dual| Edge {
            id,
            from,
            to,
            length: block_length,
            lanes,
            free_flow_speed: speed,
            per_lane_capacity: capacity,
            dual: Some(dual),
        };
        edges.push(mk(fwd, a, b, back));
        edges.push(mk(back, b, a, fwd));
    };
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                push_pair(id_of(r, c), id_of(r, c + 1));
            }
            if r + 1 < rows {
                push_pair(id_of(r, c), id_of(r + 1, c));
            }
        }
    }

    RoadNetwork::new(intersections, edges)
}
