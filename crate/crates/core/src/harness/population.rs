use std::collections::{HashMap, VecDeque};

use rand::Rng;

use super::HarnessError;
use crate::network::{IntersectionId, RoadNetwork};
use crate::rng::{run_stream, stable_hash, Purpose};
use crate::traffic::{Tick, TripSpec};

const MAX_RETRIES: u32 = 100;

fn reachable_from(net: &RoadNetwork, origin: usize) -> Vec<bool> {
    let mut seen = vec![false; net.node_count()];
    let mut todo = VecDeque::from([origin]);
    seen[origin] = true;
    while let Some(n) = todo.pop_front() {
        for &e in net.outgoing_slots(n) {
            let to = net.edge_to_slot(e);
            if !seen[to] {
                seen[to] = true;
                todo.push_back(to);
            }
        }
    }
    seen
}

/// Seed-derived trips: origin and destination uniform over intersections
/// (distinct and connected, up to 100 draws per vehicle), departure
/// uniform over `[0, window]`.
pub fn generate_population(net: &RoadNetwork, vehicles: u32, window: Tick, seed: u64) -> Result<Vec<TripSpec>, HarnessError> {
    let mut rng = run_stream(seed, Purpose::Population);
    let n = net.node_count();
    if n < 2 {
        return Err(HarnessError::Config("network too small for distinct origin-destination pairs".into()));
    }
    let mut reach: HashMap<usize, Vec<bool>> = HashMap::new();
    let mut trips = Vec::with_capacity(vehicles as usize);
    for v in 0..vehicles {
        let mut placed = None;
        for _ in 0..MAX_RETRIES {
            let o = rng.random_range(0..n);
            let d = rng.random_range(0..n);
            if o == d {
                continue;
            }
            if reach.entry(o).or_insert_with(|| reachable_from(net, o))[d] {
                placed = Some((o, d));
                break;
            }
        }
        let (o, d) = placed.ok_or_else(|| {
            HarnessError::Config(format!("no connected origin-destination pair found for vehicle {v} after {MAX_RETRIES} draws"))
        })?;
        trips.push(TripSpec {
            origin: net.intersections()[o].id,
            destination: net.intersections()[d].id,
            departure: rng.random_range(0..=window),
        });
    }
    Ok(trips)
}

/// Order-sensitive digest of a trip list.
pub fn population_digest(trips: &[TripSpec]) -> u64 {
    let words: Vec<u64> = trips
        .iter()
        .flat_map(|t| [u64::from(t.origin.0), u64::from(t.destination.0), t.departure])
        .collect();
    stable_hash(trips.len() as u64, &words)
}

/// Convenience for tests and bindings.
pub fn trip(origin: u32, destination: u32, departure: Tick) -> TripSpec {
    TripSpec {
        origin: IntersectionId(origin),
        destination: IntersectionId(destination),
        departure,
    }
}
