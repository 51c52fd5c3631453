#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vamsim::network::{Edge, EdgeId, Intersection, IntersectionId, Point, RoadNetwork};

/// Random directed graph with integer edge lengths (so path sums are exact)
/// and free-flow speed 1, i.e. free-flow cost == length.
pub fn random_graph(seed: u64) -> RoadNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: u32 = rng.random_range(2..=8);
    let density: f64 = rng.random_range(0.15..0.6);
    let nodes = (0..n)
        .map(|i| Intersection {
            id: IntersectionId(i),
            position: Point::new(i as f64, 0.0),
            signalized: false,
        })
        .collect();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && rng.random_bool(density) {
                edges.push(Edge {
                    id: EdgeId(edges.len() as u32 * 3 + rng.random_range(0..3)),
                    from: IntersectionId(a),
                    to: IntersectionId(b),
                    length: rng.random_range(1..=6) as f64,
                    lanes: 1,
                    free_flow_speed: 1.0,
                    per_lane_capacity: 10,
                    dual: None,
                });
            }
        }
    }
    RoadNetwork::new(nodes, edges).unwrap()
}

/// Every simple path from `o` to `d` as (forward cost sum, edge ids), sorted
/// by cost then edge-id sequence.
pub fn enumerate_simple_paths(
    net: &RoadNetwork,
    o: IntersectionId,
    d: IntersectionId,
) -> Vec<(f64, Vec<EdgeId>)> {
    fn dfs(
        net: &RoadNetwork,
        at: IntersectionId,
        d: IntersectionId,
        seen: &mut Vec<IntersectionId>,
        path: &mut Vec<EdgeId>,
        out: &mut Vec<(f64, Vec<EdgeId>)>,
    ) {
        if at == d {
            let cost = path
                .iter()
                .fold(0.0, |acc, e| acc + net.edge(*e).unwrap().free_flow_time());
            out.push((cost, path.clone()));
            return;
        }
        let next: Vec<(EdgeId, IntersectionId)> =
            net.outgoing(at).map(|e| (e.id, e.to)).collect();
        for (e, to) in next {
            if seen.contains(&to) {
                continue;
            }
            seen.push(to);
            path.push(e);
            dfs(net, to, d, seen, path, out);
            path.pop();
            seen.pop();
        }
    }
    let mut out = Vec::new();
    dfs(net, o, d, &mut vec![o], &mut Vec::new(), &mut out);
    out.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    out
}

/// Checks shortest_route and optional_routes(k) for every O-D pair and
/// k in 0..=4 against the enumeration. Returns the number of comparisons.
pub fn check_graph_against_oracle(net: &RoadNetwork) -> Result<usize, String> {
    use vamsim::network::{free_flow_cost, optional_routes, route_cost, shortest_route};
    let ids: Vec<IntersectionId> = net.intersections().iter().map(|i| i.id).collect();
    let mut checks = 0;
    for &o in &ids {
        for &d in &ids {
            if o == d {
                continue;
            }
            let truth = enumerate_simple_paths(net, o, d);
            let best = shortest_route(net, o, d, free_flow_cost);
            match (truth.first(), best) {
                (None, Err(_)) => {}
                (Some((c, p)), Ok(r)) => {
                    let got = route_cost(net, &r, free_flow_cost);
                    if got != *c || &r.edges != p {
                        return Err(format!("{o}->{d}: got {got} {:?}, want {c} {p:?}", r.edges));
                    }
                }
                (t, b) => return Err(format!("{o}->{d}: reachability mismatch {t:?} vs {b:?}")),
            }
            checks += 1;
            if truth.is_empty() {
                continue;
            }
            for k in 0..=4usize {
                let alts = optional_routes(net, o, d, k, free_flow_cost).map_err(|e| e.to_string())?;
                let want: Vec<&(f64, Vec<EdgeId>)> = truth.iter().skip(1).take(k).collect();
                if alts.len() != want.len() {
                    return Err(format!("{o}->{d} k={k}: {} alternatives, want {}", alts.len(), want.len()));
                }
                for (a, (c, p)) in alts.iter().zip(want) {
                    if &a.edges != p || route_cost(net, a, free_flow_cost) != *c {
                        return Err(format!("{o}->{d} k={k}: got {:?}, want {p:?}", a.edges));
                    }
                    if !a.is_loop_free(net) || a.validate(net).is_err() {
                        return Err(format!("{o}->{d}: invalid alternative {:?}", a.edges));
                    }
                }
                checks += 1;
            }
        }
    }
    Ok(checks)
}
