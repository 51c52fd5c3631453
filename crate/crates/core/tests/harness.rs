use std::io::Write;
use std::path::PathBuf;

use vamsim::harness::{
    aggregate, check_comparable, compare, mean, output, population_digest, run, std_dev, HarnessError, InjectionConfig,
    NetworkConfig, RunOptions, Scenario, ScenarioConfig, Selector, Strategy,
};
use vamsim::network::{
    free_flow_cost, route_cost, Edge, EdgeId, GridSpec, Intersection, IntersectionId, NetworkDescription, Point, NETWORK_FORMAT_VERSION,
};

fn small(strategy: Strategy) -> ScenarioConfig {
    ScenarioConfig {
        network: NetworkConfig { grid: Some(GridSpec::new(4, 4, 300.0, 1, 10.0)), file: None },
        vehicles: 120,
        departure_window: 200,
        seed: 11,
        runs: 3,
        strategy,
        ..ScenarioConfig::default()
    }
}

/// Two-way line of `cols` intersections, 1000 m apart, 1 lane at 10 m/s.
fn line_file(cols: u32) -> PathBuf {
    let mut desc = NetworkDescription { format_version: NETWORK_FORMAT_VERSION, intersections: Vec::new(), edges: Vec::new() };
    for i in 0..cols {
        desc.intersections.push(Intersection { id: IntersectionId(i), position: Point::new(1000.0 * f64::from(i), 0.0), signalized: false });
    }
    for i in 0..cols - 1 {
        let (fwd, back) = (EdgeId(2 * i), EdgeId(2 * i + 1));
        let edge = |id, from, to, dual| Edge {
            id,
            from: IntersectionId(from),
            to: IntersectionId(to),
            length: 1000.0,
            lanes: 1,
            free_flow_speed: 10.0,
            per_lane_capacity: 133,
            dual: Some(dual),
        };
        desc.edges.push(edge(fwd, i, i + 1, back));
        desc.edges.push(edge(back, i + 1, i, fwd));
    }
    let mut f = tempfile::Builder::new().suffix(".toml").tempfile().unwrap();
    f.write_all(desc.to_toml_string().as_bytes()).unwrap();
    f.into_temp_path().keep().unwrap()
}

/// One vehicle on an unsignalized line, with the seed chosen so that it
/// crosses the whole line.
fn line_trip(cols: u32) -> ScenarioConfig {
    let mut cfg = ScenarioConfig {
        network: NetworkConfig { grid: None, file: Some(line_file(cols)) },
        vehicles: 1,
        departure_window: 0,
        seed: 0,
        strategy: Strategy::None,
        ..ScenarioConfig::default()
    };
    cfg.signals.enabled = false;
    for seed in 0..1000 {
        cfg.seed = seed;
        let (w, _, _) = Scenario::new(cfg.clone()).unwrap().build_world(0).unwrap();
        if w.vehicles()[0].current_route.edges.len() == cols as usize - 1 {
            return cfg;
        }
    }
    panic!("no seed gives a full-length trip");
}

#[test]
fn same_seed_same_population() {
    let s = Scenario::new(small(Strategy::Vam)).unwrap();
    let (a, _, da) = s.build_world(0).unwrap();
    let (b, _, db) = s.build_world(0).unwrap();
    assert_eq!(da, db);
    let trips = |w: &vamsim::traffic::World| {
        w.vehicles()
            .iter()
            .map(|v| (v.origin, v.destination, v.departure_time, v.current_route.clone()))
            .collect::<Vec<_>>()
    };
    assert_eq!(trips(&a), trips(&b));
    let (_, _, dc) = s.build_world(1).unwrap();
    assert_ne!(da, dc);
}

#[test]
fn departures_stay_in_window() {
    let cfg = ScenarioConfig { vehicles: 4000, ..ScenarioConfig::default() };
    let (w, _, digest) = Scenario::new(cfg).unwrap().build_world(0).unwrap();
    assert_eq!(w.vehicles().len(), 4000);
    assert!(w.vehicles().iter().all(|v| v.departure_time <= 1000));
    let trips: Vec<_> = w
        .vehicles()
        .iter()
        .map(|v| vamsim::traffic::TripSpec { origin: v.origin, destination: v.destination, departure: v.departure_time })
        .collect();
    assert_eq!(population_digest(&trips), digest);
}

#[test]
fn single_path_network_has_no_options() {
    let mut cfg = line_trip(4);
    cfg.vehicles = 20;
    cfg.departure_window = 50;
    cfg.routing.k = 1;
    cfg.strategy = Strategy::Vam;
    let s = Scenario::new(cfg).unwrap();
    let (w, _, _) = s.build_world(0).unwrap();
    assert!(w.vehicles().iter().all(|v| v.optional_routes.is_empty()));
    let out = s.run_once(0, RunOptions::default()).unwrap();
    assert!(!out.metrics.truncated);
    assert_eq!(out.metrics.switches, 0);
}

#[test]
fn lone_vehicle_completes_in_free_flow_time() {
    let cfg = line_trip(5);
    let s = Scenario::new(cfg).unwrap();
    let (w, _, _) = s.build_world(0).unwrap();
    let v = &w.vehicles()[0];
    let expected = v.departure_time as f64 + route_cost(s.network.as_ref(), &v.current_route, free_flow_cost);
    let m = s.run_once(0, RunOptions::default()).unwrap().metrics;
    assert!((m.completion_time as f64 - expected).abs() <= 1.0, "{} vs {expected}", m.completion_time);
}

#[test]
fn injection_stops_vehicle_for_its_duration() {
    let mut cfg = line_trip(4);
    let base = Scenario::new(cfg.clone()).unwrap().run_once(0, RunOptions::default()).unwrap().metrics;
    let (w, _, _) = Scenario::new(cfg.clone()).unwrap().build_world(0).unwrap();
    let edges = w.vehicles()[0].current_route.edges.clone();
    cfg.injections = vec![InjectionConfig { vehicle: Some(0), select: None, edge: edges[1], at: 0, duration: 30 }];
    let m = Scenario::new(cfg).unwrap().run_once(0, RunOptions::default()).unwrap().metrics;
    // the second 1000 m block is entered 100 s after departure
    assert_eq!(m.injections[0].fired_at, Some(100));
    assert_eq!(m.completion_time, base.completion_time + 30);
    assert_eq!(m.unfired_injections(), 0);
}

#[test]
fn injection_off_route_never_fires() {
    let mut cfg = line_trip(4);
    let s = Scenario::new(cfg.clone()).unwrap();
    let (w, _, _) = s.build_world(0).unwrap();
    let route = w.vehicles()[0].current_route.edges.clone();
    let off = s.network.edges().iter().map(|e| e.id).find(|e| !route.contains(e)).unwrap();
    cfg.injections = vec![InjectionConfig { vehicle: Some(0), select: None, edge: off, at: 0, duration: 30 }];
    let m = Scenario::new(cfg).unwrap().run_once(0, RunOptions::default()).unwrap().metrics;
    assert_eq!(m.injections[0].fired_at, None);
    assert_eq!(m.unfired_injections(), 1);
    assert!(!m.truncated);
}

#[test]
fn two_injections_on_one_vehicle_fire_independently() {
    let mut cfg = line_trip(4);
    let base = Scenario::new(cfg.clone()).unwrap().run_once(0, RunOptions::default()).unwrap().metrics;
    let (w, _, _) = Scenario::new(cfg.clone()).unwrap().build_world(0).unwrap();
    let edges = w.vehicles()[0].current_route.edges.clone();
    cfg.injections = vec![
        InjectionConfig { vehicle: Some(0), select: None, edge: edges[1], at: 0, duration: 30 },
        InjectionConfig { vehicle: Some(0), select: None, edge: edges[2], at: 0, duration: 20 },
    ];
    let m = Scenario::new(cfg).unwrap().run_once(0, RunOptions::default()).unwrap().metrics;
    assert_eq!(m.injections[0].fired_at, Some(100));
    assert_eq!(m.injections[1].fired_at, Some(230));
    assert_eq!(m.completion_time, base.completion_time + 50);
}

#[test]
fn first_through_selector_pins_a_vehicle_on_the_edge() {
    let mut cfg = small(Strategy::Vam);
    cfg.injections = vec![InjectionConfig { vehicle: None, select: Some(Selector::FirstThrough), edge: EdgeId(5), at: 20, duration: 30 }];
    let s = Scenario::new(cfg).unwrap();
    let (w, inj, _) = s.build_world(0).unwrap();
    assert_eq!(inj.len(), 1);
    let v = w.vehicle(inj[0].vehicle).unwrap();
    assert!(v.pinned && v.departure_time >= 20 && v.current_route.edges.contains(&inj[0].edge));
    let m = s.run_once(0, RunOptions::default()).unwrap().metrics;
    assert!(m.injections[0].fired_at.is_some());
}

#[test]
fn zero_compliance_matches_no_action() {
    let mut vam = small(Strategy::Vam);
    vam.routing.compliance = 0.0;
    let none = small(Strategy::None);
    let a = run(&vam).unwrap();
    let b = run(&none).unwrap();
    for (x, y) in a.runs.iter().zip(&b.runs) {
        let mut x = x.clone();
        x.strategy = Strategy::None;
        assert_eq!(&x, y);
    }
}

#[test]
fn no_action_never_switches() {
    let r = run(&small(Strategy::None)).unwrap();
    assert!(r.runs.iter().all(|m| m.switches == 0));
}

#[test]
fn runs_are_conserving_and_aggregate_is_the_mean() {
    for strategy in Strategy::ALL {
        let s = Scenario::new(small(strategy)).unwrap();
        let outs = s.run_all(RunOptions { check_edges: true, ..RunOptions::default() }).unwrap();
        let runs: Vec<_> = outs.into_iter().map(|o| o.metrics).collect();
        assert_eq!(runs.len(), 3);
        for m in &runs {
            assert_eq!(m.conservation_violations, 0, "{strategy}");
            assert!(!m.truncated, "{strategy}");
            assert_eq!(m.arrived, m.vehicles);
        }
        let agg = aggregate(&runs);
        let completion: Vec<f64> = runs.iter().map(|m| m.completion_time as f64).collect();
        let direct = completion.iter().sum::<f64>() / completion.len() as f64;
        assert!((agg.completion_mean - direct).abs() < 1e-9);
        assert!((agg.completion_mean - mean(&completion)).abs() < 1e-9);
        assert!((agg.completion_std - std_dev(&completion)).abs() < 1e-9);
        let travel = runs.iter().map(|m| m.mean_travel_time).sum::<f64>() / 3.0;
        assert!((agg.travel_mean - travel).abs() < 1e-9);
    }
}

#[test]
fn truncated_runs_are_left_out_of_the_aggregate() {
    let mut cfg = small(Strategy::None);
    cfg.max_ticks = Some(50);
    let r = run(&cfg).unwrap();
    assert!(r.runs.iter().all(|m| m.truncated && m.completion_time == 50));
    assert_eq!(r.aggregate.completed, 0);
    assert_eq!(r.aggregate.completion_mean, 0.0);
}

#[test]
fn runs_csv_is_byte_identical() {
    let mut cfg = small(Strategy::Vam);
    cfg.runs = 30;
    cfg.vehicles = 40;
    let write = || {
        let r = run(&cfg).unwrap();
        let mut buf = Vec::new();
        output::write_runs(&mut buf, &r.runs).unwrap();
        let mut sum = Vec::new();
        output::write_summary(&mut sum, &[r.aggregate]).unwrap();
        (buf, sum)
    };
    let (a, sa) = write();
    let (b, sb) = write();
    assert_eq!(a, b);
    assert_eq!(sa, sb);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with(output::RUNS_HEADER));
    assert_eq!(text.lines().count(), 31);
    assert_eq!(String::from_utf8(sa).unwrap().lines().count(), 2);
}

#[test]
fn compare_uses_one_population() {
    let c = compare(&small(Strategy::Vam), &[Strategy::None, Strategy::Vam]).unwrap();
    assert_eq!(c.rows.len(), 2);
    assert_eq!(c.rows[0].completion_delta_pct, 0.0);
    for (a, b) in c.reports[0].runs.iter().zip(&c.reports[1].runs) {
        assert_eq!(a.population_digest, b.population_digest);
    }
    let single = compare(&small(Strategy::Vam), &[Strategy::Alert]).unwrap();
    assert_eq!(single.rows.len(), 1);
    assert_eq!(single.reports[0].runs, run(&small(Strategy::Alert)).unwrap().runs);
}

#[test]
fn compare_rejects_mismatched_seeds() {
    let a = small(Strategy::Vam);
    let b = ScenarioConfig { seed: 12, strategy: Strategy::None, ..a.clone() };
    let err = check_comparable(&[a, b]).unwrap_err();
    assert!(matches!(err, HarnessError::Config(_)));
    assert_eq!(err.exit_code(), 1);
}
