//! Python bindings: scenario configs, whole experiments, road networks and
//! a steppable world.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use vamsim::control::{apportion, dlr_check, DlrAction, DlrParams, DualEdgePair, ControlPlane};
use vamsim::harness::{self, HarnessError, RunOptions, Scenario, Strategy};
use vamsim::network::{self as net, EdgeId, GridSpec, IntersectionId};
use vamsim::traffic::{self, CostModelParams, SimEvent};

fn harness_err(e: HarnessError) -> PyErr {
    match e {
        HarnessError::Config(m) => PyValueError::new_err(m),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "ScenarioConfig", module = "vamsim_py", from_py_object)]
#[derive(Clone)]
struct PyScenarioConfig {
    inner: harness::ScenarioConfig,
}

#[pymethods]
impl PyScenarioConfig {
    /// Defaults: 10x10 grid, 1000 vehicles, VAM.
    #[new]
    fn new() -> Self {
        Self { inner: harness::ScenarioConfig::default() }
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        harness::ScenarioConfig::from_toml_str(text).map(|inner| Self { inner }).map_err(harness_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        harness::ScenarioConfig::load(&path).map(|inner| Self { inner }).map_err(harness_err)
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml_string()
    }

    /// Sets a sweepable parameter such as "P_R", "k" or "vehicles".
    fn set_param(&mut self, name: &str, value: f64) -> PyResult<()> {
        self.inner.set_param(name, value).map_err(harness_err)
    }

    #[getter]
    fn strategy(&self) -> &'static str {
        self.inner.strategy.name()
    }

    #[setter]
    fn set_strategy(&mut self, name: &str) -> PyResult<()> {
        self.inner.strategy = name.parse().map_err(harness_err)?;
        Ok(())
    }

    #[getter]
    fn runs(&self) -> u32 {
        self.inner.runs
    }

    #[setter]
    fn set_runs(&mut self, runs: u32) {
        self.inner.runs = runs;
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    #[getter]
    fn vehicles(&self) -> u32 {
        self.inner.vehicles
    }

    #[setter]
    fn set_vehicles(&mut self, vehicles: u32) {
        self.inner.vehicles = vehicles;
    }

    fn __repr__(&self) -> String {
        format!(
            "ScenarioConfig(strategy={:?}, vehicles={}, runs={}, seed={})",
            self.inner.strategy.name(),
            self.inner.vehicles,
            self.inner.runs,
            self.inner.seed
        )
    }
}

#[pyclass(name = "RunMetrics", module = "vamsim_py", frozen, skip_from_py_object)]
struct PyRunMetrics {
    inner: harness::RunMetrics,
}

#[pymethods]
impl PyRunMetrics {
    #[getter]
    fn run_index(&self) -> u32 {
        self.inner.run_index
    }
    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }
    #[getter]
    fn strategy(&self) -> &'static str {
        self.inner.strategy.name()
    }
    #[getter]
    fn completion_time(&self) -> u64 {
        self.inner.completion_time
    }
    #[getter]
    fn mean_travel_time(&self) -> f64 {
        self.inner.mean_travel_time
    }
    #[getter]
    fn median_travel_time(&self) -> f64 {
        self.inner.median_travel_time
    }
    #[getter]
    fn mean_distance(&self) -> f64 {
        self.inner.mean_distance
    }
    #[getter]
    fn switches(&self) -> u64 {
        self.inner.switches
    }
    #[getter]
    fn truncated(&self) -> bool {
        self.inner.truncated
    }
    #[getter]
    fn arrived(&self) -> u32 {
        self.inner.arrived
    }
    #[getter]
    fn unfired_injections(&self) -> usize {
        self.inner.unfired_injections()
    }

    fn __repr__(&self) -> String {
        format!(
            "RunMetrics(run={}, strategy={:?}, completion_time={}, mean_travel_time={:.1}, truncated={})",
            self.inner.run_index,
            self.inner.strategy.name(),
            self.inner.completion_time,
            self.inner.mean_travel_time,
            self.inner.truncated
        )
    }
}

fn aggregate_dict<'py>(py: Python<'py>, a: &harness::Aggregate) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let d = pyo3::types::PyDict::new(py);
    d.set_item("strategy", a.strategy.name())?;
    d.set_item("runs", a.runs)?;
    d.set_item("completed", a.completed)?;
    d.set_item("completion_mean", a.completion_mean)?;
    d.set_item("completion_std", a.completion_std)?;
    d.set_item("travel_mean", a.travel_mean)?;
    d.set_item("travel_std", a.travel_std)?;
    d.set_item("switches_mean", a.switches_mean)?;
    Ok(d)
}

/// Runs every replication of the config. Returns (runs, aggregate).
#[pyfunction]
fn run(py: Python<'_>, config: &PyScenarioConfig) -> PyResult<(Vec<PyRunMetrics>, Py<PyAny>)> {
    let cfg = config.inner.clone();
    let report = py.detach(|| harness::run(&cfg)).map_err(harness_err)?;
    let agg = aggregate_dict(py, &report.aggregate)?.into_any().unbind();
    Ok((report.runs.into_iter().map(|inner| PyRunMetrics { inner }).collect(), agg))
}

/// Same scenario under each strategy on the same seeds; one summary dict
/// per strategy with deltas relative to the first.
#[pyfunction]
fn compare(py: Python<'_>, config: &PyScenarioConfig, strategies: Vec<String>) -> PyResult<Vec<Py<PyAny>>> {
    let strategies = strategies.iter().map(|s| s.parse()).collect::<Result<Vec<Strategy>, _>>().map_err(harness_err)?;
    let cfg = config.inner.clone();
    let cmp = py.detach(|| harness::compare(&cfg, &strategies)).map_err(harness_err)?;
    cmp.rows
        .iter()
        .zip(&cmp.reports)
        .map(|(row, report)| {
            let d = aggregate_dict(py, &report.aggregate)?;
            d.set_item("completion_delta_pct", row.completion_delta_pct)?;
            d.set_item("travel_delta_pct", row.travel_delta_pct)?;
            Ok(d.into_any().unbind())
        })
        .collect()
}

#[pyclass(name = "RoadNetwork", module = "vamsim_py", frozen, skip_from_py_object)]
struct PyRoadNetwork {
    inner: Arc<net::RoadNetwork>,
}

#[pymethods]
impl PyRoadNetwork {
    #[staticmethod]
    #[pyo3(signature = (rows, cols, block_length = 1500.0, lanes = 2, speed = 13.9, signalized = true))]
    fn grid(rows: u32, cols: u32, block_length: f64, lanes: u32, speed: f64, signalized: bool) -> PyResult<Self> {
        let spec = GridSpec { signalized, ..GridSpec::new(rows, cols, block_length, lanes, speed) };
        let inner = net::generate_grid(&spec).map_err(value_err)?;
        Ok(Self { inner: Arc::new(inner) })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let inner = net::RoadNetwork::from_toml_str(text).map_err(value_err)?;
        Ok(Self { inner: Arc::new(inner) })
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml_string()
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    /// (id, from, to, length, lanes) for every edge.
    fn edges(&self) -> Vec<(u32, u32, u32, f64, u32)> {
        self.inner.edges().iter().map(|e| (e.id.0, e.from.0, e.to.0, e.length, e.lanes)).collect()
    }

    /// Free-flow shortest route as a list of edge ids.
    fn shortest_route(&self, origin: u32, destination: u32) -> PyResult<Vec<u32>> {
        let r = net::shortest_route(&self.inner, IntersectionId(origin), IntersectionId(destination), net::free_flow_cost).map_err(value_err)?;
        Ok(r.edges.iter().map(|e| e.0).collect())
    }

    /// The k next-best loop-free routes after the shortest one.
    fn optional_routes(&self, origin: u32, destination: u32, k: usize) -> PyResult<Vec<Vec<u32>>> {
        let routes = net::optional_routes(&self.inner, IntersectionId(origin), IntersectionId(destination), k, net::free_flow_cost).map_err(value_err)?;
        Ok(routes.iter().map(|r| r.edges.iter().map(|e| e.0).collect()).collect())
    }

    /// Free-flow travel time of a route given as edge ids.
    fn route_cost(&self, edges: Vec<u32>) -> PyResult<f64> {
        let mut total = 0.0;
        for id in edges {
            total += self.inner.edge(EdgeId(id)).ok_or_else(|| value_err(format!("unknown edge {id}")))?.free_flow_time();
        }
        Ok(total)
    }
}

/// One replication of a scenario, advanced tick by tick. Only signals and
/// lane reversal act on it; routing strategies run through `run`.
#[pyclass(name = "World", module = "vamsim_py", unsendable, skip_from_py_object)]
struct PyWorld {
    world: traffic::World,
    plane: ControlPlane,
}

#[pymethods]
impl PyWorld {
    #[new]
    #[pyo3(signature = (config, run_index = 0))]
    fn new(config: &PyScenarioConfig, run_index: u32) -> PyResult<Self> {
        let scenario = Scenario::new(config.inner.clone()).map_err(harness_err)?;
        let (mut world, _, _) = scenario.build_world(run_index).map_err(harness_err)?;
        let cfg = &config.inner;
        let plane = ControlPlane::install(&mut world, cfg.signals, cfg.lane_reversal.params()).map_err(value_err)?;
        Ok(Self { world, plane })
    }

    #[getter]
    fn tick(&self) -> u64 {
        self.world.tick()
    }

    #[getter]
    fn all_arrived(&self) -> bool {
        self.world.all_arrived()
    }

    /// Advances one tick; returns (kind, vehicle, edge or None, tick) events.
    fn step(&mut self) -> Vec<(&'static str, u32, Option<u32>, u64)> {
        self.plane.before_step(&mut self.world);
        self.world
            .step()
            .into_iter()
            .map(|e| match e {
                SimEvent::Departed { vehicle, edge, tick } => ("departed", vehicle.0, Some(edge.0), tick),
                SimEvent::EnteredEdge { vehicle, edge, tick } => ("entered", vehicle.0, Some(edge.0), tick),
                SimEvent::Queued { vehicle, edge, tick } => ("queued", vehicle.0, Some(edge.0), tick),
                SimEvent::Arrived { vehicle, tick } => ("arrived", vehicle.0, None, tick),
                SimEvent::Resumed { vehicle, tick } => ("resumed", vehicle.0, None, tick),
            })
            .collect()
    }

    /// Steps until every vehicle arrives or `max_ticks` is reached.
    fn run_until_done(&mut self, max_ticks: u64) -> bool {
        while !self.world.all_arrived() && self.world.tick() < max_ticks {
            self.plane.before_step(&mut self.world);
            self.world.step();
        }
        self.world.all_arrived()
    }

    /// Vehicle counts by state plus the running departure total.
    fn census(&self) -> BTreeMap<&'static str, u64> {
        let c = self.world.census();
        BTreeMap::from([
            ("pending", c.pending),
            ("moving", c.moving),
            ("queued", c.queued),
            ("stopped", c.stopped),
            ("arrived", c.arrived),
            ("departed", c.departed),
        ])
    }

    /// Current vehicle count per edge id.
    fn edge_counts(&self) -> BTreeMap<u32, u32> {
        self.world.edge_states().iter().map(|e| (e.edge.0, e.count)).collect()
    }

    /// Stops a vehicle on the network for `duration` ticks.
    fn stop_vehicle(&mut self, vehicle: u32, duration: u64) -> PyResult<()> {
        let until = self.world.tick() + duration;
        self.world.stop_vehicle(traffic::VehicleId(vehicle), until).map_err(value_err)
    }
}

/// BPR travel time in seconds for an edge carrying `volume` vehicles.
#[pyfunction]
#[pyo3(signature = (length, speed, lanes, per_lane_capacity, volume, alpha = 0.15, beta = 4.0))]
fn edge_travel_time(length: f64, speed: f64, lanes: u32, per_lane_capacity: u32, volume: f64, alpha: f64, beta: f64) -> f64 {
    let edge = net::Edge {
        id: EdgeId(0),
        from: IntersectionId(0),
        to: IntersectionId(1),
        length,
        lanes,
        free_flow_speed: speed,
        per_lane_capacity,
        dual: None,
    };
    traffic::edge_travel_time(&edge, volume, &CostModelParams { alpha, beta, ..CostModelParams::default() })
}

/// Whole-second green split proportional to `counts` (largest remainder).
#[pyfunction]
fn split_green(usable: u32, counts: Vec<f64>) -> Vec<u32> {
    apportion(usable, &counts)
}

/// Direction a lane should move toward ("a", "b") or None.
#[pyfunction]
#[pyo3(signature = (lanes_a, lanes_b, demand_a, demand_b, ratio_threshold = 1.5))]
fn lane_reversal_check(lanes_a: u32, lanes_b: u32, demand_a: f64, demand_b: f64, ratio_threshold: f64) -> PyResult<Option<&'static str>> {
    let pair = DualEdgePair::new(EdgeId(0), lanes_a, EdgeId(1), lanes_b).map_err(value_err)?;
    let params = DlrParams { ratio_threshold, ..DlrParams::default() };
    Ok(match dlr_check(&pair, demand_a, demand_b, 0, &params) {
        DlrAction::BeginReversal { toward: vamsim::control::Side::A } => Some("a"),
        DlrAction::BeginReversal { toward: vamsim::control::Side::B } => Some("b"),
        DlrAction::None => None,
    })
}

/// Runs one replication and returns its metrics; `check` recounts edge
/// occupancy every tick.
#[pyfunction]
#[pyo3(signature = (config, run_index = 0, check = false))]
fn run_once(py: Python<'_>, config: &PyScenarioConfig, run_index: u32, check: bool) -> PyResult<PyRunMetrics> {
    let cfg = config.inner.clone();
    let out = py
        .detach(|| Scenario::new(cfg)?.run_once(run_index, RunOptions { check_edges: check, ..RunOptions::default() }))
        .map_err(harness_err)?;
    Ok(PyRunMetrics { inner: out.metrics })
}

#[pymodule]
fn vamsim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenarioConfig>()?;
    m.add_class::<PyRunMetrics>()?;
    m.add_class::<PyRoadNetwork>()?;
    m.add_class::<PyWorld>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(run_once, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(edge_travel_time, m)?)?;
    m.add_function(wrap_pyfunction!(split_green, m)?)?;
    m.add_function(wrap_pyfunction!(lane_reversal_check, m)?)?;
    Ok(())
}
