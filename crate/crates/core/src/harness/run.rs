use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ScenarioConfig, Selector, Strategy};
use super::metrics::{aggregate, Aggregate, RunMetrics};
use super::population::{generate_population, population_digest};
use super::HarnessError;
use crate::baselines::{AlertController, CentralizedController};
use crate::control::{ControlPlane, ControlTraceRow};
use crate::network::{EdgeId, RoadNetwork, RouteCache};
use crate::routing::{DecisionRow, VamController};
use crate::traffic::{SimEvent, Tick, VehicleId, World};

/// A validated config with its network and shared route cache.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub network: Arc<RoadNetwork>,
    pub routes: Arc<RouteCache>,
}

/// An injection bound to a concrete vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Injection {
    pub vehicle: VehicleId,
    pub edge: EdgeId,
    pub at: Tick,
    pub duration: Tick,
    pub fired_at: Option<Tick>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub edges: bool,
    pub decisions: bool,
    pub control: bool,
    /// Recount edge occupancy from vehicle positions every tick.
    pub check_edges: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRow {
    pub run_index: u32,
    pub tick: Tick,
    pub edge_id: EdgeId,
    pub count: u32,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub edges: Vec<EdgeRow>,
    pub decisions: Vec<DecisionRow>,
    pub control: Vec<ControlTraceRow>,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub strategy: Strategy,
    pub runs: Vec<RunMetrics>,
    pub aggregate: Aggregate,
}

enum Controller {
    Vam(Box<VamController>),
    Centralized(CentralizedController),
    Alert(AlertController),
    None,
}

impl Controller {
    fn before_step(&mut self, world: &mut World) {
        match self {
            Controller::Vam(c) => c.before_step(world),
            Controller::Centralized(c) => c.before_step(world),
            Controller::Alert(c) => c.before_step(world),
            Controller::None => {}
        }
    }
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self, HarnessError> {
        config.validate()?;
        let network = Arc::new(config.build_network()?);
        let routes = Arc::new(RouteCache::new(network.clone(), config.routing.k + 1));
        Ok(Self { config, network, routes })
    }

    /// Same network and cache, different config. The config must describe
    /// the same network and the same route depth.
    pub fn with_config(&self, config: ScenarioConfig) -> Result<Self, HarnessError> {
        config.validate()?;
        if config.network != self.config.network || config.routing.k != self.config.routing.k {
            return Scenario::new(config);
        }
        for (i, inj) in config.injections.iter().enumerate() {
            if self.network.edge(inj.edge).is_none() {
                return Err(HarnessError::Config(format!("injection {i}: unknown edge {}", inj.edge)));
            }
        }
        Ok(Self {
            config,
            network: self.network.clone(),
            routes: self.routes.clone(),
        })
    }

    pub fn run_seed(&self, run_index: u32) -> u64 {
        self.config.seed.wrapping_add(u64::from(run_index))
    }

    /// World with the run's vehicles (free-flow shortest route plus k
    /// alternatives each) and the resolved injections.
    pub fn build_world(&self, run_index: u32) -> Result<(World, Vec<Injection>, u64), HarnessError> {
        let cfg = &self.config;
        let seed = self.run_seed(run_index);
        let trips = generate_population(&self.network, cfg.vehicles, cfg.departure_window, seed)?;
        let digest = population_digest(&trips);
        let mut world = World::new(self.network.clone(), cfg.cost, cfg.seconds_per_tick).map_err(|e| HarnessError::Config(e.to_string()))?;
        for t in &trips {
            let set = self.routes.get(t.origin, t.destination).map_err(|e| HarnessError::Config(e.to_string()))?;
            let optional = set.iter().skip(1).take(cfg.routing.k).cloned().collect();
            world
                .add_vehicle(*t, set[0].clone(), optional)
                .map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        let mut injections = Vec::new();
        for inj in &cfg.injections {
            let vehicle = match (inj.vehicle, inj.select) {
                (Some(v), _) => Some(VehicleId(v)),
                (None, Some(Selector::FirstThrough)) => world
                    .vehicles()
                    .iter()
                    .filter(|v| v.departure_time >= inj.at && v.current_route.edges.contains(&inj.edge))
                    .min_by_key(|v| (v.departure_time, v.id))
                    .map(|v| v.id),
                (None, None) => None,
            };
            if let Some(vehicle) = vehicle {
                world.vehicle_mut(vehicle).expect("validated").pinned = true;
                injections.push(Injection {
                    vehicle,
                    edge: inj.edge,
                    at: inj.at,
                    duration: inj.duration,
                    fired_at: None,
                });
            }
        }
        Ok((world, injections, digest))
    }

    /// Simulates one replication until every vehicle arrives or the tick
    /// limit is hit.
    pub fn run_once(&self, run_index: u32, options: RunOptions) -> Result<RunOutput, HarnessError> {
        let cfg = &self.config;
        let seed = self.run_seed(run_index);
        let (mut world, mut injections, digest) = self.build_world(run_index)?;
        let mut plane = ControlPlane::install(&mut world, cfg.signals, cfg.lane_reversal.params()).map_err(|e| HarnessError::Config(e.to_string()))?;
        if options.control {
            plane.enable_trace();
        }
        let mut controller = match cfg.strategy {
            Strategy::Vam => {
                let mut c = VamController::new(&world, cfg.comms, cfg.routing, self.routes.clone(), seed);
                if options.decisions {
                    c.enable_trace();
                }
                Controller::Vam(Box::new(c))
            }
            Strategy::Centralized => Controller::Centralized(CentralizedController::new(cfg.comms.interval, cfg.comms.horizon, cfg.routing.switch_margin)),
            Strategy::Alert => Controller::Alert(AlertController::new(&world, cfg.alert)),
            Strategy::None => Controller::None,
        };
        let max_ticks = cfg.max_ticks();
        let mut edges = Vec::new();
        let mut violations = 0u64;
        while !world.all_arrived() && world.tick() < max_ticks {
            plane.before_step(&mut world);
            controller.before_step(&mut world);
            let events = world.step();
            fire_injections(&mut world, &mut injections, &events)?;
            if !world.census().conserved() {
                violations += 1;
            }
            if options.check_edges {
                world.check_edge_counts().map_err(HarnessError::Runtime)?;
            }
            if options.edges {
                let t = world.tick();
                edges.extend(world.edge_states().iter().filter(|e| e.count > 0).map(|e| EdgeRow {
                    run_index,
                    tick: t,
                    edge_id: e.edge,
                    count: e.count,
                }));
            }
        }
        let metrics = RunMetrics::from_world(&world, run_index, seed, cfg.strategy, digest, injections, violations, plane.reversals());
        let decisions = match &mut controller {
            Controller::Vam(c) => c.take_trace(),
            _ => Vec::new(),
        };
        Ok(RunOutput {
            metrics,
            edges,
            decisions,
            control: plane.take_trace(),
        })
    }

    /// All replications, in run order.
    pub fn run_all(&self, options: RunOptions) -> Result<Vec<RunOutput>, HarnessError> {
        (0..self.config.runs)
            .into_par_iter()
            .map(|r| self.run_once(r, options))
            .collect()
    }

    pub fn report(&self) -> Result<Report, HarnessError> {
        let runs: Vec<RunMetrics> = self.run_all(RunOptions::default())?.into_iter().map(|o| o.metrics).collect();
        Ok(Report {
            strategy: self.config.strategy,
            aggregate: aggregate(&runs),
            runs,
        })
    }
}

fn fire_injections(world: &mut World, injections: &mut [Injection], events: &[SimEvent]) -> Result<(), HarnessError> {
    for ev in events {
        let (SimEvent::Departed { vehicle, edge, tick } | SimEvent::EnteredEdge { vehicle, edge, tick }) = *ev else {
            continue;
        };
        for inj in injections.iter_mut() {
            if inj.fired_at.is_none() && inj.vehicle == vehicle && inj.edge == edge && tick >= inj.at {
                // the step that produced the event is over; hold for the
                // next `duration` steps
                let v = world.vehicle(vehicle).expect("event vehicle");
                let until = world.tick() + inj.duration;
                let until = match v.state {
                    crate::traffic::VehicleState::Stopped { until: u } => u.max(until),
                    _ => until,
                };
                world.stop_vehicle(vehicle, until).map_err(|e| HarnessError::Runtime(e.to_string()))?;
                inj.fired_at = Some(tick);
            }
        }
    }
    Ok(())
}

/// Runs `run` once for the config.
pub fn run(config: &ScenarioConfig) -> Result<Report, HarnessError> {
    Scenario::new(config.clone())?.report()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub strategy: Strategy,
    pub completed_runs: usize,
    pub completion_mean: f64,
    pub completion_delta_pct: f64,
    pub travel_mean: f64,
    pub travel_delta_pct: f64,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub reports: Vec<Report>,
    pub rows: Vec<CompareRow>,
}

fn pct(value: f64, base: f64) -> f64 {
    if base == 0.0 {
        0.0
    } else {
        100.0 * (value - base) / base
    }
}

/// Runs each config (which must differ only in strategy) over the same
/// seeds. Deltas are relative to the first config.
pub fn compare_configs(configs: &[ScenarioConfig]) -> Result<Comparison, HarnessError> {
    super::config::check_comparable(configs)?;
    let base = Scenario::new(configs[0].clone())?;
    let mut reports = Vec::new();
    for c in configs {
        reports.push(base.with_config(c.clone())?.report()?);
    }
    for r in 1..reports.len() {
        for (a, b) in reports[0].runs.iter().zip(&reports[r].runs) {
            if a.population_digest != b.population_digest {
                return Err(HarnessError::Runtime(format!("run {}: vehicle populations differ between strategies", a.run_index)));
            }
        }
    }
    let (bc, bt) = (reports[0].aggregate.completion_mean, reports[0].aggregate.travel_mean);
    let rows = reports
        .iter()
        .map(|r| CompareRow {
            strategy: r.strategy,
            completed_runs: r.aggregate.completed,
            completion_mean: r.aggregate.completion_mean,
            completion_delta_pct: pct(r.aggregate.completion_mean, bc),
            travel_mean: r.aggregate.travel_mean,
            travel_delta_pct: pct(r.aggregate.travel_mean, bt),
        })
        .collect();
    Ok(Comparison { reports, rows })
}

pub fn compare(config: &ScenarioConfig, strategies: &[Strategy]) -> Result<Comparison, HarnessError> {
    if strategies.is_empty() {
        return Err(HarnessError::Config("no strategies given".into()));
    }
    let configs: Vec<ScenarioConfig> = strategies
        .iter()
        .map(|s| ScenarioConfig {
            strategy: *s,
            ..config.clone()
        })
        .collect();
    compare_configs(&configs)
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: f64,
    pub report: Report,
}

/// One report per parameter value, all over the same seeds.
pub fn sweep(config: &ScenarioConfig, param: &str, values: &[f64]) -> Result<Vec<SweepPoint>, HarnessError> {
    let base = Scenario::new(config.clone())?;
    let mut out = Vec::new();
    for &value in values {
        let mut c = config.clone();
        c.set_param(param, value)?;
        out.push(SweepPoint {
            value,
            report: base.with_config(c)?.report()?,
        });
    }
    Ok(out)
}
