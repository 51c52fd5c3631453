use serde::{Deserialize, Serialize};

use super::config::Strategy;
use super::run::Injection;
use crate::traffic::{Tick, World};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub run_index: u32,
    pub seed: u64,
    pub strategy: Strategy,
    /// Tick at which the last vehicle arrived; the tick limit when truncated.
    pub completion_time: Tick,
    pub mean_travel_time: f64,
    pub median_travel_time: f64,
    /// Meters.
    pub mean_distance: f64,
    pub switches: u64,
    pub truncated: bool,
    pub vehicles: u32,
    pub arrived: u32,
    /// Highest occupancy reached by each edge, by edge slot.
    pub peak_occupancy: Vec<u32>,
    pub injections: Vec<Injection>,
    pub conservation_violations: u64,
    pub lane_reversals: u64,
    pub population_digest: u64,
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Sample standard deviation (n - 1); zero for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

impl RunMetrics {
    #[allow(clippy::too_many_arguments)]
    pub fn from_world(
        world: &World,
        run_index: u32,
        seed: u64,
        strategy: Strategy,
        population_digest: u64,
        injections: Vec<Injection>,
        conservation_violations: u64,
        lane_reversals: u64,
    ) -> Self {
        let arrived: Vec<_> = world.vehicles().iter().filter(|v| v.arrived_at.is_some()).collect();
        let travel: Vec<f64> = arrived
            .iter()
            .map(|v| (v.arrived_at.expect("arrived") - v.departure_time) as f64)
            .collect();
        let distance: Vec<f64> = arrived.iter().map(|v| v.distance).collect();
        let truncated = !world.all_arrived();
        let completion_time = if truncated {
            world.tick()
        } else {
            arrived.iter().filter_map(|v| v.arrived_at).max().unwrap_or(0)
        };
        Self {
            run_index,
            seed,
            strategy,
            completion_time,
            mean_travel_time: mean(&travel),
            median_travel_time: median(&travel),
            mean_distance: mean(&distance),
            switches: world.vehicles().iter().map(|v| u64::from(v.switches)).sum(),
            truncated,
            vehicles: world.vehicles().len() as u32,
            arrived: arrived.len() as u32,
            peak_occupancy: world.edge_states().iter().map(|e| e.peak).collect(),
            injections,
            conservation_violations,
            lane_reversals,
            population_digest,
        }
    }

    pub fn unfired_injections(&self) -> usize {
        self.injections.iter().filter(|i| i.fired_at.is_none()).count()
    }
}

/// Mean and spread over the runs that completed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub strategy: Strategy,
    pub runs: usize,
    pub completed: usize,
    pub completion_mean: f64,
    pub completion_std: f64,
    pub travel_mean: f64,
    pub travel_std: f64,
    pub median_travel_mean: f64,
    pub distance_mean: f64,
    pub switches_mean: f64,
}

pub fn aggregate(runs: &[RunMetrics]) -> Aggregate {
    let done: Vec<&RunMetrics> = runs.iter().filter(|r| !r.truncated).collect();
    let pick = |f: fn(&RunMetrics) -> f64| done.iter().map(|r| f(r)).collect::<Vec<f64>>();
    let completion = pick(|r| r.completion_time as f64);
    let travel = pick(|r| r.mean_travel_time);
    Aggregate {
        strategy: runs.first().map_or(Strategy::None, |r| r.strategy),
        runs: runs.len(),
        completed: done.len(),
        completion_mean: mean(&completion),
        completion_std: std_dev(&completion),
        travel_mean: mean(&travel),
        travel_std: std_dev(&travel),
        median_travel_mean: mean(&pick(|r| r.median_travel_time)),
        distance_mean: mean(&pick(|r| r.mean_distance)),
        switches_mean: mean(&pick(|r| r.switches as f64)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_stats() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(mean(&[]), 0.0);
        assert!((std_dev(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]) - 2.138_089_935).abs() < 1e-6);
        assert_eq!(std_dev(&[1.0]), 0.0);
    }
}
