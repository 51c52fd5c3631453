use serde::{Deserialize, Serialize};

use crate::control::{SignalError, SignalPlan};
use crate::network::{Edge, EdgeId};

/// Volume-delay (BPR) constants and intersection discharge rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostModelParams {
    pub alpha: f64,
    pub beta: f64,
    /// Vehicles per green second per lane.
    pub saturation_flow: f64,
}

impl Default for CostModelParams {
    fn default() -> Self {
        Self {
            alpha: 0.15,
            beta: 4.0,
            saturation_flow: 0.5,
        }
    }
}

impl CostModelParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.alpha > 0.0) {
            return Err(format!("alpha must be > 0, got {}", self.alpha));
        }
        if !(self.beta >= 1.0) {
            return Err(format!("beta must be >= 1, got {}", self.beta));
        }
        if !(self.saturation_flow > 0.0) {
            return Err(format!(
                "saturation_flow must be > 0, got {}",
                self.saturation_flow
            ));
        }
        Ok(())
    }
}

/// Congested traversal time in seconds:
/// `t0 * (1 + alpha * (volume / (lanes * per_lane_capacity))^beta)`.
pub fn edge_travel_time(edge: &Edge, volume: f64, params: &CostModelParams) -> f64 {
    edge_travel_time_with_lanes(edge, edge.lanes, volume, params)
}

/// As [`edge_travel_time`] with the lane count overridden (reversible edges).
pub fn edge_travel_time_with_lanes(
    edge: &Edge,
    lanes: u32,
    volume: f64,
    params: &CostModelParams,
) -> f64 {
    let t0 = edge.free_flow_time();
    if volume <= 0.0 {
        return t0;
    }
    let capacity = f64::from(lanes.max(1) * edge.per_lane_capacity);
    t0 * (1.0 + params.alpha * (volume / capacity).powf(params.beta))
}

/// Expected wait in seconds for a vehicle joining `queue_len` others on an
/// approach: half the red time plus the time to discharge the queue.
pub fn signal_wait_estimate(
    plan: &SignalPlan,
    approach: EdgeId,
    approach_lanes: u32,
    queue_len: f64,
    params: &CostModelParams,
) -> Result<f64, SignalError> {
    let share = plan.green_share(approach)?;
    let red = (1.0 - share) * f64::from(plan.cycle);
    let discharge = queue_len.max(0.0) / (params.saturation_flow * f64::from(approach_lanes.max(1)));
    Ok(red / 2.0 + discharge)
}
