//! Discrete-time mesoscopic flow engine.

mod cost;
mod engine;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use cost::{edge_travel_time, edge_travel_time_with_lanes, signal_wait_estimate, CostModelParams};
pub use engine::{Census, EdgeState, SignalState, SimEvent, TripSpec, World, WorldError};

/// Simulation time, in ticks.
pub type Tick = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VehicleId(pub u32);

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VehicleState {
    /// Not yet admitted to its first edge.
    Pending,
    Moving,
    /// At the end of its edge, waiting to be discharged.
    Queued,
    /// Forced stop; does not move while `tick < until`.
    Stopped { until: Tick },
    Arrived,
}

impl VehicleState {
    pub fn on_network(&self) -> bool {
        matches!(
            self,
            VehicleState::Moving | VehicleState::Queued | VehicleState::Stopped { .. }
        )
    }
}
