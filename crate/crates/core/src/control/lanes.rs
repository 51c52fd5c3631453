//! Dynamic lane reversal on dual-paired edges.
//!
//! A reversal first closes the donor's outermost lane to new vehicles
//! (clearing), and only moves the lane to the receiving direction once no
//! vehicle remains in it.

use serde::{Deserialize, Serialize};

use crate::network::EdgeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReversalState {
    Stable,
    /// `lane` (index on the donor edge) accepts no new vehicles.
    Clearing { donor: Side, lane: u32, since: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DlrParams {
    pub ratio_threshold: f64,
    /// Demand monitoring window, ticks.
    pub window: u64,
    /// Ticks after a commit during which no new reversal starts.
    pub cooldown: u64,
}

impl Default for DlrParams {
    fn default() -> Self {
        Self {
            ratio_threshold: 1.5,
            window: 2,
            cooldown: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualEdgePair {
    pub edge_a: EdgeId,
    pub edge_b: EdgeId,
    pub lanes_a: u32,
    pub lanes_b: u32,
    pub total_lanes: u32,
    pub state: ReversalState,
    pub cooldown_until: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LaneError {
    #[error("pair ({0}, {1}) is not clearing")]
    NotClearing(EdgeId, EdgeId),
    #[error("pair ({0}, {1}) is already reversing")]
    Busy(EdgeId, EdgeId),
    #[error("donor side of pair ({0}, {1}) has only one lane")]
    LastLane(EdgeId, EdgeId),
    #[error("pair needs at least one lane per direction")]
    TooFewLanes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DlrAction {
    None,
    /// Move one lane toward the given side.
    BeginReversal { toward: Side },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommitOutcome {
    Committed,
    StillClearing,
}

/// Vehicles currently in a given lane of an edge.
pub trait LaneOccupancy {
    fn lane_occupancy(&self, edge: EdgeId, lane: u32) -> u32;
}

impl DualEdgePair {
    pub fn new(edge_a: EdgeId, lanes_a: u32, edge_b: EdgeId, lanes_b: u32) -> Result<Self, LaneError> {
        if lanes_a == 0 || lanes_b == 0 {
            return Err(LaneError::TooFewLanes);
        }
        Ok(Self {
            edge_a,
            edge_b,
            lanes_a,
            lanes_b,
            total_lanes: lanes_a + lanes_b,
            state: ReversalState::Stable,
            cooldown_until: 0,
        })
    }

    pub fn lanes(&self, side: Side) -> u32 {
        match side {
            Side::A => self.lanes_a,
            Side::B => self.lanes_b,
        }
    }

    pub fn edge(&self, side: Side) -> EdgeId {
        match side {
            Side::A => self.edge_a,
            Side::B => self.edge_b,
        }
    }

    /// Lanes open to new vehicles on `side`.
    pub fn open_lanes(&self, side: Side) -> u32 {
        match self.state {
            ReversalState::Clearing { donor, .. } if donor == side => self.lanes(side) - 1,
            _ => self.lanes(side),
        }
    }

    /// Starts clearing the donor's last lane.
    pub fn begin(&mut self, toward: Side, tick: u64) -> Result<(), LaneError> {
        if self.state != ReversalState::Stable {
            return Err(LaneError::Busy(self.edge_a, self.edge_b));
        }
        let donor = toward.other();
        let lanes = self.lanes(donor);
        if lanes <= 1 {
            return Err(LaneError::LastLane(self.edge_a, self.edge_b));
        }
        self.state = ReversalState::Clearing {
            donor,
            lane: lanes - 1,
            since: tick,
        };
        Ok(())
    }
}

/// Decides whether to start a reversal toward the heavier direction.
pub fn dlr_check(pair: &DualEdgePair, demand_a: f64, demand_b: f64, tick: u64, params: &DlrParams) -> DlrAction {
    if pair.state != ReversalState::Stable || tick < pair.cooldown_until {
        return DlrAction::None;
    }
    let (heavy, light, toward) = if demand_a > demand_b {
        (demand_a, demand_b, Side::A)
    } else if demand_b > demand_a {
        (demand_b, demand_a, Side::B)
    } else {
        return DlrAction::None;
    };
    if heavy <= 0.0 || heavy < params.ratio_threshold * light {
        return DlrAction::None;
    }
    if pair.lanes(toward.other()) <= 1 {
        return DlrAction::None;
    }
    DlrAction::BeginReversal { toward }
}

/// Completes a pending reversal once the clearing lane is empty.
pub fn dlr_commit(
    pair: &mut DualEdgePair,
    occupancy: &impl LaneOccupancy,
    tick: u64,
    params: &DlrParams,
) -> Result<CommitOutcome, LaneError> {
    let ReversalState::Clearing { donor, lane, .. } = pair.state else {
        return Err(LaneError::NotClearing(pair.edge_a, pair.edge_b));
    };
    if occupancy.lane_occupancy(pair.edge(donor), lane) > 0 {
        return Ok(CommitOutcome::StillClearing);
    }
    match donor {
        Side::A => {
            pair.lanes_a -= 1;
            pair.lanes_b += 1;
        }
        Side::B => {
            pair.lanes_b -= 1;
            pair.lanes_a += 1;
        }
    }
    pair.state = ReversalState::Stable;
    pair.cooldown_until = tick + params.cooldown;
    debug_assert_eq!(pair.lanes_a + pair.lanes_b, pair.total_lanes);
    Ok(CommitOutcome::Committed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    struct Occ(HashMap<(EdgeId, u32), u32>);

    impl LaneOccupancy for Occ {
        fn lane_occupancy(&self, edge: EdgeId, lane: u32) -> u32 {
            self.0.get(&(edge, lane)).copied().unwrap_or(0)
        }
    }

    fn pair(a: u32, b: u32) -> DualEdgePair {
        DualEdgePair::new(EdgeId(0), a, EdgeId(1), b).unwrap()
    }

    #[test]
    fn ratio_boundary() {
        let p = pair(2, 2);
        let params = DlrParams::default();
        assert_eq!(
            dlr_check(&p, 15.0, 10.0, 0, &params),
            DlrAction::BeginReversal { toward: Side::A }
        );
        assert_eq!(dlr_check(&p, 14.9, 10.0, 0, &params), DlrAction::None);
        assert_eq!(dlr_check(&p, 14.999, 10.0, 0, &params), DlrAction::None);
        assert_eq!(
            dlr_check(&p, 10.0, 15.0, 0, &params),
            DlrAction::BeginReversal { toward: Side::B }
        );
        assert_eq!(
            dlr_check(&p, 3.0, 0.0, 0, &params),
            DlrAction::BeginReversal { toward: Side::A }
        );
        assert_eq!(dlr_check(&p, 0.0, 0.0, 0, &params), DlrAction::None);
    }

    #[test]
    fn respects_minimum_lane() {
        let p = pair(3, 1);
        assert_eq!(dlr_check(&p, 100.0, 1.0, 0, &DlrParams::default()), DlrAction::None);
        let mut p = pair(3, 1);
        assert_eq!(p.begin(Side::A, 0), Err(LaneError::LastLane(EdgeId(0), EdgeId(1))));
    }

    #[test]
    fn commit_waits_for_empty_lane() {
        let params = DlrParams::default();
        let mut p = pair(2, 2);
        p.begin(Side::B, 10).unwrap();
        assert_eq!(p.open_lanes(Side::A), 1);
        let busy = Occ(HashMap::from([((EdgeId(0), 1), 3)]));
        assert_eq!(dlr_commit(&mut p, &busy, 11, &params), Ok(CommitOutcome::StillClearing));
        assert_eq!((p.lanes_a, p.lanes_b), (2, 2));
        let empty = Occ(HashMap::new());
        assert_eq!(dlr_commit(&mut p, &empty, 12, &params), Ok(CommitOutcome::Committed));
        assert_eq!((p.lanes_a, p.lanes_b), (1, 3));
        assert_eq!(p.lanes_a + p.lanes_b, 4);
        assert_eq!(
            dlr_commit(&mut p, &empty, 13, &params),
            Err(LaneError::NotClearing(EdgeId(0), EdgeId(1)))
        );
    }

    #[test]
    fn cooldown_blocks_immediate_reversal() {
        let params = DlrParams::default();
        // Scripted trace: B heavy, reversal toward B commits at tick 12; then
        // A becomes 1.5x heavier straight away.
        let mut p = pair(2, 2);
        let empty = Occ(HashMap::new());
        let trace = [(10u64, 10.0, 15.0), (12, 0.0, 0.0), (14, 15.0, 10.0), (71, 15.0, 10.0), (72, 15.0, 10.0)];
        let mut actions = Vec::new();
        for (tick, a, b) in trace {
            if let ReversalState::Clearing { .. } = p.state {
                dlr_commit(&mut p, &empty, tick, &params).unwrap();
            }
            let act = dlr_check(&p, a, b, tick, &params);
            if let DlrAction::BeginReversal { toward } = act {
                p.begin(toward, tick).unwrap();
            }
            actions.push(act);
        }
        assert_eq!(p.cooldown_until, 72);
        assert_eq!(
            actions,
            vec![
                DlrAction::BeginReversal { toward: Side::B },
                DlrAction::None,
                DlrAction::None,
                DlrAction::None,
                DlrAction::BeginReversal { toward: Side::A },
            ]
        );
    }
}
