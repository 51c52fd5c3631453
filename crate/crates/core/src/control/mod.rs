//! Infrastructure-side control: signal timing, lane reversal, lane-group
//! screening, and the per-tick control plane that drives them.

mod dlg;
mod lanes;
mod plane;
mod signals;

pub use dlg::{dlg_screen, ApproachRatios, DlgError, DlgReport, DlgThresholds, LaneGroup};
pub use lanes::{
    dlr_check, dlr_commit, CommitOutcome, DlrAction, DlrParams, DualEdgePair, LaneError,
    LaneOccupancy, ReversalState, Side,
};
pub use plane::{ControlPlane, ControlTraceRow, SignalMode, SignalSettings};
pub use signals::{
    apportion, atlc_update, phase_counts, pre_clamp_greens, Phase, SignalError, SignalPlan,
};
