//! Screening for dynamic lane grouping candidates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::network::{EdgeId, IntersectionId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneGroup {
    pub approach: EdgeId,
    pub lanes: u32,
    /// Vehicles per screening interval.
    pub capacity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DlgThresholds {
    /// Flag when some approach reaches this V/C ...
    pub flag: f64,
    /// ... while another approach is at or below this V/C.
    pub imbalance: f64,
}

impl Default for DlgThresholds {
    fn default() -> Self {
        Self {
            flag: 0.9,
            imbalance: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproachRatios {
    pub approach: EdgeId,
    pub volume: f64,
    pub volume_to_capacity: f64,
    pub volume_to_lanes: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DlgReport {
    pub intersection: IntersectionId,
    pub approaches: Vec<ApproachRatios>,
    pub flagged: bool,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DlgError {
    #[error("lane group for {0} has zero capacity")]
    ZeroCapacity(EdgeId),
    #[error("lane group for {0} has zero lanes")]
    ZeroLanes(EdgeId),
    #[error("negative volume {volume} on {approach}")]
    NegativeVolume { approach: EdgeId, volume: f64 },
}

/// Computes V/C and V/L per lane group and flags the intersection when
/// capacity looks misallocated: one movement near saturation while another
/// is underused. Approaches absent from `volumes` have volume 0.
pub fn dlg_screen(
    intersection: IntersectionId,
    volumes: &BTreeMap<EdgeId, f64>,
    groups: &[LaneGroup],
    thresholds: &DlgThresholds,
) -> Result<DlgReport, DlgError> {
    let mut approaches = Vec::with_capacity(groups.len());
    for g in groups {
        if !(g.capacity > 0.0) {
            return Err(DlgError::ZeroCapacity(g.approach));
        }
        if g.lanes == 0 {
            return Err(DlgError::ZeroLanes(g.approach));
        }
        let volume = volumes.get(&g.approach).copied().unwrap_or(0.0);
        if volume < 0.0 {
            return Err(DlgError::NegativeVolume {
                approach: g.approach,
                volume,
            });
        }
        approaches.push(ApproachRatios {
            approach: g.approach,
            volume,
            volume_to_capacity: volume / g.capacity,
            volume_to_lanes: volume / f64::from(g.lanes),
        });
    }
    let vc = approaches.iter().map(|a| a.volume_to_capacity);
    let max_vc = vc.clone().fold(f64::NEG_INFINITY, f64::max);
    let min_vc = vc.fold(f64::INFINITY, f64::min);
    let flagged = approaches.len() >= 2 && max_vc >= thresholds.flag && min_vc <= thresholds.imbalance;
    let reason = if approaches.len() < 2 {
        "fewer than two lane groups".to_string()
    } else if flagged {
        format!("max V/C {max_vc:.3} >= {} while min V/C {min_vc:.3} <= {}", thresholds.flag, thresholds.imbalance)
    } else if max_vc < thresholds.flag {
        format!("max V/C {max_vc:.3} below {}", thresholds.flag)
    } else {
        format!("min V/C {min_vc:.3} above {}: no spare capacity to regroup", thresholds.imbalance)
    };
    Ok(DlgReport {
        intersection,
        approaches,
        flagged,
        reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn groups(caps: &[f64]) -> Vec<LaneGroup> {
        caps.iter()
            .enumerate()
            .map(|(i, &c)| LaneGroup {
                approach: EdgeId(i as u32),
                lanes: 2,
                capacity: c,
            })
            .collect()
    }

    fn vols(v: &[f64]) -> BTreeMap<EdgeId, f64> {
        v.iter().enumerate().map(|(i, &x)| (EdgeId(i as u32), x)).collect()
    }

    #[test]
    fn balanced_not_flagged() {
        let r = dlg_screen(IntersectionId(0), &vols(&[40.0, 40.0, 40.0]), &groups(&[100.0; 3]), &DlgThresholds::default()).unwrap();
        assert!(!r.flagged);
        assert!(r.approaches.iter().all(|a| a.volume_to_capacity == 0.4));
        assert_eq!(r.approaches[0].volume_to_lanes, 20.0);
    }

    #[test]
    fn imbalanced_flagged() {
        // 120/100 = 1.2 and 20/100 = 0.2
        let r = dlg_screen(IntersectionId(3), &vols(&[120.0, 20.0]), &groups(&[100.0, 100.0]), &DlgThresholds::default()).unwrap();
        assert!(r.flagged, "{}", r.reason);
        assert_eq!(r.approaches[0].volume_to_capacity, 1.2);
        assert_eq!(r.approaches[1].volume_to_capacity, 0.2);
    }

    #[test]
    fn uniformly_saturated_not_flagged() {
        let r = dlg_screen(IntersectionId(3), &vols(&[95.0, 92.0]), &groups(&[100.0, 100.0]), &DlgThresholds::default()).unwrap();
        assert!(!r.flagged);
    }

    #[test]
    fn zero_volume() {
        let r = dlg_screen(IntersectionId(0), &BTreeMap::new(), &groups(&[50.0, 50.0]), &DlgThresholds::default()).unwrap();
        assert!(!r.flagged);
        assert!(r.approaches.iter().all(|a| a.volume_to_capacity == 0.0));
    }

    #[test]
    fn zero_capacity_rejected() {
        assert_eq!(
            dlg_screen(IntersectionId(0), &vols(&[1.0, 1.0]), &groups(&[50.0, 0.0]), &DlgThresholds::default()),
            Err(DlgError::ZeroCapacity(EdgeId(1)))
        );
    }
}
