//! Adaptive traffic-light control: proportional green splitting from local
//! approach counts. Durations are whole seconds so that greens always sum
//! exactly to the usable cycle time.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::network::{EdgeId, IntersectionId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SignalError {
    #[error("approach {approach} is not served by any phase at {intersection}")]
    UnknownApproach {
        intersection: IntersectionId,
        approach: EdgeId,
    },
    #[error("approach {0} appears in more than one phase")]
    DuplicateApproach(EdgeId),
    #[error("signal plan needs at least one phase")]
    NoPhases,
    #[error("green {green}s outside [{min}, {max}]")]
    GreenOutOfBounds { green: u32, min: u32, max: u32 },
    #[error("usable green {usable}s cannot be split over {phases} phases within [{min}, {max}]")]
    Infeasible {
        usable: u32,
        phases: usize,
        min: u32,
        max: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phase {
    pub approaches: Vec<EdgeId>,
    /// Seconds.
    pub green: u32,
}

impl Phase {
    pub fn new(approaches: Vec<EdgeId>, green: u32) -> Self {
        Self { approaches, green }
    }
}

/// Phase set and timing for one signalized intersection.
///
/// Within a cycle the phases run in order, each green followed by an equal
/// share of the lost time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalPlan {
    pub intersection: IntersectionId,
    pub cycle: u32,
    pub lost_time: u32,
    pub min_green: u32,
    pub max_green: u32,
    pub phases: Vec<Phase>,
}

impl SignalPlan {
    /// The cycle length is derived as the sum of greens plus lost time.
    pub fn new(
        intersection: IntersectionId,
        lost_time: u32,
        phases: Vec<Phase>,
        min_green: u32,
        max_green: u32,
    ) -> Result<Self, SignalError> {
        let cycle = phases.iter().map(|p| p.green).sum::<u32>() + lost_time;
        let plan = Self {
            intersection,
            cycle,
            lost_time,
            min_green,
            max_green,
            phases,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Equal split of `cycle - lost_time` across the given approach groups.
    pub fn equal_split(
        intersection: IntersectionId,
        cycle: u32,
        lost_time: u32,
        groups: Vec<Vec<EdgeId>>,
        min_green: u32,
        max_green: u32,
    ) -> Result<Self, SignalError> {
        if groups.is_empty() {
            return Err(SignalError::NoPhases);
        }
        let usable = cycle.saturating_sub(lost_time);
        let greens = apportion(usable, &vec![1.0; groups.len()]);
        Self::new(
            intersection,
            lost_time,
            groups
                .into_iter()
                .zip(greens)
                .map(|(a, g)| Phase::new(a, g))
                .collect(),
            min_green,
            max_green,
        )
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        if self.phases.is_empty() {
            return Err(SignalError::NoPhases);
        }
        let usable = self.usable_green();
        let n = self.phases.len() as u32;
        if self.min_green > self.max_green || n * self.min_green > usable || n * self.max_green < usable {
            return Err(SignalError::Infeasible {
                usable,
                phases: self.phases.len(),
                min: self.min_green,
                max: self.max_green,
            });
        }
        let mut seen = Vec::new();
        for p in &self.phases {
            if p.green < self.min_green || p.green > self.max_green {
                return Err(SignalError::GreenOutOfBounds {
                    green: p.green,
                    min: self.min_green,
                    max: self.max_green,
                });
            }
            for a in &p.approaches {
                if seen.contains(a) {
                    return Err(SignalError::DuplicateApproach(*a));
                }
                seen.push(*a);
            }
        }
        debug_assert_eq!(self.greens().iter().sum::<u32>(), usable);
        Ok(())
    }

    pub fn usable_green(&self) -> u32 {
        self.cycle - self.lost_time
    }

    pub fn greens(&self) -> Vec<u32> {
        self.phases.iter().map(|p| p.green).collect()
    }

    pub fn phase_of(&self, approach: EdgeId) -> Result<usize, SignalError> {
        self.phases
            .iter()
            .position(|p| p.approaches.contains(&approach))
            .ok_or(SignalError::UnknownApproach {
                intersection: self.intersection,
                approach,
            })
    }

    pub fn green_share(&self, approach: EdgeId) -> Result<f64, SignalError> {
        let phase = self.phase_of(approach)?;
        Ok(f64::from(self.phases[phase].green) / f64::from(self.cycle))
    }

    /// Whether `phase` shows green at `offset` seconds into the cycle.
    pub fn phase_green_at(&self, phase: usize, offset: f64) -> bool {
        let gap = f64::from(self.lost_time) / self.phases.len() as f64;
        let mut start = 0.0;
        for (i, p) in self.phases.iter().enumerate() {
            let end = start + f64::from(p.green);
            if i == phase {
                return offset >= start && offset < end;
            }
            start = end + gap;
        }
        false
    }
}

/// Largest-remainder split of `total` whole units by `weights`. All-zero
/// weights split equally; leftover units go to the lowest indices on ties.
pub fn apportion(total: u32, weights: &[f64]) -> Vec<u32> {
    let n = weights.len();
    if n == 0 {
        return Vec::new();
    }
    let sum: f64 = weights.iter().map(|w| w.max(0.0)).sum();
    let quotas: Vec<f64> = if sum > 0.0 {
        weights
            .iter()
            .map(|w| f64::from(total) * w.max(0.0) / sum)
            .collect()
    } else {
        vec![f64::from(total) / n as f64; n]
    };
    let mut out: Vec<u32> = quotas.iter().map(|q| q.floor() as u32).collect();
    let assigned: u32 = out.iter().sum();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned) as usize) {
        out[i] += 1;
    }
    out
}

/// Greens for the current counts before min/max clamping.
pub fn pre_clamp_greens(plan: &SignalPlan, phase_counts: &[f64]) -> Vec<u32> {
    apportion(plan.usable_green(), phase_counts)
}

/// Sums approach counts per phase; approaches missing from `counts` count 0.
pub fn phase_counts(plan: &SignalPlan, counts: &BTreeMap<EdgeId, f64>) -> Vec<f64> {
    plan.phases
        .iter()
        .map(|p| {
            p.approaches
                .iter()
                .map(|a| counts.get(a).copied().unwrap_or(0.0))
                .sum()
        })
        .collect()
}

fn clamp_split(usable: u32, weights: &[f64], min: u32, max: u32) -> Vec<u32> {
    let n = weights.len();
    let mut fixed: Vec<Option<u32>> = vec![None; n];
    loop {
        let free: Vec<usize> = (0..n).filter(|&i| fixed[i].is_none()).collect();
        let fixed_sum: u32 = fixed.iter().flatten().sum();
        let remaining = usable.saturating_sub(fixed_sum);
        if free.is_empty() {
            break;
        }
        let free_weights: Vec<f64> = free.iter().map(|&i| weights[i]).collect();
        let split = apportion(remaining, &free_weights);
        let low: Vec<usize> = free
            .iter()
            .zip(&split)
            .filter(|(_, &g)| g < min)
            .map(|(&i, _)| i)
            .collect();
        let high: Vec<usize> = free
            .iter()
            .zip(&split)
            .filter(|(_, &g)| g > max)
            .map(|(&i, _)| i)
            .collect();
        if !low.is_empty() {
            low.iter().for_each(|&i| fixed[i] = Some(min));
        } else if !high.is_empty() {
            high.iter().for_each(|&i| fixed[i] = Some(max));
        } else {
            for (&i, g) in free.iter().zip(split) {
                fixed[i] = Some(g);
            }
            break;
        }
    }
    let mut greens: Vec<u32> = fixed.into_iter().map(|g| g.unwrap_or(min)).collect();
    // Repair any residue left by an all-fixed outcome, staying within bounds.
    let mut total: u32 = greens.iter().sum();
    let mut i = 0;
    while total != usable && i < 2 * n * (usable as usize + 1) {
        let k = i % n;
        if total < usable && greens[k] < max {
            greens[k] += 1;
            total += 1;
        } else if total > usable && greens[k] > min {
            greens[k] -= 1;
            total -= 1;
        }
        i += 1;
    }
    greens
}

/// Re-splits the usable green proportionally to each phase's total approach
/// count, then clamps to `[min_green, max_green]` and redistributes. Uses only
/// this intersection's counts.
pub fn atlc_update(plan: &SignalPlan, counts: &BTreeMap<EdgeId, f64>) -> SignalPlan {
    let weights = phase_counts(plan, counts);
    let greens = clamp_split(plan.usable_green(), &weights, plan.min_green, plan.max_green);
    let mut next = plan.clone();
    for (p, g) in next.phases.iter_mut().zip(greens) {
        p.green = g;
    }
    debug_assert!(next.validate().is_ok());
    next
}
