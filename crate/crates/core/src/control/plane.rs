//! Per-tick driver for the infrastructure controllers. Each controller owns
//! one intersection or one dual pair and reads only its own edges.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::dlg::{dlg_screen, DlgReport, DlgThresholds, LaneGroup};
use super::lanes::{dlr_check, dlr_commit, CommitOutcome, DlrAction, DlrParams, DualEdgePair, ReversalState, Side};
use super::signals::{atlc_update, SignalPlan};
use crate::network::{EdgeId, IntersectionId, RoadNetwork};
use crate::traffic::{Tick, World, WorldError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalMode {
    /// Green splits recomputed from approach counts at every cycle start.
    Adaptive,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignalSettings {
    /// When false no intersection gets a signal.
    pub enabled: bool,
    pub mode: SignalMode,
    pub cycle: u32,
    pub lost_time: u32,
    pub min_green: u32,
    pub max_green: u32,
}

impl Default for SignalSettings {
    fn default() -> Self {
        Self {
            enabled: true,
            mode: SignalMode::Adaptive,
            cycle: 60,
            lost_time: 4,
            min_green: 10,
            max_green: 46,
        }
    }
}

/// One control decision, for the optional trace output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlTraceRow {
    pub tick: Tick,
    pub controller: String,
    pub kind: String,
    pub action: String,
    pub inputs_digest: String,
}

#[derive(Debug, Clone)]
struct PairController {
    pair: DualEdgePair,
    window_start: (u64, u64),
}

#[derive(Debug, Clone)]
pub struct ControlPlane {
    signals: SignalSettings,
    dlr: Option<DlrParams>,
    pairs: Vec<PairController>,
    trace: Option<Vec<ControlTraceRow>>,
    reversals: u64,
}

fn fnv1a(text: &str) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

/// Splits an intersection's incoming edges into east-west and north-south
/// movements by heading. Returns the non-empty groups in that order.
pub fn approach_groups(net: &RoadNetwork, node: IntersectionId) -> Vec<Vec<EdgeId>> {
    let mut ew = Vec::new();
    let mut ns = Vec::new();
    for e in net.incoming(node) {
        let a = net.intersection(e.from).expect("validated").position;
        let b = net.intersection(e.to).expect("validated").position;
        if (b.x - a.x).abs() >= (b.y - a.y).abs() {
            ew.push(e.id);
        } else {
            ns.push(e.id);
        }
    }
    ew.sort();
    ns.sort();
    [ew, ns].into_iter().filter(|g| !g.is_empty()).collect()
}

impl ControlPlane {
    /// Installs signal plans on every signalized intersection that has at
    /// least two movement groups, and lane controllers on every dual pair
    /// when `dlr` is given.
    pub fn install(world: &mut World, signals: SignalSettings, dlr: Option<DlrParams>) -> Result<Self, WorldError> {
        let net = world.network().clone();
        if signals.enabled {
            for node in net.intersections() {
                if !node.signalized {
                    continue;
                }
                let groups = approach_groups(&net, node.id);
                if groups.len() < 2 {
                    continue;
                }
                let plan = SignalPlan::equal_split(
                    node.id,
                    signals.cycle,
                    signals.lost_time,
                    groups,
                    signals.min_green,
                    signals.max_green,
                )?;
                world.install_signal(plan, 0)?;
            }
        }
        let mut pairs = Vec::new();
        if dlr.is_some() {
            for (a, b) in net.dual_pairs() {
                let la = world.edge_state(a).expect("pair edge").lanes;
                let lb = world.edge_state(b).expect("pair edge").lanes;
                let pair = DualEdgePair::new(a, la, b, lb).expect("edges have lanes");
                pairs.push(PairController {
                    pair,
                    window_start: (0, 0),
                });
            }
        }
        Ok(Self {
            signals,
            dlr,
            pairs,
            trace: None,
            reversals: 0,
        })
    }

    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn take_trace(&mut self) -> Vec<ControlTraceRow> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn pairs(&self) -> impl Iterator<Item = &DualEdgePair> {
        self.pairs.iter().map(|p| &p.pair)
    }

    /// Committed lane reversals so far.
    pub fn reversals(&self) -> u64 {
        self.reversals
    }

    fn record(&mut self, tick: Tick, controller: String, kind: &str, action: String, inputs: &str) {
        if let Some(t) = &mut self.trace {
            t.push(ControlTraceRow {
                tick,
                controller,
                kind: kind.into(),
                action,
                inputs_digest: fnv1a(inputs),
            });
        }
    }

    /// Runs all controllers in id order for the tick the world is about to
    /// simulate.
    pub fn before_step(&mut self, world: &mut World) {
        let t = world.tick();
        self.update_signals(world, t);
        if let Some(params) = self.dlr {
            self.update_lanes(world, t, &params);
        }
    }

    fn update_signals(&mut self, world: &mut World, t: Tick) {
        let spt = world.seconds_per_tick();
        let nodes: Vec<IntersectionId> = world.signals().map(|s| s.plan.intersection).collect();
        for node in nodes {
            let sig = world.signal(node).expect("installed");
            let elapsed = (t - sig.cycle_start) as f64 * spt;
            if elapsed + 1e-9 < f64::from(sig.plan.cycle) {
                continue;
            }
            let counts: BTreeMap<EdgeId, f64> = sig
                .plan
                .phases
                .iter()
                .flat_map(|p| &p.approaches)
                .map(|a| (*a, f64::from(world.edge_state(*a).expect("approach").count)))
                .collect();
            let plan = match self.signals.mode {
                SignalMode::Adaptive => atlc_update(&sig.plan, &counts),
                SignalMode::Fixed => sig.plan.clone(),
            };
            let greens = plan.greens();
            let sig = world.signal_mut(node).expect("installed");
            sig.plan = plan;
            sig.cycle_start = t;
            if self.trace.is_some() {
                self.record(t, node.to_string(), "atlc", format!("greens={greens:?}"), &format!("{counts:?}"));
            }
        }
    }

    fn update_lanes(&mut self, world: &mut World, t: Tick, params: &DlrParams) {
        let window = params.window.max(1);
        for i in 0..self.pairs.len() {
            let (a, b) = (self.pairs[i].pair.edge_a, self.pairs[i].pair.edge_b);
            if let ReversalState::Clearing { .. } = self.pairs[i].pair.state {
                let outcome = dlr_commit(&mut self.pairs[i].pair, &*world, t, params).expect("clearing");
                if outcome == CommitOutcome::Committed {
                    let p = &self.pairs[i].pair;
                    let (la, lb) = (p.lanes_a, p.lanes_b);
                    world.set_lanes(a, la, la).expect("donor lane empty");
                    world.set_lanes(b, lb, lb).expect("receiver grows");
                    self.reversals += 1;
                    self.record(t, format!("{a}-{b}"), "dlr", format!("commit lanes={la}/{lb}"), "");
                }
            }
            if t == 0 || t % window != 0 {
                continue;
            }
            let ea = world.edge_state(a).expect("pair edge").entered_total;
            let eb = world.edge_state(b).expect("pair edge").entered_total;
            let (sa, sb) = self.pairs[i].window_start;
            self.pairs[i].window_start = (ea, eb);
            let (da, db) = ((ea - sa) as f64, (eb - sb) as f64);
            let action = dlr_check(&self.pairs[i].pair, da, db, t, params);
            if let DlrAction::BeginReversal { toward } = action {
                let pair = &mut self.pairs[i].pair;
                pair.begin(toward, t).expect("check passed");
                let donor = toward.other();
                let lanes = pair.lanes(donor);
                world
                    .set_lanes(pair.edge(donor), lanes, pair.open_lanes(donor))
                    .expect("close donor lane");
                let dir = if toward == Side::A { a } else { b };
                self.record(t, format!("{a}-{b}"), "dlr", format!("begin toward {dir}"), &format!("{da} {db}"));
            }
        }
    }

    /// Screens every signalized intersection using the vehicles that
    /// entered each approach over `elapsed_ticks` (passed in as `entered`)
    /// against the capacity its green share gives it.
    pub fn dlg_screen_all(
        &self,
        world: &World,
        entered: &BTreeMap<EdgeId, f64>,
        elapsed_ticks: u64,
        thresholds: &DlgThresholds,
    ) -> Vec<DlgReport> {
        let seconds = elapsed_ticks as f64 * world.seconds_per_tick();
        let sat = world.cost_params().saturation_flow;
        world
            .signals()
            .filter_map(|s| {
                let groups: Vec<LaneGroup> = s
                    .plan
                    .phases
                    .iter()
                    .flat_map(|p| &p.approaches)
                    .map(|a| {
                        let lanes = world.edge_state(*a).expect("approach").lanes;
                        let share = s.plan.green_share(*a).expect("approach");
                        LaneGroup {
                            approach: *a,
                            lanes,
                            capacity: (sat * f64::from(lanes) * share * seconds).max(f64::MIN_POSITIVE),
                        }
                    })
                    .collect();
                dlg_screen(s.plan.intersection, entered, &groups, thresholds).ok()
            })
            .collect()
    }
}
