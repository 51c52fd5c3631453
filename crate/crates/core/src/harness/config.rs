use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::baselines::AlertParams;
use crate::comms::CommsParams;
use crate::control::{DlrParams, SignalSettings};
use crate::network::{generate_grid, EdgeId, GridSpec, RoadNetwork};
use crate::routing::RoutingParams;
use crate::traffic::{CostModelParams, Tick};

pub const SCENARIO_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Vam,
    Centralized,
    Alert,
    None,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Vam, Strategy::Centralized, Strategy::Alert, Strategy::None];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Vam => "vam",
            Strategy::Centralized => "centralized",
            Strategy::Alert => "alert",
            Strategy::None => "none",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| HarnessError::Config(format!("unknown strategy {s:?} (expected vam, centralized, alert or none)")))
    }
}

/// Exactly one of `grid` or `file`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    /// Network description file, relative to the scenario file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LaneReversalConfig {
    pub enabled: bool,
    pub ratio_threshold: f64,
    pub window: u64,
    pub cooldown: u64,
}

impl Default for LaneReversalConfig {
    fn default() -> Self {
        let d = DlrParams::default();
        Self {
            enabled: false,
            ratio_threshold: d.ratio_threshold,
            window: d.window,
            cooldown: d.cooldown,
        }
    }
}

impl LaneReversalConfig {
    pub fn params(&self) -> Option<DlrParams> {
        self.enabled.then_some(DlrParams {
            ratio_threshold: self.ratio_threshold,
            window: self.window,
            cooldown: self.cooldown,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selector {
    /// Earliest-departing vehicle (at or after `at`) whose initial route
    /// uses the trigger edge.
    FirstThrough,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectionConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vehicle: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub select: Option<Selector>,
    pub edge: EdgeId,
    #[serde(default)]
    pub at: Tick,
    #[serde(default = "default_stop")]
    pub duration: Tick,
}

fn default_stop() -> Tick {
    30
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub format_version: u32,
    #[serde(default)]
    pub network: NetworkConfig,
    pub vehicles: u32,
    /// Departures are uniform over `[0, departure_window]`.
    pub departure_window: Tick,
    pub seed: u64,
    #[serde(default = "default_runs")]
    pub runs: u32,
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    /// Defaults to 20 x `departure_window` (at least 1000).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_ticks: Option<Tick>,
    #[serde(default = "default_spt")]
    pub seconds_per_tick: f64,
    #[serde(default)]
    pub cost: CostModelParams,
    #[serde(default)]
    pub comms: CommsParams,
    #[serde(default)]
    pub routing: RoutingParams,
    #[serde(default)]
    pub signals: SignalSettings,
    #[serde(default)]
    pub lane_reversal: LaneReversalConfig,
    #[serde(default)]
    pub alert: AlertParams,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub injections: Vec<InjectionConfig>,
}

fn default_runs() -> u32 {
    1
}

fn default_strategy() -> Strategy {
    Strategy::Vam
}

fn default_spt() -> f64 {
    1.0
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            format_version: SCENARIO_FORMAT_VERSION,
            network: NetworkConfig {
                grid: Some(GridSpec::new(10, 10, 1500.0, 2, 13.9)),
                file: None,
            },
            vehicles: 1000,
            departure_window: 1000,
            seed: 42,
            runs: 1,
            strategy: Strategy::Vam,
            max_ticks: None,
            seconds_per_tick: 1.0,
            cost: CostModelParams::default(),
            comms: CommsParams::default(),
            routing: RoutingParams::default(),
            signals: SignalSettings::default(),
            lane_reversal: LaneReversalConfig::default(),
            alert: AlertParams::default(),
            injections: Vec::new(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Reads a scenario file; a relative network file path is resolved
    /// against the scenario's directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(file) = &mut cfg.network.file {
            if file.is_relative() {
                if let Some(dir) = path.parent() {
                    *file = dir.join(&*file);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn max_ticks(&self) -> Tick {
        self.max_ticks.unwrap_or((20 * self.departure_window).max(1000))
    }

    /// Checks everything that does not need the network.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.format_version != SCENARIO_FORMAT_VERSION {
            return bad(format!(
                "unsupported scenario format_version {} (expected {SCENARIO_FORMAT_VERSION})",
                self.format_version
            ));
        }
        if self.vehicles < 1 {
            return bad("vehicles must be at least 1".into());
        }
        if self.runs < 1 {
            return bad("runs must be at least 1".into());
        }
        if !(self.seconds_per_tick > 0.0 && self.seconds_per_tick.is_finite()) {
            return bad("seconds_per_tick must be positive".into());
        }
        match (&self.network.grid, &self.network.file) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => return bad("network needs exactly one of `grid` or `file`".into()),
        }
        self.cost.validate().map_err(HarnessError::Config)?;
        self.comms.validate().map_err(HarnessError::Config)?;
        self.routing.validate().map_err(HarnessError::Config)?;
        self.alert.validate().map_err(HarnessError::Config)?;
        if self.lane_reversal.enabled && !(self.lane_reversal.ratio_threshold >= 1.0) {
            return bad("lane_reversal.ratio_threshold must be at least 1".into());
        }
        for (i, inj) in self.injections.iter().enumerate() {
            match (inj.vehicle, inj.select) {
                (Some(v), None) if v >= self.vehicles => {
                    return bad(format!("injection {i}: vehicle {v} does not exist"));
                }
                (Some(_), None) | (None, Some(_)) => {}
                _ => return bad(format!("injection {i}: give exactly one of `vehicle` or `select`")),
            }
        }
        Ok(())
    }

    /// Builds the network and checks the parts of the config that refer
    /// to it.
    pub fn build_network(&self) -> Result<RoadNetwork, HarnessError> {
        let net = match (&self.network.grid, &self.network.file) {
            (Some(g), None) => generate_grid(g).map_err(|e| HarnessError::Config(e.to_string()))?,
            (None, Some(f)) => {
                let text = std::fs::read_to_string(f).map_err(|e| HarnessError::Config(format!("{}: {e}", f.display())))?;
                RoadNetwork::from_toml_str(&text).map_err(|e| HarnessError::Config(e.to_string()))?
            }
            _ => return Err(HarnessError::Config("network needs exactly one of `grid` or `file`".into())),
        };
        for (i, inj) in self.injections.iter().enumerate() {
            if net.edge(inj.edge).is_none() {
                return Err(HarnessError::Config(format!("injection {i}: unknown edge {}", inj.edge)));
            }
        }
        if net.node_count() < 2 {
            return Err(HarnessError::Config("network needs at least two intersections".into()));
        }
        Ok(net)
    }

    /// Copy with everything that may legitimately differ between compared
    /// configurations normalized away.
    fn comparison_key(&self) -> ScenarioConfig {
        ScenarioConfig {
            strategy: Strategy::Vam,
            ..self.clone()
        }
    }

    /// Sets a sweepable parameter by name.
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<(), HarnessError> {
        let count = |v: f64| -> Result<u64, HarnessError> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as u64)
            } else {
                Err(HarnessError::Config(format!("{name} needs a whole number, got {v}")))
            }
        };
        match name {
            "P_R" | "compliance" => self.routing.compliance = value,
            "epsilon" | "switch_margin" => self.routing.switch_margin = value,
            "k" => self.routing.k = count(value)? as usize,
            "D_R" | "range" => self.comms.range = value,
            "I_T" | "interval" => self.comms.interval = count(value)?,
            "N" | "horizon" => self.comms.horizon = count(value)? as usize,
            "vehicles" => self.vehicles = count(value)? as u32,
            "departure_window" => self.departure_window = count(value)?,
            "saturation_flow" => self.cost.saturation_flow = value,
            _ => {
                return Err(HarnessError::Config(format!(
                    "unknown sweep parameter {name:?} (expected P_R, epsilon, k, D_R, I_T, N, vehicles, departure_window or saturation_flow)"
                )))
            }
        }
        self.validate()
    }
}

/// Fails unless the configurations differ only in their strategy.
pub fn check_comparable(configs: &[ScenarioConfig]) -> Result<(), HarnessError> {
    let Some(first) = configs.first() else {
        return Err(HarnessError::Config("nothing to compare".into()));
    };
    let key = first.comparison_key();
    for (i, c) in configs.iter().enumerate().skip(1) {
        if c.comparison_key() != key {
            let what = if c.seed != first.seed {
                "seed"
            } else if c.runs != first.runs {
                "runs"
            } else {
                "non-strategy fields"
            };
            return Err(HarnessError::Config(format!("config {i} differs from config 0 in {what}")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
format_version = 1
vehicles = 50
departure_window = 100
seed = 7
runs = 3
strategy = "alert"

[network.grid]
rows = 3
cols = 4
block_length = 500.0

[routing]
compliance = 0.4

[[injections]]
select = "first-through"
edge = 5
at = 10
"#;

    #[test]
    fn parses_and_round_trips() {
        let c = ScenarioConfig::from_toml_str(SAMPLE).unwrap();
        c.validate().unwrap();
        assert_eq!(c.strategy, Strategy::Alert);
        assert_eq!(c.routing.compliance, 0.4);
        assert_eq!(c.routing.k, 3);
        assert_eq!(c.injections[0].duration, 30);
        assert_eq!(c.max_ticks(), 2000);
        let again = ScenarioConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(again, c);
        assert_eq!(c.build_network().unwrap().node_count(), 12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ScenarioConfig::from_toml_str("format_version = 1\nvehicles = 3\n").is_err());
        assert!(ScenarioConfig::from_toml_str(&format!("{SAMPLE}\nbogus = 1")).is_err());
        let mut c = ScenarioConfig::from_toml_str(SAMPLE).unwrap();
        c.vehicles = 0;
        assert!(c.validate().is_err());
        let mut c = ScenarioConfig::from_toml_str(SAMPLE).unwrap();
        c.injections[0].edge = EdgeId(999);
        assert!(c.build_network().is_err());
        let mut c = ScenarioConfig::from_toml_str(SAMPLE).unwrap();
        c.format_version = 2;
        assert!(c.validate().is_err());
        let mut c = ScenarioConfig::from_toml_str(SAMPLE).unwrap();
        c.injections[0].vehicle = Some(1);
        assert!(c.validate().is_err());
    }

    #[test]
    fn comparability() {
        let a = ScenarioConfig::from_toml_str(SAMPLE).unwrap();
        let b = ScenarioConfig { strategy: Strategy::None, ..a.clone() };
        assert!(check_comparable(&[a.clone(), b]).is_ok());
        let c = ScenarioConfig { seed: 8, ..a.clone() };
        let err = check_comparable(&[a, c]).unwrap_err();
        assert!(err.to_string().contains("seed"));
    }

    #[test]
    fn strategy_names() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert!("fastest".parse::<Strategy>().is_err());
    }

    #[test]
    fn set_param() {
        let mut c = ScenarioConfig::default();
        c.set_param("P_R", 0.2).unwrap();
        assert_eq!(c.routing.compliance, 0.2);
        assert!(c.set_param("P_R", 2.0).is_err());
        assert!(c.set_param("k", 1.5).is_err());
        assert!(c.set_param("colour", 1.0).is_err());
    }
}
