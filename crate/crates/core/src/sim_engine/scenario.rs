use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netsim::ChannelConfig;
use crate::path_model::{Point2D, Route};
use crate::reservation::{CoordinationParams, IntersectionGeometry};
use crate::vehicle_agent::{AgentConfig, ControlLimits, PerceptionConfig, PlanningLayers};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioMode {
    StandAlone,
    FuturePathOnly,
    FuturePathWithRsu,
}

impl ScenarioMode {
    pub const ALL: [ScenarioMode; 3] = [
        ScenarioMode::StandAlone,
        ScenarioMode::FuturePathOnly,
        ScenarioMode::FuturePathWithRsu,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ScenarioMode::StandAlone => "stand_alone",
            ScenarioMode::FuturePathOnly => "future_path_only",
            ScenarioMode::FuturePathWithRsu => "future_path_with_rsu",
        }
    }

    pub fn has_rsu(self) -> bool {
        self == ScenarioMode::FuturePathWithRsu
    }

    pub fn layers(self) -> PlanningLayers {
        PlanningLayers {
            intersection_rule: self == ScenarioMode::StandAlone,
            share_paths: self != ScenarioMode::StandAlone,
        }
    }
}

impl std::str::FromStr for ScenarioMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScenarioMode::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| format!("unknown scenario mode `{s}`"))
    }
}

impl std::fmt::Display for ScenarioMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSpec {
    pub id: u32,
    pub name: String,
    pub route: Vec<Point2D>,
    /// Arc length along the route where the vehicle starts.
    #[serde(default)]
    pub start_s: f64,
    /// Arc length along the route where the trip ends.
    pub destination_s: f64,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("cannot read scenario file")]
    Io(#[from] std::io::Error),
    #[error("cannot parse scenario")]
    Parse(#[from] toml::de::Error),
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {reason}")]
    BadValue { key: String, reason: String },
}

/// Everything a trial needs. Every field has a default, so a scenario file
/// only lists what it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub mode: ScenarioMode,
    /// Seconds per step.
    pub dt: f64,
    /// Simulated seconds before a trial is cut off.
    pub horizon: f64,
    /// Each vehicle starts after a uniform delay in `[0, launch_jitter_max]`.
    pub launch_jitter_max: f64,
    pub master_seed: u64,
    pub geometry: IntersectionGeometry,
    pub params: CoordinationParams,
    pub limits: ControlLimits,
    pub perception: PerceptionConfig,
    pub agent: AgentConfig,
    pub channel: ChannelConfig,
    pub vehicles: Vec<VehicleSpec>,
}

/// Two crossing roads through the origin. Car A comes from the west, Car B
/// from the south a little farther out, both leave 80 m past the center.
fn default_vehicles() -> Vec<VehicleSpec> {
    vec![
        VehicleSpec {
            id: 1,
            name: "Car A".into(),
            route: vec![Point2D::new(-80.0, 0.0), Point2D::new(100.0, 0.0)],
            start_s: 0.0,
            destination_s: 160.0,
        },
        VehicleSpec {
            id: 2,
            name: "Car B".into(),
            route: vec![Point2D::new(0.0, -95.0), Point2D::new(0.0, 100.0)],
            start_s: 0.0,
            destination_s: 175.0,
        },
    ]
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            mode: ScenarioMode::FuturePathWithRsu,
            dt: 0.02,
            horizon: 120.0,
            launch_jitter_max: 1.5,
            master_seed: 42,
            geometry: IntersectionGeometry::default(),
            params: CoordinationParams::default(),
            limits: ControlLimits::default(),
            perception: PerceptionConfig::default(),
            agent: AgentConfig::default(),
            channel: ChannelConfig::default(),
            vehicles: default_vehicles(),
        }
    }
}

impl ScenarioConfig {
    pub fn with_mode(&self, mode: ScenarioMode) -> Self {
        Self { mode, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(self.dt > 0.0 && self.dt <= 0.1) {
            return bad(format!("dt must be in (0, 0.1], got {}", self.dt));
        }
        if !(self.launch_jitter_max >= 0.0 && self.launch_jitter_max.is_finite()) {
            return bad("launch_jitter_max must be a non-negative number".into());
        }
        self.params
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.geometry
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !self.limits.is_valid() {
            return bad("limits.a_max and limits.b_max must be positive".into());
        }
        if !self.perception.is_valid() {
            return bad("perception radii must be positive".into());
        }
        if !self.agent.is_valid() {
            return bad("agent settings must be positive".into());
        }
        if !self.channel.is_valid() {
            return bad("channel loss must be in [0, 1] and latencies non-negative".into());
        }
        if self.vehicles.is_empty() {
            return bad("at least one vehicle is required".into());
        }
        let mut ids: Vec<u32> = self.vehicles.iter().map(|v| v.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return bad("vehicle ids must be unique".into());
        }
        let mut longest: f64 = 0.0;
        for v in &self.vehicles {
            let route =
                Route::new(v.route.clone()).map_err(|e| ConfigError::Invalid(format!("vehicle {}: {e}", v.id)))?;
            if !(0.0 <= v.start_s && v.start_s <= v.destination_s && v.destination_s <= route.length()) {
                return bad(format!(
                    "vehicle {}: need 0 <= start_s <= destination_s <= route length ({:.3})",
                    v.id,
                    route.length()
                ));
            }
            longest = longest.max(v.destination_s - v.start_s);
        }
        let needed = longest / (self.params.v_max / 2.0) + self.launch_jitter_max;
        if !(self.horizon >= needed) {
            return bad(format!(
                "horizon {} s is shorter than the {needed:.1} s traversal bound",
                self.horizon
            ));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    /// Sets one field by dotted path, e.g. `params.d_margin=5.0` or
    /// `vehicles.1.start_s=10`. The value is read as a TOML value and falls
    /// back to a plain string.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let mut root = toml::Value::try_from(&*self).expect("scenario serializes");
        let parsed = parse_value(value);
        {
            let mut slot = &mut root;
            for part in key.split('.') {
                slot = match slot {
                    toml::Value::Table(t) => t.get_mut(part),
                    toml::Value::Array(a) => part.parse::<usize>().ok().and_then(|i| a.get_mut(i)),
                    _ => None,
                }
                .ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?;
            }
            if slot.is_table() || slot.is_array() {
                return Err(ConfigError::BadValue {
                    key: key.to_string(),
                    reason: "only leaf fields can be overridden".into(),
                });
            }
            *slot = coerce(slot, parsed);
        }
        let updated: ScenarioConfig = root.try_into().map_err(|e: toml::de::Error| ConfigError::BadValue {
            key: key.to_string(),
            reason: e.message().to_string(),
        })?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }
}

fn parse_value(text: &str) -> toml::Value {
    #[derive(Deserialize)]
    struct Wrap {
        v: toml::Value,
    }
    toml::from_str::<Wrap>(&format!("v = {text}"))
        .map(|w| w.v)
        .unwrap_or_else(|_| toml::Value::String(text.to_string()))
}

/// Integers given for float fields stay floats.
fn coerce(current: &toml::Value, new: toml::Value) -> toml::Value {
    match (current, new) {
        (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
        (_, v) => v,
    }
}
