//! Experiment configuration, read from TOML. Unknown keys are errors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::contact::{ConfigurationName, HornSettings};
use crate::control::{CommandProfile, PidGains, Pilot, ScriptPoint};
use crate::dynamics::{VehicleParams, Wall};
use crate::error::ConfigError;
use crate::sensing::SensingSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    TouchAndGo,
    Pushing,
    Scripted,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::TouchAndGo => "touch_and_go",
            Scenario::Pushing => "pushing",
            Scenario::Scripted => "scripted",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").to_ascii_lowercase().as_str() {
            "touch_and_go" | "touchandgo" | "tag" => Ok(Scenario::TouchAndGo),
            "pushing" | "push" => Ok(Scenario::Pushing),
            "scripted" => Ok(Scenario::Scripted),
            _ => Err(format!(
                "unknown scenario `{s}` (expected touch_and_go, pushing or scripted)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlSettings {
    pub attitude: PidGains,
    pub altitude: PidGains,
    /// Clear-of-wall time before a touch-and-go re-approach, s.
    pub separation_hold: f64,
    /// Standard deviation of the per-approach pitch command offset, rad.
    pub pilot_jitter: f64,
}

impl Default for ControlSettings {
    fn default() -> Self {
        Self {
            attitude: PidGains::ATTITUDE,
            altitude: PidGains::ALTITUDE,
            separation_hold: Pilot::SEPARATION_HOLD,
            pilot_jitter: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSettings {
    /// Gap between the foremost horn tip and the wall at start, m.
    pub standoff: f64,
    /// Start and hold altitude, m.
    pub altitude: f64,
    /// Hover time before the first approach, s.
    pub approach_start: f64,
}

impl Default for InitialSettings {
    fn default() -> Self {
        Self {
            standoff: 0.18,
            altitude: 1.0,
            approach_start: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TouchAndGoSettings {
    /// rad
    pub approach_pitch: f64,
    pub n_bumps: u32,
}

impl Default for TouchAndGoSettings {
    fn default() -> Self {
        Self {
            approach_pitch: 0.26,
            n_bumps: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PushingSettings {
    pub approach_pitch: f64,
    pub hold_duration: f64,
    pub release_pitch: f64,
}

impl Default for PushingSettings {
    fn default() -> Self {
        Self {
            approach_pitch: 0.26,
            hold_duration: 10.0,
            release_pitch: -0.17,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScriptedSettings {
    pub points: Vec<ScriptPoint>,
}

impl Default for ScriptedSettings {
    fn default() -> Self {
        Self {
            points: vec![ScriptPoint {
                t: 0.0,
                pitch: 0.0,
                altitude: 1.0,
            }],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsSettings {
    /// RMSE window before upper-horn onset, s.
    pub rmse_pre: f64,
    /// RMSE window after upper-horn onset, s.
    pub rmse_post: f64,
    /// Pushing stability band around the setpoint, deg.
    pub pushing_band_deg: f64,
    /// Time after first contact excluded from the pushing stability span, s.
    pub pushing_settle: f64,
    /// State log rate, Hz.
    pub log_rate: f64,
    /// Contact episodes closer than this are one impact, s.
    pub impact_merge_gap: f64,
}

impl Default for MetricsSettings {
    fn default() -> Self {
        Self {
            rmse_pre: 0.2,
            rmse_post: 1.5,
            pushing_band_deg: 7.0,
            pushing_settle: 1.0,
            log_rate: 100.0,
            impact_merge_gap: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub scenario: Scenario,
    pub configuration: ConfigurationName,
    /// Physics step, s.
    pub dt: f64,
    /// Simulated time, s. Defaults to a scenario-dependent length.
    pub duration: Option<f64>,
    pub vehicle: VehicleParams,
    pub wall: Wall,
    pub horns: HornSettings,
    pub sensing: SensingSettings,
    pub control: ControlSettings,
    pub initial: InitialSettings,
    pub touch_and_go: TouchAndGoSettings,
    pub pushing: PushingSettings,
    pub scripted: ScriptedSettings,
    pub metrics: MetricsSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            scenario: Scenario::TouchAndGo,
            configuration: ConfigurationName::FullSoft,
            dt: 1e-3,
            duration: None,
            vehicle: VehicleParams::default(),
            wall: Wall::default(),
            horns: HornSettings::default(),
            sensing: SensingSettings::default(),
            control: ControlSettings::default(),
            initial: InitialSettings::default(),
            touch_and_go: TouchAndGoSettings::default(),
            pushing: PushingSettings::default(),
            scripted: ScriptedSettings::default(),
            metrics: MetricsSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn touch_and_go(configuration: ConfigurationName, seed: u64) -> Self {
        Self {
            seed,
            configuration,
            ..Self::default()
        }
    }

    pub fn pushing(configuration: ConfigurationName, seed: u64) -> Self {
        Self {
            seed,
            configuration,
            scenario: Scenario::Pushing,
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        Self::from_toml_with_overrides(text, &[])
    }

    /// Parses `text` after setting each dotted `path = value` override.
    /// Values are parsed as TOML scalars or arrays; anything else is a string.
    pub fn from_toml_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        for (path, value) in overrides {
            set_path(&mut table, path, parse_value(value))?;
        }
        let cfg: ExperimentConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::load_with_overrides(path, &[])
    }

    pub fn load_with_overrides(path: &Path, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_with_overrides(&text, overrides)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Applies dotted-path overrides to an already built config.
    pub fn with_overrides(&self, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        Self::from_toml_with_overrides(&self.to_toml_string(), overrides)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return invalid(format!("dt must be positive, got {}", self.dt));
        }
        if let Some(d) = self.duration {
            if !(d > 0.0) {
                return invalid(format!("duration must be positive, got {d}"));
            }
        }
        self.vehicle
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.wall.mu < 0.0 {
            return invalid("wall friction must be non-negative".into());
        }
        let h = &self.horns;
        for (name, m) in [("soft", &h.soft), ("hard", &h.hard)] {
            if !(m.stiffness > 0.0 && m.damping >= 0.0 && m.failure_energy > 0.0) {
                return invalid(format!(
                    "{name} horn needs stiffness > 0, damping >= 0, failure_energy > 0"
                ));
            }
        }
        if !(h.max_deflection > 0.0) || h.upper_tip.1 <= 0.0 || h.lower_tip.1 >= 0.0 {
            return invalid("horn tips must sit above (upper) and below (lower) the centre of mass".into());
        }
        if !(self.control.attitude.is_valid() && self.control.altitude.is_valid()) {
            return invalid("PID gains need output_limit > 0 and integral_limit >= 0".into());
        }
        if self.control.pilot_jitter < 0.0 || self.control.separation_hold < 0.0 {
            return invalid("pilot jitter and separation hold must be non-negative".into());
        }
        let sensor_steps = self.sensing.sample_period() / self.dt;
        let log_steps = 1.0 / (self.metrics.log_rate * self.dt);
        for (what, steps) in [("sensor", sensor_steps), ("log", log_steps)] {
            if steps < 1.0 - 1e-9 || (steps - steps.round()).abs() > 1e-6 {
                return invalid(format!("{what} period must be a whole number of physics steps"));
            }
        }
        if self.metrics.rmse_pre < 0.0 || self.metrics.rmse_post <= 0.0 {
            return invalid("RMSE window must be non-empty".into());
        }
        self.profile().validate().map_err(ConfigError::Invalid)?;
        Ok(())
    }

    pub fn profile(&self) -> CommandProfile {
        match self.scenario {
            Scenario::TouchAndGo => CommandProfile::TouchAndGo {
                approach_pitch: self.touch_and_go.approach_pitch,
                n_bumps: self.touch_and_go.n_bumps,
                altitude: self.initial.altitude,
                approach_start: self.initial.approach_start,
            },
            Scenario::Pushing => CommandProfile::Pushing {
                approach_pitch: self.pushing.approach_pitch,
                hold_duration: self.pushing.hold_duration,
                release_pitch: self.pushing.release_pitch,
                altitude: self.initial.altitude,
                approach_start: self.initial.approach_start,
            },
            Scenario::Scripted => CommandProfile::Scripted {
                points: self.scripted.points.clone(),
            },
        }
    }

    pub fn effective_duration(&self) -> f64 {
        self.duration.unwrap_or_else(|| match self.scenario {
            Scenario::TouchAndGo => self.initial.approach_start + 3.5 * f64::from(self.touch_and_go.n_bumps) + 2.0,
            Scenario::Pushing => self.initial.approach_start + self.pushing.hold_duration + 5.0,
            Scenario::Scripted => self.scripted.points.last().map_or(0.0, |p| p.t) + 2.0,
        })
    }
}

fn parse_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn set_path(table: &mut toml::Table, path: &str, value: toml::Value) -> Result<(), ConfigError> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| ConfigError::UnknownKey(path.into()))?;
    let mut cur = table;
    for part in parts {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::UnknownKey(path.into()))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
    }

    #[test]
    fn parses_sections() {
        let text = r#"
            seed = 4
            scenario = "pushing"
            configuration = "full_hard"
            [wall]
            mu = 0.0
            [horns.soft]
            stiffness = 250.0
            damping = 5.0
            [pushing]
            hold_duration = 3.0
        "#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.scenario, Scenario::Pushing);
        assert_eq!(cfg.configuration, ConfigurationName::FullHard);
        assert_eq!(cfg.wall.mu, 0.0);
        assert_eq!(cfg.horns.soft.stiffness, 250.0);
        assert!(cfg.horns.soft.failure_energy.is_infinite());
        assert_eq!(cfg.pushing.hold_duration, 3.0);
    }

    #[test]
    fn unknown_keys_are_errors() {
        assert!(ExperimentConfig::from_toml_str("sede = 3").is_err());
        assert!(ExperimentConfig::from_toml_str("[wall]\nfriction = 0.1").is_err());
        let err = ExperimentConfig::default()
            .with_overrides(&[("horns.soft.stifness".into(), "1.0".into())])
            .unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)));
    }

    #[test]
    fn overrides_apply() {
        let cfg = ExperimentConfig::default()
            .with_overrides(&[
                ("horns.soft.stiffness".into(), "420".into()),
                ("configuration".into(), "half_soft".into()),
                ("horns.upper_tip".into(), "[0.1, 0.04]".into()),
            ])
            .unwrap();
        assert_eq!(cfg.horns.soft.stiffness, 420.0);
        assert_eq!(cfg.configuration, ConfigurationName::HalfSoft);
        assert_eq!(cfg.horns.upper_tip, (0.1, 0.04));
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ExperimentConfig::pushing(ConfigurationName::FullHard, 12);
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_invalid_values() {
        assert!(ExperimentConfig::from_toml_str("dt = 0.0").is_err());
        assert!(ExperimentConfig::from_toml_str("dt = 0.0007").is_err());
        assert!(ExperimentConfig::from_toml_str("duration = -1.0").is_err());
        assert!(ExperimentConfig::from_toml_str("[touch_and_go]\nn_bumps = 0").is_err());
        assert!(ExperimentConfig::from_toml_str("[vehicle]\nthrust_max = 1.0").is_err());
    }
}
