use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("vehicle state is not finite at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("non-finite {0}")]
    NonFiniteInput(&'static str),
    #[error("time step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("thrust {thrust} N outside [0, {max}]")]
    ThrustOutOfRange { thrust: f64, max: f64 },
    #[error("pitch torque {torque} N m exceeds limit {max}")]
    TorqueOutOfRange { torque: f64, max: f64 },
    #[error("invalid vehicle parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensingError {
    #[error("deflection must be non-negative, got {0}")]
    NegativeDeflection(f64),
    #[error("resistance must be non-negative, got {0}")]
    NegativeResistance(f64),
    #[error("measured voltage {0} V: open circuit or out of range")]
    OpenCircuit(f64),
    #[error("cutoff {cutoff} Hz must lie in (0, {nyquist}) Hz")]
    InvalidCutoff { cutoff: f64, nyquist: f64 },
    #[error("filter order must be at least 1")]
    InvalidOrder,
    #[error("time step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("samples are not time-ordered at index {0}")]
    UnorderedSamples(usize),
    #[error("thresholds must satisfy on > off > 0 (on = {on}, off = {off})")]
    InvalidThresholds { on: f64, off: f64 },
    #[error("invalid calibration table: {0}")]
    InvalidTable(String),
    #[error("invalid ADC configuration: {0}")]
    InvalidAdc(String),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("unknown parameter path `{0}`")]
    UnknownKey(String),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Sensing(#[from] SensingError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed CSV: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("metric unavailable: {0}")]
    Metric(String),
}
