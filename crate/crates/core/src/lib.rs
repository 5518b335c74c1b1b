//! Planar simulation of a quadrotor with elastic contact horns striking and
//! pressing against a vertical wall.
//!
//! The crate covers the rigid-body dynamics ([`dynamics`]), the horn contact
//! model ([`contact`]), the synthetic tactile sensing chain ([`sensing`]),
//! the pitch/altitude control stack ([`control`]) and the experiment harness
//! with its metrics and exports ([`harness`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod contact;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod sensing;

pub use contact::{
    compute_deflection, contact_wrench, material_preset, update_damage, ConfigurationName, ContactState, Horn,
    HornConfiguration, HornContact, HornRow, HornSettings, Material,
};
pub use control::{
    altitude_hold, attitude_step_response, command, pid_step, CommandProfile, Phase, PidGains, PidState, Pilot,
    ScriptPoint, Setpoint, StepResponse,
};
pub use dynamics::{body_to_world, step, step_with, total_energy, VehicleParams, VehicleState, Wall, Wrench};
pub use error::{ConfigError, DynamicsError, HarnessError, SensingError};
