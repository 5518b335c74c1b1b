//! Planar rigid-body dynamics of the quadrotor.
//!
//! Three degrees of freedom: horizontal position `x` (positive toward the
//! wall), altitude `z` and pitch `theta`. Positive pitch leans the vehicle
//! toward the wall, so forward thrust tilts into `+x`.
//!
//! The body frame has `px` pointing forward (toward the wall at zero pitch)
//! and `pz` pointing up. A body point maps to the world as
//!
//! ```text
//! x_w = x + px cos(theta) + pz sin(theta)
//! z_w = z - px sin(theta) + pz cos(theta)
//! ```
//!
//! The pitch moment `my` of a [`Wrench`] is the generalized force conjugate
//! to `theta` under that map, i.e. `r_z * f_x - r_x * f_z` for a force applied
//! at world-frame lever `r`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::DynamicsError;

/// Planar pose and rates of the vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub t: f64,
    pub x: f64,
    pub z: f64,
    pub theta: f64,
    pub vx: f64,
    pub vz: f64,
    pub q: f64,
}

impl VehicleState {
    /// Vehicle at rest at the given position with zero pitch.
    pub fn at_rest(x: f64, z: f64) -> Self {
        Self {
            t: 0.0,
            x,
            z,
            theta: 0.0,
            vx: 0.0,
            vz: 0.0,
            q: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.t, self.x, self.z, self.theta, self.vx, self.vz, self.q]
            .iter()
            .all(|v| v.is_finite())
    }

    fn validate(&self) -> Result<(), DynamicsError> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(DynamicsError::NonFiniteState { t: self.t })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleParams {
    /// kg
    pub mass: f64,
    /// kg m^2 about the pitch axis
    pub inertia_yy: f64,
    pub gravity: f64,
    /// N
    pub thrust_max: f64,
    /// N m
    pub pitch_torque_max: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 0.7,
            inertia_yy: 0.005,
            gravity: 9.81,
            thrust_max: 14.0,
            pitch_torque_max: 0.5,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let all_finite = [
            self.mass,
            self.inertia_yy,
            self.gravity,
            self.thrust_max,
            self.pitch_torque_max,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !all_finite || self.mass <= 0.0 || self.inertia_yy <= 0.0 || self.gravity <= 0.0 {
            return Err(DynamicsError::InvalidParams(
                "mass, inertia_yy and gravity must be finite and positive".into(),
            ));
        }
        if self.thrust_max <= self.mass * self.gravity {
            return Err(DynamicsError::InvalidParams(format!(
                "thrust_max {} N cannot hold hover weight {} N",
                self.thrust_max,
                self.mass * self.gravity
            )));
        }
        if self.pitch_torque_max <= 0.0 {
            return Err(DynamicsError::InvalidParams("pitch_torque_max must be positive".into()));
        }
        Ok(())
    }

    pub fn hover_thrust(&self) -> f64 {
        self.mass * self.gravity
    }
}

/// Force and pitch moment acting on the vehicle, world frame.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Wrench {
    pub fx: f64,
    pub fz: f64,
    pub my: f64,
}

impl Wrench {
    pub const ZERO: Wrench = Wrench {
        fx: 0.0,
        fz: 0.0,
        my: 0.0,
    };

    /// Wrench of a force applied at world-frame lever `lever` from the centre
    /// of mass.
    pub fn from_force_at(force: (f64, f64), lever: (f64, f64)) -> Self {
        let (fx, fz) = force;
        let (rx, rz) = lever;
        Self {
            fx,
            fz,
            my: rz * fx - rx * fz,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.fx.is_finite() && self.fz.is_finite() && self.my.is_finite()
    }
}

impl std::ops::Add for Wrench {
    type Output = Wrench;

    fn add(self, rhs: Wrench) -> Wrench {
        Wrench {
            fx: self.fx + rhs.fx,
            fz: self.fz + rhs.fz,
            my: self.my + rhs.my,
        }
    }
}

impl std::ops::AddAssign for Wrench {
    fn add_assign(&mut self, rhs: Wrench) {
        *self = *self + rhs;
    }
}

/// Vertical wall at `x = x_wall`, occupying `x > x_wall`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Wall {
    pub x_wall: f64,
    /// Coulomb friction coefficient.
    pub mu: f64,
}

impl Default for Wall {
    fn default() -> Self {
        Self { x_wall: 0.5, mu: 0.3 }
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(theta: f64) -> f64 {
    let mut a = theta.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

pub fn body_to_world(point_body: (f64, f64), state: &VehicleState) -> (f64, f64) {
    let (dx, dz) = rotate_body(point_body, state.theta);
    (state.x + dx, state.z + dz)
}

pub fn world_to_body(point_world: (f64, f64), state: &VehicleState) -> (f64, f64) {
    let (s, c) = state.theta.sin_cos();
    let dx = point_world.0 - state.x;
    let dz = point_world.1 - state.z;
    (dx * c - dz * s, dx * s + dz * c)
}

/// Body-frame offset rotated into the world frame (no translation).
pub fn rotate_body(point_body: (f64, f64), theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    let (px, pz) = point_body;
    (px * c + pz * s, -px * s + pz * c)
}

/// World-frame velocity of a point fixed in the body.
pub fn body_point_velocity(point_body: (f64, f64), state: &VehicleState) -> (f64, f64) {
    let (rx, rz) = rotate_body(point_body, state.theta);
    (state.vx + state.q * rz, state.vz - state.q * rx)
}

/// Kinetic plus gravitational potential energy (zero at `z = 0`).
pub fn total_energy(state: &VehicleState, params: &VehicleParams) -> f64 {
    0.5 * params.mass * (state.vx * state.vx + state.vz * state.vz)
        + 0.5 * params.inertia_yy * state.q * state.q
        + params.mass * params.gravity * state.z
}

pub fn kinetic_energy(state: &VehicleState, params: &VehicleParams) -> f64 {
    0.5 * params.mass * (state.vx * state.vx + state.vz * state.vz) + 0.5 * params.inertia_yy * state.q * state.q
}

#[derive(Clone, Copy)]
struct Deriv {
    x: f64,
    z: f64,
    theta: f64,
    vx: f64,
    vz: f64,
    q: f64,
}

fn derivative(s: &VehicleState, p: &VehicleParams, thrust: f64, torque: f64, w: Wrench) -> Deriv {
    let (sin, cos) = s.theta.sin_cos();
    Deriv {
        x: s.vx,
        z: s.vz,
        theta: s.q,
        vx: (thrust * sin + w.fx) / p.mass,
        vz: (thrust * cos + w.fz) / p.mass - p.gravity,
        q: (torque + w.my) / p.inertia_yy,
    }
}

fn offset(s: &VehicleState, d: &Deriv, h: f64) -> VehicleState {
    VehicleState {
        t: s.t + h,
        x: s.x + h * d.x,
        z: s.z + h * d.z,
        theta: s.theta + h * d.theta,
        vx: s.vx + h * d.vx,
        vz: s.vz + h * d.vz,
        q: s.q + h * d.q,
    }
}

/// Advances one RK4 step with a constant external wrench.
pub fn step(
    state: &VehicleState,
    params: &VehicleParams,
    thrust: f64,
    pitch_torque: f64,
    external: Wrench,
    dt: f64,
) -> Result<VehicleState, DynamicsError> {
    if !external.is_finite() {
        return Err(DynamicsError::NonFiniteInput("external wrench"));
    }
    step_with(state, params, thrust, pitch_torque, |_| external, dt)
}

/// Advances one RK4 step, re-evaluating the external wrench at every stage.
///
/// Contact forces depend on the state, so evaluating them per stage keeps the
/// scheme fourth order away from contact onset.
pub fn step_with<F>(
    state: &VehicleState,
    params: &VehicleParams,
    thrust: f64,
    pitch_torque: f64,
    mut external: F,
    dt: f64,
) -> Result<VehicleState, DynamicsError>
where
    F: FnMut(&VehicleState) -> Wrench,
{
    state.validate()?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(DynamicsError::InvalidStep(dt));
    }
    if !thrust.is_finite() || !pitch_torque.is_finite() {
        return Err(DynamicsError::NonFiniteInput("thrust or pitch torque"));
    }
    if thrust < 0.0 || thrust > params.thrust_max {
        return Err(DynamicsError::ThrustOutOfRange {
            thrust,
            max: params.thrust_max,
        });
    }
    if pitch_torque.abs() > params.pitch_torque_max {
        return Err(DynamicsError::TorqueOutOfRange {
            torque: pitch_torque,
            max: params.pitch_torque_max,
        });
    }

    let mut eval = |s: &VehicleState| -> Result<Deriv, DynamicsError> {
        let w = external(s);
        if !w.is_finite() {
            return Err(DynamicsError::NonFiniteInput("external wrench"));
        }
        Ok(derivative(s, params, thrust, pitch_torque, w))
    };

    let k1 = eval(state)?;
    let k2 = eval(&offset(state, &k1, 0.5 * dt))?;
    let k3 = eval(&offset(state, &k2, 0.5 * dt))?;
    let k4 = eval(&offset(state, &k3, dt))?;

    let comb = |a: f64, b: f64, c: f64, d: f64| (a + 2.0 * b + 2.0 * c + d) * dt / 6.0;
    let next = VehicleState {
        t: state.t + dt,
        x: state.x + comb(k1.x, k2.x, k3.x, k4.x),
        z: state.z + comb(k1.z, k2.z, k3.z, k4.z),
        theta: normalize_angle(state.theta + comb(k1.theta, k2.theta, k3.theta, k4.theta)),
        vx: state.vx + comb(k1.vx, k2.vx, k3.vx, k4.vx),
        vz: state.vz + comb(k1.vz, k2.vz, k3.vz, k4.vz),
        q: state.q + comb(k1.q, k2.q, k3.q, k4.q),
    };
    next.validate()?;
    Ok(next)
}
