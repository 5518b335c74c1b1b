//! Pitch attitude PID, altitude hold and the scripted pilot that stands in
//! for manual RC commands.

use serde::{Deserialize, Serialize};

use crate::dynamics::{step, VehicleParams, VehicleState, Wrench};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Symmetric output saturation.
    pub output_limit: f64,
    /// Clamp on the integral term `ki * integral(e)`.
    pub integral_limit: f64,
}

impl PidGains {
    /// Pitch attitude loop: output is pitch torque, N m.
    pub const ATTITUDE: PidGains = PidGains {
        kp: 2.0,
        ki: 0.3,
        kd: 0.15,
        output_limit: 0.5,
        integral_limit: 0.2,
    };

    /// Altitude loop: output is a thrust correction, N.
    pub const ALTITUDE: PidGains = PidGains {
        kp: 8.0,
        ki: 2.0,
        kd: 4.0,
        output_limit: 8.0,
        integral_limit: 2.0,
    };

    pub fn is_valid(&self) -> bool {
        self.output_limit > 0.0
            && self.integral_limit >= 0.0
            && [self.kp, self.ki, self.kd].iter().all(|g| g.is_finite())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PidState {
    /// Accumulated `ki * integral(e)`.
    pub integral_term: f64,
}

/// One PID update with derivative on measurement.
pub fn pid_step(
    gains: &PidGains,
    setpoint: f64,
    measured: f64,
    measured_rate: f64,
    dt: f64,
    state: &mut PidState,
) -> f64 {
    let error = setpoint - measured;
    state.integral_term =
        (state.integral_term + gains.ki * error * dt).clamp(-gains.integral_limit, gains.integral_limit);
    let out = gains.kp * error + state.integral_term - gains.kd * measured_rate;
    out.clamp(-gains.output_limit, gains.output_limit)
}

/// Thrust that holds `z_sp`, compensating for tilt.
#[allow(clippy::too_many_arguments)]
pub fn altitude_hold(
    gains: &PidGains,
    z_sp: f64,
    z: f64,
    vz: f64,
    params: &VehicleParams,
    theta: f64,
    dt: f64,
    state: &mut PidState,
) -> f64 {
    let correction = pid_step(gains, z_sp, z, vz, dt, state);
    let tilt = theta.cos().max(0.5);
    ((params.hover_thrust() + correction) / tilt).clamp(0.0, params.thrust_max)
}

/// Free-flight response of the attitude loop to an initial pitch offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResponse {
    /// Start of the final stretch with `|theta| < SETTLE_BAND`.
    pub settled_at: Option<f64>,
    /// Largest excursion past zero as a fraction of the initial offset.
    pub overshoot: f64,
}

impl StepResponse {
    pub const SETTLE_BAND: f64 = 0.01;
}

/// Simulates hover with both loops closed, starting at `theta0`, no wall.
pub fn attitude_step_response(
    attitude: &PidGains,
    altitude: &PidGains,
    params: &VehicleParams,
    theta0: f64,
    duration: f64,
    dt: f64,
) -> StepResponse {
    let mut s = VehicleState {
        theta: theta0,
        ..VehicleState::at_rest(0.0, 1.0)
    };
    let mut att = PidState::default();
    let mut alt = PidState::default();
    let mut past_zero: f64 = 0.0;
    let mut settled_at = None;
    let steps = (duration / dt).round() as usize;
    for _ in 0..steps {
        let torque = pid_step(attitude, 0.0, s.theta, s.q, dt, &mut att)
            .clamp(-params.pitch_torque_max, params.pitch_torque_max);
        let thrust = altitude_hold(altitude, 1.0, s.z, s.vz, params, s.theta, dt, &mut alt);
        s = match step(&s, params, thrust, torque, Wrench::ZERO, dt) {
            Ok(next) => next,
            Err(_) => {
                return StepResponse {
                    settled_at: None,
                    overshoot: f64::INFINITY,
                }
            }
        };
        past_zero = past_zero.max(-s.theta * theta0.signum());
        if s.theta.abs() >= StepResponse::SETTLE_BAND {
            settled_at = None;
        } else if settled_at.is_none() {
            settled_at = Some(s.t);
        }
    }
    StepResponse {
        settled_at,
        overshoot: past_zero / theta0.abs(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptPoint {
    pub t: f64,
    /// rad
    pub pitch: f64,
    /// m
    pub altitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CommandProfile {
    /// Pitch toward the wall, drop the pitch command as soon as contact is
    /// sensed, re-approach after separation.
    TouchAndGo {
        approach_pitch: f64,
        n_bumps: u32,
        altitude: f64,
        /// Hover time before the first approach, s.
        approach_start: f64,
    },
    /// Hold the approach pitch through contact, then command a negative
    /// pitch to release.
    Pushing {
        approach_pitch: f64,
        hold_duration: f64,
        release_pitch: f64,
        altitude: f64,
        approach_start: f64,
    },
    /// Zero-order hold over time-ordered points.
    Scripted { points: Vec<ScriptPoint> },
}

impl CommandProfile {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            CommandProfile::TouchAndGo { n_bumps, .. } if *n_bumps < 1 => Err("touch-and-go needs n_bumps >= 1".into()),
            CommandProfile::Pushing { hold_duration, .. } if !(*hold_duration > 0.0) => {
                Err("pushing needs hold_duration > 0".into())
            }
            CommandProfile::Scripted { points } if points.is_empty() => {
                Err("scripted profile needs at least one point".into())
            }
            CommandProfile::Scripted { points } if points.windows(2).any(|w| w[1].t < w[0].t) => {
                Err("scripted points must be time-ordered".into())
            }
            _ => Ok(()),
        }
    }

    pub fn approach_pitch(&self) -> Option<f64> {
        match self {
            CommandProfile::TouchAndGo { approach_pitch, .. } | CommandProfile::Pushing { approach_pitch, .. } => {
                Some(*approach_pitch)
            }
            CommandProfile::Scripted { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Hover,
    Approach,
    /// Touch-and-go: contact sensed, level out and drift off the wall.
    Retreat,
    /// Pushing: contact sensed, keep leaning on the wall.
    Hold,
    Release,
    Scripted,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Hover => "hover",
            Phase::Approach => "approach",
            Phase::Retreat => "retreat",
            Phase::Hold => "hold",
            Phase::Release => "release",
            Phase::Scripted => "scripted",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Phase::Hover => 0,
            Phase::Approach => 1,
            Phase::Retreat => 2,
            Phase::Hold => 3,
            Phase::Release => 4,
            Phase::Scripted => 5,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Phase::Hover,
            1 => Phase::Approach,
            2 => Phase::Retreat,
            3 => Phase::Hold,
            4 => Phase::Release,
            5 => Phase::Scripted,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setpoint {
    pub pitch: f64,
    pub altitude: f64,
    pub phase: Phase,
}

/// Pilot command at time `t`.
///
/// `first_contact` is the time contact was first sensed during the current
/// approach, if any; `bumps_completed` counts finished touch-and-go cycles.
pub fn command(profile: &CommandProfile, t: f64, first_contact: Option<f64>, bumps_completed: u32) -> Setpoint {
    match profile {
        CommandProfile::TouchAndGo {
            approach_pitch,
            n_bumps,
            altitude,
            approach_start,
        } => {
            let phase = if t < *approach_start || bumps_completed >= *n_bumps {
                Phase::Hover
            } else if first_contact.is_none() {
                Phase::Approach
            } else {
                Phase::Retreat
            };
            Setpoint {
                pitch: if phase == Phase::Approach { *approach_pitch } else { 0.0 },
                altitude: *altitude,
                phase,
            }
        }
        CommandProfile::Pushing {
            approach_pitch,
            hold_duration,
            release_pitch,
            altitude,
            approach_start,
        } => {
            let (pitch, phase) = match first_contact {
                _ if t < *approach_start => (0.0, Phase::Hover),
                Some(tc) if t - tc >= *hold_duration => (*release_pitch, Phase::Release),
                Some(_) => (*approach_pitch, Phase::Hold),
                None => (*approach_pitch, Phase::Approach),
            };
            Setpoint {
                pitch,
                altitude: *altitude,
                phase,
            }
        }
        CommandProfile::Scripted { points } => {
            let idx = points.partition_point(|p| p.t <= t).saturating_sub(1);
            let p = points[idx];
            Setpoint {
                pitch: p.pitch,
                altitude: p.altitude,
                phase: Phase::Scripted,
            }
        }
    }
}

/// Tracks sensed contact for the command profile: when contact first
/// appears in an approach, and when the vehicle has been clear of the wall
/// long enough to re-approach.
#[derive(Debug, Clone, PartialEq)]
pub struct Pilot {
    separation_hold: f64,
    rearm: bool,
    first_contact: Option<f64>,
    clear_since: Option<f64>,
    bumps_completed: u32,
}

impl Pilot {
    /// Default clear-of-wall time before a re-approach, s.
    pub const SEPARATION_HOLD: f64 = 0.3;

    pub fn new(profile: &CommandProfile, separation_hold: f64) -> Self {
        Self {
            separation_hold,
            rearm: matches!(profile, CommandProfile::TouchAndGo { .. }),
            first_contact: None,
            clear_since: None,
            bumps_completed: 0,
        }
    }

    pub fn first_contact(&self) -> Option<f64> {
        self.first_contact
    }

    pub fn bumps_completed(&self) -> u32 {
        self.bumps_completed
    }

    /// Updates with the sensed contact flag (any horn) at time `t`.
    pub fn observe(&mut self, t: f64, contact: bool) {
        if contact {
            self.first_contact.get_or_insert(t);
            self.clear_since = None;
            return;
        }
        if self.first_contact.is_none() || !self.rearm {
            return;
        }
        let since = *self.clear_since.get_or_insert(t);
        if t - since >= self.separation_hold {
            self.bumps_completed += 1;
            self.first_contact = None;
            self.clear_since = None;
        }
    }

    pub fn setpoint(&self, profile: &CommandProfile, t: f64) -> Setpoint {
        command(profile, t, self.first_contact, self.bumps_completed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tag() -> CommandProfile {
        CommandProfile::TouchAndGo {
            approach_pitch: 0.26,
            n_bumps: 3,
            altitude: 1.0,
            approach_start: 0.0,
        }
    }

    #[test]
    fn pid_examples() {
        let g = PidGains {
            kp: 2.0,
            ki: 0.0,
            kd: 0.0,
            output_limit: 10.0,
            integral_limit: 1.0,
        };
        let mut s = PidState::default();
        assert_eq!(pid_step(&g, 0.0, 0.0, 0.0, 0.01, &mut s), 0.0);
        assert_abs_diff_eq!(pid_step(&g, 0.1, 0.0, 0.0, 0.01, &mut s), 0.2, epsilon = 1e-15);

        let g = PidGains {
            kp: 0.0,
            ki: 1.0,
            kd: 0.0,
            output_limit: 10.0,
            integral_limit: 0.5,
        };
        let mut s = PidState::default();
        let mut out = 0.0;
        for _ in 0..1000 {
            out = pid_step(&g, 1.0, 0.0, 0.0, 1e-3, &mut s);
        }
        assert_abs_diff_eq!(out, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn derivative_acts_on_measurement() {
        let g = PidGains {
            kp: 0.0,
            ki: 0.0,
            kd: 1.0,
            output_limit: 10.0,
            integral_limit: 0.0,
        };
        let mut s = PidState::default();
        // setpoint jump produces no kick
        assert_eq!(pid_step(&g, 5.0, 0.0, 0.0, 0.01, &mut s), 0.0);
        assert_eq!(pid_step(&g, 0.0, 0.0, 2.0, 0.01, &mut s), -2.0);
    }

    #[test]
    fn output_saturates() {
        let g = PidGains::ATTITUDE;
        let mut s = PidState::default();
        assert_eq!(pid_step(&g, 10.0, 0.0, 0.0, 0.01, &mut s), g.output_limit);
    }

    #[test]
    fn altitude_hold_examples() {
        let p = VehicleParams::default();
        let g = PidGains::ALTITUDE;
        let mut s = PidState::default();
        assert_abs_diff_eq!(
            altitude_hold(&g, 1.0, 1.0, 0.0, &p, 0.0, 1e-3, &mut s),
            p.mass * p.gravity,
            epsilon = 1e-12
        );
        let mut s = PidState::default();
        assert_abs_diff_eq!(
            altitude_hold(&g, 1.0, 1.0, 0.0, &p, 0.26, 1e-3, &mut s),
            p.mass * p.gravity / 0.26f64.cos(),
            epsilon = 1e-12
        );
        let mut s = PidState::default();
        assert_eq!(altitude_hold(&g, 10.0, 0.0, 0.0, &p, 0.0, 1e-3, &mut s), p.thrust_max);
    }

    #[test]
    fn touch_and_go_commands() {
        let p = tag();
        assert_eq!(command(&p, 0.5, None, 0).pitch, 0.26);
        assert_eq!(command(&p, 0.5, Some(0.4), 0).pitch, 0.0);
        assert_eq!(command(&p, 0.5, Some(0.4), 0).phase, Phase::Retreat);
        assert_eq!(command(&p, 0.5, None, 3).phase, Phase::Hover);
        assert_eq!(command(&p, 5.0, None, 3).pitch, 0.0);
        let delayed = CommandProfile::TouchAndGo {
            approach_pitch: 0.26,
            n_bumps: 1,
            altitude: 1.0,
            approach_start: 2.0,
        };
        assert_eq!(command(&delayed, 1.0, None, 0).pitch, 0.0);
    }

    #[test]
    fn pushing_commands() {
        let p = CommandProfile::Pushing {
            approach_pitch: 0.26,
            hold_duration: 10.0,
            release_pitch: -0.17,
            altitude: 1.0,
            approach_start: 1.0,
        };
        assert_eq!(command(&p, 0.5, None, 0).pitch, 0.0);
        assert_eq!(command(&p, 1.5, None, 0).pitch, 0.26);
        assert_eq!(command(&p, 8.0, Some(2.0), 0).pitch, 0.26);
        assert_eq!(command(&p, 8.0, Some(2.0), 0).phase, Phase::Hold);
        let r = command(&p, 12.5, Some(2.0), 0);
        assert!(r.pitch < 0.0);
        assert_eq!(r.phase, Phase::Release);
    }

    #[test]
    fn scripted_zero_order_hold() {
        let p = CommandProfile::Scripted {
            points: vec![
                ScriptPoint {
                    t: 0.0,
                    pitch: 0.0,
                    altitude: 1.0,
                },
                ScriptPoint {
                    t: 1.0,
                    pitch: 0.1,
                    altitude: 1.5,
                },
            ],
        };
        assert_eq!(
            command(&p, 0.99, None, 0),
            Setpoint {
                pitch: 0.0,
                altitude: 1.0,
                phase: Phase::Scripted
            }
        );
        assert_eq!(
            command(&p, 1.0, None, 0),
            Setpoint {
                pitch: 0.1,
                altitude: 1.5,
                phase: Phase::Scripted
            }
        );
        assert_eq!(command(&p, 7.0, None, 0).altitude, 1.5);
    }

    #[test]
    fn pilot_counts_approach_phases() {
        let profile = tag();
        let mut pilot = Pilot::new(&profile, Pilot::SEPARATION_HOLD);
        let mut approaches = 0;
        let mut approaching = false;
        let dt = 0.02;
        for i in 0..2000 {
            let t = i as f64 * dt;
            // contact pulses of 0.2 s every 2 s, starting at 1 s
            let phase = (t - 1.0).rem_euclid(2.0);
            let contact = (1.0..7.0).contains(&t) && phase < 0.2;
            pilot.observe(t, contact);
            let sp = pilot.setpoint(&profile, t);
            let now = sp.pitch > 0.0;
            if now && !approaching {
                approaches += 1;
            }
            approaching = now;
        }
        assert_eq!(pilot.bumps_completed(), 3);
        assert_eq!(approaches, 3);
    }

    #[test]
    fn pushing_pilot_never_rearms() {
        let profile = CommandProfile::Pushing {
            approach_pitch: 0.26,
            hold_duration: 1.0,
            release_pitch: -0.2,
            altitude: 1.0,
            approach_start: 0.0,
        };
        let mut pilot = Pilot::new(&profile, 0.3);
        pilot.observe(1.0, true);
        for i in 0..100 {
            pilot.observe(2.0 + i as f64 * 0.02, false);
        }
        assert_eq!(pilot.first_contact(), Some(1.0));
        assert!(pilot.setpoint(&profile, 5.0).pitch < 0.0);
    }

    #[test]
    fn hover_attitude_settles() {
        let r = attitude_step_response(
            &PidGains::ATTITUDE,
            &PidGains::ALTITUDE,
            &VehicleParams::default(),
            0.1,
            3.0,
            1e-3,
        );
        let settled_at = r.settled_at.expect("never settled");
        assert!(settled_at <= 1.5, "settled at {settled_at}");
        assert!(r.overshoot <= 0.25, "overshoot {}", r.overshoot);
    }
}
