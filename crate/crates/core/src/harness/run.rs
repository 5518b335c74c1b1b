//! Closed-loop experiment: physics at the integration step, sensors at the
//! ADC rate, state log at the log rate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::contact::{contact_wrench, update_damage, ContactState, HornConfiguration, PAIR_COUNT};
use crate::control::{altitude_hold, pid_step, Phase, PidState, Pilot};
use crate::dynamics::{kinetic_energy, step_with, VehicleState};
use crate::error::{DynamicsError, HarnessError};
use crate::sensing::{ContactEvent, SensorChain};

use super::config::ExperimentConfig;
use super::series::{HornLog, LogRow, SensorRecord, TimeSeries};

/// Noise stream of the pilot's per-approach pitch offsets; horn sensors use
/// their index in the configuration.
const PILOT_STREAM: u64 = 1000;

const RK4_WEIGHTS: [f64; 4] = [1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0];

/// One uninterrupted physical contact of one horn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactEpisode {
    pub horn_id: String,
    pub start: f64,
    pub end: f64,
    pub peak_deflection: f64,
    pub peak_t: f64,
    /// First time the deflection reached the horn's travel limit.
    pub saturation_t: Option<f64>,
    pub peak_force: f64,
    /// Damping plus friction losses of this horn over the episode, J.
    pub dissipated: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HornFailure {
    pub horn_id: String,
    pub t: f64,
    /// Upper-horn contact episodes begun up to and including the failing one.
    pub impact_index: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: ExperimentConfig,
    pub series: TimeSeries,
    pub sensor_trace: Vec<SensorRecord>,
    pub events: Vec<ContactEvent>,
    pub episodes: Vec<ContactEpisode>,
    pub failures: Vec<HornFailure>,
    /// Per-approach pitch offsets applied by the pilot, rad.
    pub pilot_offsets: Vec<f64>,
    /// Time the integration stopped on a non-finite state.
    pub diverged_at: Option<f64>,
    pub final_state: VehicleState,
}

impl RunOutput {
    pub fn events_of(&self, horn_id: &str) -> impl Iterator<Item = &ContactEvent> {
        let id = horn_id.to_string();
        self.events.iter().filter(move |e| e.horn_id == id)
    }

    pub fn episodes_of(&self, horn_id: &str) -> impl Iterator<Item = &ContactEpisode> {
        let id = horn_id.to_string();
        self.episodes.iter().filter(move |e| e.horn_id == id)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Accumulators {
    thrust_work: f64,
    torque_work: f64,
    damping: f64,
    friction: f64,
}

struct OpenEpisode {
    ep: ContactEpisode,
}

fn powers(
    config: &HornConfiguration,
    contact: &ContactState,
    s: &VehicleState,
    thrust: f64,
    torque: f64,
) -> (f64, f64, Vec<(f64, f64)>) {
    let (sin, cos) = s.theta.sin_cos();
    let p_thrust = thrust * (sin * s.vx + cos * s.vz);
    let p_torque = torque * s.q;
    let horns = config
        .horns
        .iter()
        .zip(&contact.horns)
        .map(|(h, c)| (c.damping_power(h), c.friction_power()))
        .collect();
    (p_thrust, p_torque, horns)
}

fn pilot_offsets(cfg: &ExperimentConfig) -> Vec<f64> {
    let n = match cfg.scenario {
        super::config::Scenario::TouchAndGo => cfg.touch_and_go.n_bumps as usize,
        _ => 1,
    };
    if cfg.control.pilot_jitter == 0.0 {
        return vec![0.0; n];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(PILOT_STREAM);
    let normal = Normal::new(0.0, cfg.control.pilot_jitter).expect("validated jitter");
    (0..n).map(|_| normal.sample(&mut rng)).collect()
}

/// Runs one experiment to completion.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    cfg.validate()?;
    let params = cfg.vehicle;
    let wall = cfg.wall;
    let dt = cfg.dt;
    let profile = cfg.profile();
    let mut horns = HornConfiguration::build(cfg.configuration, &cfg.horns);
    let horn_ids: Vec<String> = horns.horns.iter().map(|h| h.id.clone()).collect();

    let mut chains = horns
        .horns
        .iter()
        .enumerate()
        .map(|(i, h)| SensorChain::new(&h.id, &cfg.sensing, cfg.seed, i as u64))
        .collect::<Result<Vec<_>, _>>()?;

    let sensor_every = (cfg.sensing.sample_period() / dt).round() as u64;
    let log_every = (1.0 / (cfg.metrics.log_rate * dt)).round() as u64;
    let n_steps = (cfg.effective_duration() / dt).round() as u64;

    let front = horns
        .horns
        .iter()
        .map(|h| h.attach_body.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut state = VehicleState::at_rest(wall.x_wall - front - cfg.initial.standoff, cfg.initial.altitude);

    let offsets = pilot_offsets(cfg);
    let mut pilot = Pilot::new(&profile, cfg.control.separation_hold);
    let mut att = PidState::default();
    let mut alt = PidState::default();

    let mut acc = Accumulators::default();
    let mut series = TimeSeries {
        horn_ids: horn_ids.clone(),
        rows: Vec::with_capacity((n_steps / log_every + 1) as usize),
    };
    let mut sensor_trace = Vec::new();
    let mut held: Vec<HornLog> = vec![HornLog::default(); horns.horns.len()];
    let mut open: Vec<Option<OpenEpisode>> = (0..horns.horns.len()).map(|_| None).collect();
    let mut episodes = Vec::new();
    let mut failures = Vec::new();
    let mut upper_impacts = 0usize;
    let mut diverged_at = None;

    let (_, mut contact) = contact_wrench(&horns, &state, &wall);

    for k in 0..=n_steps {
        let t = k as f64 * dt;
        state.t = t;

        if k % sensor_every == 0 {
            let mut sensed = false;
            for (i, chain) in chains.iter_mut().enumerate() {
                let c = &contact.horns[i];
                let s = chain.sample(t, c.deflection.max(0.0), c.deflection_rate, c.normal_force / PAIR_COUNT)?;
                let in_event = chain.in_event();
                sensed |= in_event;
                held[i].adc_code = s.code;
                held[i].resistance = s.resistance;
                held[i].filtered = s.filtered;
                held[i].in_event = in_event;
                sensor_trace.push(SensorRecord {
                    t,
                    horn_id: chain.horn_id().to_string(),
                    code: s.code,
                    resistance_ohm: s.resistance,
                    filtered_ohm: s.filtered,
                    in_event,
                });
            }
            pilot.observe(t, sensed);
        }

        let mut sp = pilot.setpoint(&profile, t);
        if matches!(sp.phase, Phase::Approach | Phase::Hold) {
            let idx = (pilot.bumps_completed() as usize).min(offsets.len() - 1);
            sp.pitch += offsets[idx];
        }
        let torque = pid_step(&cfg.control.attitude, sp.pitch, state.theta, state.q, dt, &mut att)
            .clamp(-params.pitch_torque_max, params.pitch_torque_max);
        let thrust = altitude_hold(
            &cfg.control.altitude,
            sp.altitude,
            state.z,
            state.vz,
            &params,
            state.theta,
            dt,
            &mut alt,
        );

        if k % log_every == 0 {
            for (i, c) in contact.horns.iter().enumerate() {
                held[i].deflection = c.deflection;
                held[i].deflection_rate = c.deflection_rate;
                held[i].normal_force = c.normal_force;
                held[i].friction_force = c.friction_force;
                held[i].in_contact = c.in_contact;
                held[i].failed = horns.horns[i].failed;
            }
            series.rows.push(LogRow {
                t,
                x: state.x,
                z: state.z,
                theta: state.theta,
                vx: state.vx,
                vz: state.vz,
                q: state.q,
                thrust,
                torque,
                pitch_setpoint: sp.pitch,
                altitude_setpoint: sp.altitude,
                phase: sp.phase,
                kinetic_energy: kinetic_energy(&state, &params),
                potential_energy: params.mass * params.gravity * state.z,
                spring_energy: horns.spring_energy(&state, &wall),
                thrust_work: acc.thrust_work,
                torque_work: acc.torque_work,
                damping_dissipation: acc.damping,
                friction_dissipation: acc.friction,
                horns: held.clone(),
            });
        }
        if k == n_steps {
            break;
        }

        // energy flows integrated with the same stage weights as the state,
        // i.e. as extra components of the RK4 system
        let mut stage = 0usize;
        let mut flows = Accumulators::default();
        let mut horn_flows = vec![(0.0, 0.0); horns.horns.len()];
        let next = match step_with(
            &state,
            &params,
            thrust,
            torque,
            |s| {
                let (w, c) = contact_wrench(&horns, s, &wall);
                let weight = RK4_WEIGHTS[stage] * dt;
                stage += 1;
                let (pt, pq, ph) = powers(&horns, &c, s, thrust, torque);
                flows.thrust_work += weight * pt;
                flows.torque_work += weight * pq;
                for (acc_h, p) in horn_flows.iter_mut().zip(ph) {
                    acc_h.0 += weight * p.0;
                    acc_h.1 += weight * p.1;
                }
                w
            },
            dt,
        ) {
            Ok(s) => s,
            Err(DynamicsError::NonFiniteState { .. }) => {
                diverged_at = Some(t);
                break;
            }
            Err(e) => return Err(e.into()),
        };
        if !next.is_finite() {
            diverged_at = Some(t + dt);
            break;
        }
        let (_, next_contact) = contact_wrench(&horns, &next, &wall);
        acc.thrust_work += flows.thrust_work;
        acc.torque_work += flows.torque_work;
        let t1 = t + dt;
        for i in 0..horns.horns.len() {
            let (d, f) = horn_flows[i];
            acc.damping += d;
            acc.friction += f;

            let c = &next_contact.horns[i];
            let horn = &horns.horns[i];
            match (&mut open[i], c.in_contact) {
                (None, true) => {
                    if horn.row == crate::contact::HornRow::Upper {
                        upper_impacts += 1;
                    }
                    open[i] = Some(OpenEpisode {
                        ep: ContactEpisode {
                            horn_id: horn.id.clone(),
                            start: t1,
                            end: t1,
                            peak_deflection: c.deflection,
                            peak_t: t1,
                            saturation_t: c.saturated.then_some(t1),
                            peak_force: c.normal_force,
                            dissipated: d + f,
                        },
                    });
                }
                (Some(o), true) => {
                    o.ep.end = t1;
                    o.ep.dissipated += d + f;
                    if c.deflection > o.ep.peak_deflection {
                        o.ep.peak_deflection = c.deflection;
                        o.ep.peak_t = t1;
                    }
                    if c.saturated && o.ep.saturation_t.is_none() {
                        o.ep.saturation_t = Some(t1);
                    }
                    o.ep.peak_force = o.ep.peak_force.max(c.normal_force);
                }
                (Some(o), false) => {
                    // trailing losses as the horn lets go
                    o.ep.dissipated += d + f;
                    o.ep.end = t1;
                    episodes.push(open[i].take().expect("open episode").ep);
                }
                (None, false) => {}
            }

            let was_failed = horn.failed;
            let updated = update_damage(horn, c.normal_force, c.deflection_rate, dt);
            if updated.failed && !was_failed {
                failures.push(HornFailure {
                    horn_id: updated.id.clone(),
                    t: t1,
                    impact_index: upper_impacts,
                });
            }
            horns.horns[i] = updated;
        }

        state = next;
        // failed horns change the contact report
        contact = contact_wrench(&horns, &state, &wall).1;
    }

    for o in open.into_iter().flatten() {
        episodes.push(o.ep);
    }
    episodes.sort_by(|a, b| a.start.total_cmp(&b.start));

    let mut events: Vec<ContactEvent> = chains.into_iter().flat_map(SensorChain::finish).collect();
    events.sort_by(|a, b| a.onset_t.total_cmp(&b.onset_t));

    Ok(RunOutput {
        config: cfg.clone(),
        series,
        sensor_trace,
        events,
        episodes,
        failures,
        pilot_offsets: offsets,
        diverged_at,
        final_state: state,
    })
}
