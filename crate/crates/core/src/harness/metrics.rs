//! Per-run metrics: pitch RMSE around each bump, horn contact delay,
//! absorbed energy, pushing stability.

use serde::{Deserialize, Serialize};

use crate::control::Phase;
use crate::error::HarnessError;
use crate::sensing::ContactEvent;

use super::config::{MetricsSettings, Scenario};
use super::run::{ContactEpisode, RunOutput};
use super::series::{LogRow, TimeSeries};

pub const SCHEMA_VERSION: u32 = 1;

const UPPER: &str = "upper";
const LOWER: &str = "lower";

/// RMSE of `theta - pitch_setpoint`, in degrees, over each window.
/// Windows are `[start, end]` in seconds and must contain at least one row.
pub fn pitch_rmse(series: &TimeSeries, windows: &[(f64, f64)]) -> Result<Vec<f64>, HarnessError> {
    windows
        .iter()
        .map(|&(a, b)| {
            if !(b > a) {
                return Err(HarnessError::Metric(format!("empty RMSE window [{a}, {b}]")));
            }
            let (sum, n) = rows_in(series, a, b).fold((0.0, 0usize), |(s, n), r| {
                let e = (r.theta - r.pitch_setpoint).to_degrees();
                (s + e * e, n + 1)
            });
            if n == 0 {
                return Err(HarnessError::Metric(format!("no samples in RMSE window [{a}, {b}]")));
            }
            Ok((sum / n as f64).sqrt())
        })
        .collect()
}

fn rows_in(series: &TimeSeries, a: f64, b: f64) -> impl Iterator<Item = &LogRow> {
    let lo = series.rows.partition_point(|r| r.t < a - 1e-9);
    let hi = series.rows.partition_point(|r| r.t <= b + 1e-9);
    series.rows[lo..hi.max(lo)].iter()
}

/// RMSE windows around each upper-horn event: `[onset - pre, onset + post]`,
/// cut short at the next approach so a window never covers the following bump.
pub fn bump_windows(series: &TimeSeries, upper_events: &[ContactEvent], pre: f64, post: f64) -> Vec<(f64, f64)> {
    upper_events
        .iter()
        .map(|e| {
            let start = (e.onset_t - pre).max(series.rows.first().map_or(0.0, |r| r.t));
            let mut end = e.onset_t + post;
            if let Some(last) = series.rows.last() {
                end = end.min(last.t);
            }
            if let Some(next) = next_approach_start(series, e.onset_t) {
                end = end.min(next);
            }
            (start, end)
        })
        .collect()
}

fn next_approach_start(series: &TimeSeries, after: f64) -> Option<f64> {
    series
        .rows
        .windows(2)
        .find(|w| w[1].t > after && w[1].phase == Phase::Approach && w[0].phase != Phase::Approach)
        .map(|w| w[1].t)
}

/// Physical impacts: per-horn contact episodes merged when separated by less
/// than `merge_gap`. Each impact spans from the first touch to the last release.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Impact {
    pub start: f64,
    pub end: f64,
    pub upper: Option<HornTouch>,
    pub lower: Option<HornTouch>,
    /// Damping and friction losses of all horns, J.
    pub dissipated: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HornTouch {
    pub onset: f64,
    pub release: f64,
    /// Saturation time if the horn bottomed out, else peak-deflection time.
    pub full_deflection_t: f64,
    pub peak_deflection: f64,
}

/// Groups ground-truth episodes into impacts.
pub fn impacts(episodes: &[ContactEpisode], merge_gap: f64) -> Vec<Impact> {
    let mut sorted: Vec<&ContactEpisode> = episodes.iter().collect();
    sorted.sort_by(|a, b| a.start.total_cmp(&b.start));
    let mut out: Vec<Impact> = Vec::new();
    for ep in sorted {
        let touch = HornTouch {
            onset: ep.start,
            release: ep.end,
            full_deflection_t: ep.saturation_t.unwrap_or(ep.peak_t),
            peak_deflection: ep.peak_deflection,
        };
        let joins = out.last().is_some_and(|imp| ep.start <= imp.end + merge_gap);
        if !joins {
            out.push(Impact {
                start: ep.start,
                end: ep.end,
                upper: None,
                lower: None,
                dissipated: 0.0,
            });
        }
        let imp = out.last_mut().expect("impact exists");
        imp.end = imp.end.max(ep.end);
        imp.dissipated += ep.dissipated;
        let slot = if ep.horn_id == LOWER {
            &mut imp.lower
        } else {
            &mut imp.upper
        };
        match slot {
            None => *slot = Some(touch),
            Some(prev) => {
                prev.release = prev.release.max(touch.release);
                if touch.peak_deflection > prev.peak_deflection {
                    prev.peak_deflection = touch.peak_deflection;
                    prev.full_deflection_t = touch.full_deflection_t;
                }
            }
        }
    }
    out
}

/// Sensed events of all horns merged with the same gap rule as [`impacts`].
pub fn detected_impacts(events: &[ContactEvent], merge_gap: f64) -> usize {
    let mut spans: Vec<(f64, f64)> = events.iter().map(|e| (e.onset_t, e.release_t)).collect();
    spans.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut count = 0;
    let mut end = f64::NEG_INFINITY;
    for (on, off) in spans {
        if on > end + merge_gap {
            count += 1;
        }
        end = end.max(off);
    }
    count
}

/// Lower onset minus upper full-deflection time, ms; `None` without a lower touch.
pub fn contact_delay_ms(impact: &Impact) -> Option<f64> {
    match (impact.upper, impact.lower) {
        (Some(u), Some(l)) => Some((l.onset - u.full_deflection_t) * 1e3),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable { onset_t: f64, reason: String },
    NotEvaluated { reason: String },
}

impl Stability {
    pub fn is_stable(&self) -> bool {
        matches!(self, Stability::Stable)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushingReport {
    pub stability: Stability,
    pub span: Option<(f64, f64)>,
    pub setpoint_deg: f64,
    pub band_deg: f64,
    pub theta_min_deg: Option<f64>,
    pub theta_max_deg: Option<f64>,
    /// Smallest mean total normal force over consecutive half-second blocks, N.
    pub min_block_normal_force: Option<f64>,
    /// Time from the release command until all horns are off the wall, s.
    pub release_disengage_s: Option<f64>,
}

const FORCE_BLOCK: f64 = 0.5;
const MIN_SUSTAINED_CONTACT: f64 = 2.0;

/// Judges a pushing hold over `span`.
///
/// Stable iff theta stays within `setpoint ± band` and the mean total
/// normal force of every half-second block is positive.
pub fn pushing_stability(series: &TimeSeries, setpoint: f64, band: f64, span: (f64, f64)) -> PushingReport {
    let mut report = PushingReport {
        stability: Stability::NotEvaluated { reason: String::new() },
        span: Some(span),
        setpoint_deg: setpoint.to_degrees(),
        band_deg: band.to_degrees(),
        theta_min_deg: None,
        theta_max_deg: None,
        min_block_normal_force: None,
        release_disengage_s: None,
    };
    let rows: Vec<&LogRow> = rows_in(series, span.0, span.1).collect();
    let in_contact = |r: &LogRow| r.horns.iter().any(|h| h.in_contact);
    let dt = series.rows.get(1).map_or(0.01, |r| r.t - series.rows[0].t);
    let contact_time = rows.iter().filter(|r| in_contact(r)).count() as f64 * dt;
    if rows.is_empty() || contact_time < MIN_SUSTAINED_CONTACT - 1e-9 {
        report.stability = Stability::NotEvaluated {
            reason: format!("contact sustained for {contact_time:.2} s, need {MIN_SUSTAINED_CONTACT} s"),
        };
        return report;
    }
    let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
        (lo.min(r.theta), hi.max(r.theta))
    });
    report.theta_min_deg = Some(lo.to_degrees());
    report.theta_max_deg = Some(hi.to_degrees());

    let exit = rows.iter().find(|r| (r.theta - setpoint).abs() > band);
    let mut min_block = f64::INFINITY;
    let mut starved = None;
    let mut block_start = span.0;
    while block_start < span.1 - 1e-9 {
        let block_end = (block_start + FORCE_BLOCK).min(span.1);
        let (sum, n) = rows_in(series, block_start, block_end).fold((0.0, 0usize), |(s, n), r| {
            (s + r.horns.iter().map(|h| h.normal_force).sum::<f64>(), n + 1)
        });
        if n > 0 {
            let mean = sum / n as f64;
            min_block = min_block.min(mean);
            if mean <= 0.0 && starved.is_none() {
                starved = Some(block_start);
            }
        }
        block_start = block_end;
    }
    report.min_block_normal_force = min_block.is_finite().then_some(min_block);
    report.stability = match (exit, starved) {
        (Some(r), _) => Stability::Unstable {
            onset_t: r.t,
            reason: format!("pitch left the ±{:.1} deg band", band.to_degrees()),
        },
        (None, Some(t)) => Stability::Unstable {
            onset_t: t,
            reason: "wall contact force lost".into(),
        },
        (None, None) => Stability::Stable,
    };
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpReport {
    pub index: usize,
    /// Sensed upper-horn onset, s.
    pub onset_t: f64,
    pub window: (f64, f64),
    pub pitch_rmse_deg: f64,
    pub contact_delay_ms: Option<f64>,
    pub energy_absorbed_j: Option<f64>,
    /// Ground-truth impact matched to this bump.
    pub impact: Option<Impact>,
    pub q_max: f64,
    pub q_max_t: f64,
    pub q_min: f64,
    pub q_min_t: f64,
    /// Mean of theta minus setpoint from onset to window end, deg.
    pub net_pitch_excursion_deg: f64,
}

impl BumpReport {
    /// Pitch rate swings positive first, then negative.
    pub fn positive_then_negative(&self) -> bool {
        self.q_max > 0.0 && self.q_min < 0.0 && self.q_max_t < self.q_min_t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub per_bump: Vec<f64>,
    pub mean: Option<f64>,
}

impl Summary {
    fn of(values: Vec<f64>) -> Self {
        let mean = (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64);
        Self { per_bump: values, mean }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelaySummary {
    pub per_bump: Vec<Option<f64>>,
    pub mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HornCount {
    pub horn_id: String,
    pub detected_events: usize,
    pub ground_truth_contacts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureReport {
    pub horn_id: String,
    pub t: f64,
    pub impact_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub scenario: Scenario,
    pub configuration: String,
    pub seed: u64,
    pub duration_s: f64,
    pub collision_count: usize,
    pub approach_phases: usize,
    pub ground_truth_impacts: usize,
    pub detected_impacts: usize,
    pub pitch_rmse_deg: Summary,
    pub contact_delay_ms: DelaySummary,
    pub energy_absorbed_j: Summary,
    pub stability: Stability,
    pub pushing: Option<PushingReport>,
    pub horns: Vec<HornCount>,
    pub failures: Vec<FailureReport>,
    pub bumps: Vec<BumpReport>,
    pub events: Vec<ContactEvent>,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }
}

fn approach_phases(series: &TimeSeries) -> usize {
    let mut n = 0;
    let mut prev = None;
    for r in &series.rows {
        if r.phase == Phase::Approach && prev != Some(Phase::Approach) {
            n += 1;
        }
        prev = Some(r.phase);
    }
    n
}

/// Approaches that reached the wall, i.e. were followed by a retreat.
fn completed_approaches(series: &TimeSeries) -> usize {
    series
        .rows
        .windows(2)
        .filter(|w| w[0].phase == Phase::Approach && matches!(w[1].phase, Phase::Retreat | Phase::Hold))
        .count()
}

fn match_impact(impacts: &[Impact], onset: f64) -> Option<&Impact> {
    // sensing lags the touch, so the impact starts shortly before the event
    impacts
        .iter()
        .filter(|i| i.start <= onset + 0.05 && i.end >= onset - 0.5)
        .min_by(|a, b| (onset - a.start).abs().total_cmp(&(onset - b.start).abs()))
}

fn bump_report(
    index: usize,
    event: &ContactEvent,
    window: (f64, f64),
    rmse: f64,
    series: &TimeSeries,
    impacts: &[Impact],
) -> BumpReport {
    let mut q_max = (f64::NEG_INFINITY, 0.0);
    let mut q_min = (f64::INFINITY, 0.0);
    for r in rows_in(series, window.0, window.1) {
        if r.q > q_max.0 {
            q_max = (r.q, r.t);
        }
        if r.q < q_min.0 {
            q_min = (r.q, r.t);
        }
    }
    let (sum, n) = rows_in(series, event.onset_t, window.1).fold((0.0, 0usize), |(s, n), r| {
        (s + (r.theta - r.pitch_setpoint).to_degrees(), n + 1)
    });
    let impact = match_impact(impacts, event.onset_t).cloned();
    BumpReport {
        index,
        onset_t: event.onset_t,
        window,
        pitch_rmse_deg: rmse,
        contact_delay_ms: impact.as_ref().and_then(contact_delay_ms),
        energy_absorbed_j: impact.as_ref().map(|i| i.dissipated),
        impact,
        q_max: q_max.0,
        q_max_t: q_max.1,
        q_min: q_min.0,
        q_min_t: q_min.1,
        net_pitch_excursion_deg: if n > 0 { sum / n as f64 } else { 0.0 },
    }
}

/// Computes the full report of a finished run.
pub fn evaluate(run: &RunOutput) -> Result<MetricsReport, HarnessError> {
    let cfg = &run.config;
    let m: &MetricsSettings = &cfg.metrics;
    let series = &run.series;
    let upper: Vec<ContactEvent> = run.events_of(UPPER).cloned().collect();
    let impacts = impacts(&run.episodes, m.impact_merge_gap);

    let windows = bump_windows(series, &upper, m.rmse_pre, m.rmse_post);
    let windows_ok: Vec<(usize, (f64, f64))> = windows.into_iter().enumerate().filter(|(_, w)| w.1 > w.0).collect();
    let rmse = pitch_rmse(series, &windows_ok.iter().map(|(_, w)| *w).collect::<Vec<_>>())?;
    let bumps: Vec<BumpReport> = windows_ok
        .iter()
        .zip(&rmse)
        .map(|(&(i, w), &r)| bump_report(i, &upper[i], w, r, series, &impacts))
        .collect();

    let delays: Vec<Option<f64>> = bumps.iter().map(|b| b.contact_delay_ms).collect();
    let present: Vec<f64> = delays.iter().flatten().copied().collect();
    let delay_mean = (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64);

    let horns = series
        .horn_ids
        .iter()
        .map(|id| HornCount {
            horn_id: id.clone(),
            detected_events: run.events_of(id).count(),
            ground_truth_contacts: impacts
                .iter()
                .filter(|i| {
                    if id == LOWER {
                        i.lower.is_some()
                    } else {
                        i.upper.is_some()
                    }
                })
                .count(),
        })
        .collect();

    let pushing = (cfg.scenario == Scenario::Pushing).then(|| pushing_report(run, &impacts));
    let stability = match (run.diverged_at, &pushing) {
        (Some(t), _) => Stability::Unstable {
            onset_t: t,
            reason: "state diverged".into(),
        },
        (None, Some(p)) => p.stability.clone(),
        (None, None) => match series.rows.iter().find(|r| r.theta.abs() > std::f64::consts::FRAC_PI_2) {
            Some(r) => Stability::Unstable {
                onset_t: r.t,
                reason: "vehicle flipped past 90 deg".into(),
            },
            None => Stability::Stable,
        },
    };

    Ok(MetricsReport {
        schema_version: SCHEMA_VERSION,
        scenario: cfg.scenario,
        configuration: cfg.configuration.as_str().to_string(),
        seed: cfg.seed,
        duration_s: series.rows.last().map_or(0.0, |r| r.t),
        collision_count: upper.len(),
        approach_phases: completed_approaches(series).min(approach_phases(series)),
        ground_truth_impacts: impacts.len(),
        detected_impacts: detected_impacts(&run.events, m.impact_merge_gap),
        pitch_rmse_deg: Summary::of(rmse),
        contact_delay_ms: DelaySummary {
            per_bump: delays,
            mean: delay_mean,
        },
        energy_absorbed_j: Summary::of(bumps.iter().filter_map(|b| b.energy_absorbed_j).collect()),
        stability,
        pushing,
        horns,
        failures: run
            .failures
            .iter()
            .map(|f| FailureReport {
                horn_id: f.horn_id.clone(),
                t: f.t,
                impact_index: f.impact_index,
            })
            .collect(),
        bumps,
        events: run.events.clone(),
    })
}

fn pushing_report(run: &RunOutput, impacts: &[Impact]) -> PushingReport {
    let cfg = &run.config;
    let series = &run.series;
    let band = cfg.metrics.pushing_band_deg.to_radians();
    let setpoint = cfg.pushing.approach_pitch;
    let release_t = series.rows.iter().find(|r| r.phase == Phase::Release).map(|r| r.t);
    let Some(first) = impacts.first() else {
        let mut r = pushing_stability(series, setpoint, band, (0.0, 0.0));
        r.span = None;
        return r;
    };
    let end = release_t.unwrap_or_else(|| series.rows.last().map_or(0.0, |r| r.t));
    let start = (first.start + cfg.metrics.pushing_settle).min(end);
    let mut report = pushing_stability(series, setpoint, band, (start, end));
    if let Some(rt) = release_t {
        report.release_disengage_s = series
            .rows
            .iter()
            .find(|r| r.t >= rt && r.horns.iter().all(|h| !h.in_contact))
            .map(|r| r.t - rt);
    }
    report
}
