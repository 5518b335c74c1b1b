//! Invariant checks on a finished run, working only from its exported files.

use serde::Serialize;

use crate::control::Phase;

use super::metrics::MetricsReport;
use super::series::{LogRow, SensorRecord, TimeSeries};

/// Relative tolerance of the per-impact energy audit.
pub const ENERGY_AUDIT_TOL: f64 = 0.02;
/// Allowed drift of the global energy balance per joule of energy throughput.
pub const ENERGY_BALANCE_TOL: f64 = 1e-3;
/// Contact spans closer than this are one impact, s.
pub const IMPACT_MERGE_GAP: f64 = 0.25;
/// Clock jitter allowed by nine printed significant digits, s.
const CLOCK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Not applicable to this run.
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name,
            status: if pass { CheckStatus::Pass } else { CheckStatus::Fail },
            detail: detail.into(),
        }
    }

    fn skip(name: &'static str, detail: impl Into<String>) -> Self {
        Self {
            name,
            status: CheckStatus::Skip,
            detail: detail.into(),
        }
    }
}

/// True when no check failed.
pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.status != CheckStatus::Fail)
}

fn regular_clock(times: &[f64]) -> Result<f64, String> {
    if times.len() < 2 {
        return Ok(0.0);
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) {
        return Err(format!("non-increasing time at t = {}", times[0]));
    }
    match times.windows(2).find(|w| ((w[1] - w[0]) - dt).abs() > CLOCK_TOL) {
        Some(w) => Err(format!("step {:.6} s at t = {} against {dt:.6} s", w[1] - w[0], w[0])),
        None => Ok(dt),
    }
}

fn log_clock(series: &TimeSeries) -> Check {
    let times: Vec<f64> = series.rows.iter().map(|r| r.t).collect();
    match regular_clock(&times) {
        Ok(dt) => Check::new("log_clock", true, format!("{} rows every {dt:.4} s", times.len())),
        Err(e) => Check::new("log_clock", false, e),
    }
}

fn row_values(r: &LogRow) -> impl Iterator<Item = f64> + '_ {
    [
        r.t,
        r.x,
        r.z,
        r.theta,
        r.vx,
        r.vz,
        r.q,
        r.thrust,
        r.torque,
        r.pitch_setpoint,
        r.altitude_setpoint,
        r.kinetic_energy,
        r.potential_energy,
        r.spring_energy,
        r.thrust_work,
        r.torque_work,
        r.damping_dissipation,
        r.friction_dissipation,
    ]
    .into_iter()
    .chain(r.horns.iter().flat_map(|h| {
        [
            h.deflection,
            h.deflection_rate,
            h.normal_force,
            h.friction_force,
            h.resistance,
            h.filtered,
        ]
    }))
}

fn finite_values(series: &TimeSeries) -> Check {
    match series.rows.iter().find(|r| row_values(r).any(|v| !v.is_finite())) {
        Some(r) => Check::new("finite_values", false, format!("non-finite value at t = {}", r.t)),
        None => Check::new("finite_values", true, "all values finite"),
    }
}

fn contact_consistency(series: &TimeSeries) -> Check {
    for r in &series.rows {
        for (id, h) in series.horn_ids.iter().zip(&r.horns) {
            if h.deflection < 0.0 || h.normal_force < 0.0 {
                return Check::new(
                    "contact_consistency",
                    false,
                    format!("{id}: negative deflection or force at t = {}", r.t),
                );
            }
            if h.in_contact != (h.deflection > 0.0) && !h.failed {
                return Check::new(
                    "contact_consistency",
                    false,
                    format!("{id}: contact flag disagrees with deflection at t = {}", r.t),
                );
            }
            if h.failed && h.normal_force > 0.0 {
                return Check::new(
                    "contact_consistency",
                    false,
                    format!("{id}: failed horn carries force at t = {}", r.t),
                );
            }
        }
    }
    Check::new("contact_consistency", true, "deflection, force and contact flags agree")
}

fn dissipation_monotone(series: &TimeSeries) -> Check {
    let bad = series.rows.windows(2).find(|w| {
        w[1].damping_dissipation < w[0].damping_dissipation || w[1].friction_dissipation < w[0].friction_dissipation
    });
    match bad {
        Some(w) => Check::new(
            "dissipation_monotone",
            false,
            format!("dissipation decreased at t = {}", w[1].t),
        ),
        None => Check::new(
            "dissipation_monotone",
            true,
            "damping and friction losses never decrease",
        ),
    }
}

fn energy_balance(series: &TimeSeries) -> Check {
    let (Some(first), Some(last)) = (series.rows.first(), series.rows.last()) else {
        return Check::skip("energy_balance", "empty series");
    };
    let b0 = first.energy_balance();
    let drift = series
        .rows
        .iter()
        .map(|r| (r.energy_balance() - b0).abs())
        .fold(0.0, f64::max);
    let peak = |f: fn(&LogRow) -> f64| series.rows.iter().map(|r| f(r).abs()).fold(0.0, f64::max);
    let throughput =
        last.damping_dissipation + last.friction_dissipation + peak(|r| r.thrust_work) + peak(|r| r.torque_work);
    let tol = ENERGY_BALANCE_TOL * throughput.max(1.0);
    Check::new(
        "energy_balance",
        drift <= tol,
        format!("drift {drift:.3e} J, allowed {tol:.3e} J"),
    )
}

/// Row-index spans during which any horn is in contact, merged across
/// horns when closer than `merge_gap`.
pub fn contact_spans(series: &TimeSeries, merge_gap: f64) -> Vec<(usize, usize)> {
    let mut spans: Vec<(usize, usize)> = Vec::new();
    for (i, r) in series.rows.iter().enumerate() {
        if !r.horns.iter().any(|h| h.in_contact) {
            continue;
        }
        match spans.last_mut() {
            Some(last) if r.t - series.rows[last.1].t <= merge_gap => last.1 = i,
            _ => spans.push((i, i)),
        }
    }
    spans
}

fn energy_audit(series: &TimeSeries) -> Check {
    let spans = contact_spans(series, IMPACT_MERGE_GAP);
    let n = series.rows.len();
    let mut worst: f64 = 0.0;
    let mut audited = 0;
    for &(first, last) in &spans {
        if first == 0 || last + 1 >= n {
            continue;
        }
        let (a, b) = (&series.rows[first - 1], &series.rows[last + 1]);
        if b.horns.iter().any(|h| h.in_contact) {
            continue;
        }
        let ke_drop = a.kinetic_energy - b.kinetic_energy;
        let work = (b.thrust_work - a.thrust_work) + (b.torque_work - a.torque_work);
        let corrected = ke_drop + work - (b.potential_energy - a.potential_energy);
        let losses = (b.damping_dissipation - a.damping_dissipation)
            + (b.friction_dissipation - a.friction_dissipation)
            + (b.spring_energy - a.spring_energy);
        if losses <= 0.0 {
            continue;
        }
        worst = worst.max((corrected - losses).abs() / losses);
        audited += 1;
    }
    if audited == 0 {
        return Check::skip("energy_audit", "no completed impacts");
    }
    Check::new(
        "energy_audit",
        worst <= ENERGY_AUDIT_TOL,
        format!(
            "{audited} impacts, worst mismatch {:.2}% (max {:.0}%)",
            100.0 * worst,
            100.0 * ENERGY_AUDIT_TOL
        ),
    )
}

fn rising_edges(flags: impl Iterator<Item = bool>) -> usize {
    let mut prev = false;
    flags
        .filter(|&f| {
            let edge = f && !prev;
            prev = f;
            edge
        })
        .count()
}

fn approach_phases(series: &TimeSeries) -> usize {
    rising_edges(series.rows.iter().map(|r| r.phase == Phase::Approach))
}

fn upper_event_edges(series: &TimeSeries) -> Option<usize> {
    let i = series.horn_index("upper")?;
    Some(rising_edges(series.rows.iter().map(|r| r.horns[i].in_event)))
}

fn event_count_consistency(series: &TimeSeries) -> Check {
    let name = "event_count";
    if !series.rows.iter().any(|r| r.phase == Phase::Retreat) {
        return Check::skip(name, "no touch-and-go retreat phase in the series");
    }
    let Some(events) = upper_event_edges(series) else {
        return Check::new(name, false, "no upper horn columns");
    };
    let approaches = approach_phases(series);
    Check::new(
        name,
        events == approaches,
        format!("{events} upper-horn events, {approaches} approach phases"),
    )
}

fn sensor_clock(records: &[SensorRecord], horn_ids: &[String]) -> Check {
    for id in horn_ids {
        let times: Vec<f64> = records.iter().filter(|r| &r.horn_id == id).map(|r| r.t).collect();
        if times.is_empty() {
            return Check::new("sensor_clock", false, format!("no samples for horn {id}"));
        }
        if let Err(e) = regular_clock(&times) {
            return Check::new("sensor_clock", false, format!("{id}: {e}"));
        }
    }
    let n = records.len() / horn_ids.len().max(1);
    Check::new("sensor_clock", true, format!("{n} samples per horn on a fixed clock"))
}

fn report_consistency(series: &TimeSeries, report: &MetricsReport) -> Check {
    let name = "report_consistency";
    let edges = upper_event_edges(series).unwrap_or(0);
    let upper_events = report.events.iter().filter(|e| e.horn_id == "upper").count();
    if report.collision_count != upper_events {
        return Check::new(
            name,
            false,
            format!(
                "collision_count {} but {upper_events} upper events listed",
                report.collision_count
            ),
        );
    }
    if report.collision_count != edges {
        return Check::new(
            name,
            false,
            format!(
                "collision_count {} but {edges} upper events in the series",
                report.collision_count
            ),
        );
    }
    if report.approach_phases != approach_phases(series) {
        return Check::new(name, false, "approach phase count differs from the series");
    }
    if report.bumps.len() != report.pitch_rmse_deg.per_bump.len() {
        return Check::new(name, false, "per-bump RMSE list does not match the bump list");
    }
    Check::new(
        name,
        true,
        format!("{} collisions agree with the series", report.collision_count),
    )
}

/// Runs every applicable check on a series and, when given, its sensor trace
/// and metrics report.
pub fn validate_run(
    series: &TimeSeries,
    sensors: Option<&[SensorRecord]>,
    report: Option<&MetricsReport>,
) -> Vec<Check> {
    let mut checks = vec![
        log_clock(series),
        finite_values(series),
        contact_consistency(series),
        dissipation_monotone(series),
        energy_balance(series),
        energy_audit(series),
        event_count_consistency(series),
    ];
    if let Some(s) = sensors {
        checks.push(sensor_clock(s, &series.horn_ids));
    }
    if let Some(r) = report {
        checks.push(report_consistency(series, r));
    }
    checks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{evaluate, run_experiment, ExperimentConfig};
    use crate::ConfigurationName;

    fn run(name: ConfigurationName, bumps: u32) -> crate::harness::RunOutput {
        let mut cfg = ExperimentConfig::touch_and_go(name, 2);
        cfg.touch_and_go.n_bumps = bumps;
        run_experiment(&cfg).unwrap()
    }

    fn status(checks: &[Check], name: &str) -> CheckStatus {
        checks.iter().find(|c| c.name == name).unwrap().status
    }

    #[test]
    fn finished_runs_pass_everything() {
        for name in ConfigurationName::ALL {
            let out = run(name, 2);
            let report = evaluate(&out).unwrap();
            let checks = validate_run(&out.series, Some(&out.sensor_trace), Some(&report));
            assert!(all_passed(&checks), "{name:?}: {checks:#?}");
            assert_eq!(status(&checks, "energy_audit"), CheckStatus::Pass);
            assert_eq!(status(&checks, "event_count"), CheckStatus::Pass);
        }
    }

    #[test]
    fn tampered_series_fails() {
        let out = run(ConfigurationName::FullSoft, 1);
        let mut series = out.series.clone();
        series.rows[50].t += 0.003;
        series.rows[80].kinetic_energy += 0.5;
        let checks = validate_run(&series, None, None);
        assert_eq!(status(&checks, "log_clock"), CheckStatus::Fail);
        assert_eq!(status(&checks, "energy_balance"), CheckStatus::Fail);
        assert!(!all_passed(&checks));
    }

    #[test]
    fn dropped_event_breaks_counts() {
        let out = run(ConfigurationName::FullSoft, 2);
        let report = evaluate(&out).unwrap();
        let mut series = out.series.clone();
        for r in &mut series.rows {
            r.horns[0].in_event = false;
        }
        let checks = validate_run(&series, None, Some(&report));
        assert_eq!(status(&checks, "event_count"), CheckStatus::Fail);
        assert_eq!(status(&checks, "report_consistency"), CheckStatus::Fail);
    }

    #[test]
    fn pushing_skips_event_count() {
        let out = run_experiment(&ExperimentConfig::pushing(ConfigurationName::FullSoft, 0)).unwrap();
        let checks = validate_run(&out.series, None, None);
        assert_eq!(status(&checks, "event_count"), CheckStatus::Skip);
        assert!(all_passed(&checks), "{checks:#?}");
    }

    #[test]
    fn empty_series_skips_energy() {
        let series = TimeSeries {
            horn_ids: vec!["upper".into()],
            rows: vec![],
        };
        let checks = validate_run(&series, None, None);
        assert_eq!(status(&checks, "energy_balance"), CheckStatus::Skip);
        assert!(all_passed(&checks));
    }

    #[test]
    fn edges_count_rising_flanks() {
        assert_eq!(rising_edges([false, true, true, false, true].into_iter()), 2);
        assert_eq!(rising_edges([true, false].into_iter()), 1);
        assert_eq!(rising_edges(std::iter::empty()), 0);
    }
}
