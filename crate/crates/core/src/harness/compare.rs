//! Multi-configuration, multi-seed comparisons and one-parameter sweeps.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contact::ConfigurationName;
use crate::error::{ConfigError, HarnessError};
use crate::harness::config::ExperimentConfig;
use crate::harness::metrics::{evaluate, MetricsReport, SCHEMA_VERSION};
use crate::harness::run::run_experiment;
use crate::harness::series::format_real;

/// Outcome of one (configuration, seed) run inside a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub configuration: ConfigurationName,
    pub seed: u64,
    /// Present unless the run itself errored.
    pub report: Option<MetricsReport>,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn diverged(&self) -> bool {
        self.error.is_some() || self.report.as_ref().is_some_and(|r| !r.stability.is_stable())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigAggregate {
    pub configuration: ConfigurationName,
    pub runs: usize,
    /// Per-bump RMSE over all seeds, in seed order, deg.
    pub rmse_per_bump_deg: Vec<f64>,
    pub mean_rmse_deg: Option<f64>,
    pub std_rmse_deg: Option<f64>,
    pub mean_contact_delay_ms: Option<f64>,
    pub bumps_with_lower_contact: usize,
    pub collisions: usize,
    pub unstable_seeds: Vec<u64>,
}

/// `100 * (1 - mean(config) / mean(relative_to))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    pub configuration: ConfigurationName,
    pub relative_to: ConfigurationName,
    pub percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub schema_version: u32,
    pub seeds: Vec<u64>,
    pub configs: Vec<ConfigAggregate>,
    pub reductions: Vec<Reduction>,
    pub runs: Vec<RunRecord>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn std_dev(v: &[f64]) -> Option<f64> {
    let m = mean(v)?;
    Some((v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt())
}

fn run_one(cfg: &ExperimentConfig) -> Result<MetricsReport, HarnessError> {
    evaluate(&run_experiment(cfg)?)
}

/// Runs every configuration over every seed and aggregates pitch RMSE.
///
/// Runs execute in parallel; aggregation is keyed by (configuration, seed),
/// so the report does not depend on scheduling. Hard-horn damage is switched
/// off so each configuration keeps its morphology for the whole run. A run
/// that errors is recorded rather than aborting the comparison.
pub fn compare_configs(
    base: &ExperimentConfig,
    names: &[ConfigurationName],
    seeds: &[u64],
) -> Result<ComparisonReport, HarnessError> {
    if names.len() < 2 {
        return Err(ConfigError::Invalid("compare needs at least two configurations".into()).into());
    }
    if seeds.is_empty() {
        return Err(ConfigError::Invalid("compare needs at least one seed".into()).into());
    }
    let mut unique: Vec<ConfigurationName> = Vec::new();
    for n in names {
        if !unique.contains(n) {
            unique.push(*n);
        }
    }
    let jobs: Vec<(usize, ConfigurationName, u64)> = unique
        .iter()
        .enumerate()
        .flat_map(|(i, n)| seeds.iter().map(move |s| (i, *n, *s)))
        .collect();
    let results: BTreeMap<(usize, u64), RunRecord> = jobs
        .par_iter()
        .map(|&(i, name, seed)| {
            let mut cfg = base.clone();
            cfg.configuration = name;
            cfg.seed = seed;
            cfg.horns.damage = false;
            let (report, error) = match run_one(&cfg) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            (
                (i, seed),
                RunRecord {
                    configuration: name,
                    seed,
                    report,
                    error,
                },
            )
        })
        .collect();
    let runs: Vec<RunRecord> = results.into_values().collect();

    let configs: Vec<ConfigAggregate> = unique
        .iter()
        .map(|name| {
            let mine: Vec<&RunRecord> = runs.iter().filter(|r| r.configuration == *name).collect();
            let reports: Vec<&MetricsReport> = mine.iter().filter_map(|r| r.report.as_ref()).collect();
            let rmse: Vec<f64> = reports
                .iter()
                .flat_map(|r| r.pitch_rmse_deg.per_bump.iter().copied())
                .collect();
            let delays: Vec<f64> = reports
                .iter()
                .flat_map(|r| r.contact_delay_ms.per_bump.iter().flatten().copied())
                .collect();
            ConfigAggregate {
                configuration: *name,
                runs: mine.len(),
                mean_rmse_deg: mean(&rmse),
                std_rmse_deg: std_dev(&rmse),
                rmse_per_bump_deg: rmse,
                mean_contact_delay_ms: mean(&delays),
                bumps_with_lower_contact: delays.len(),
                collisions: reports.iter().map(|r| r.collision_count).sum(),
                unstable_seeds: mine.iter().filter(|r| r.diverged()).map(|r| r.seed).collect(),
            }
        })
        .collect();

    let mut reductions = Vec::new();
    for (i, a) in configs.iter().enumerate() {
        for b in &configs[i + 1..] {
            reductions.push(reduction(a, b));
        }
    }
    if unique.len() < names.len() {
        // A configuration listed twice is compared against itself.
        for a in configs
            .iter()
            .filter(|a| names.iter().filter(|n| **n == a.configuration).count() > 1)
        {
            reductions.push(reduction(a, a));
        }
    }

    Ok(ComparisonReport {
        schema_version: SCHEMA_VERSION,
        seeds: seeds.to_vec(),
        configs,
        reductions,
        runs,
    })
}

fn reduction(a: &ConfigAggregate, b: &ConfigAggregate) -> Reduction {
    let percent = match (a.mean_rmse_deg, b.mean_rmse_deg) {
        (Some(x), Some(y)) if y > 0.0 => Some(100.0 * (1.0 - x / y)),
        _ => None,
    };
    Reduction {
        configuration: a.configuration,
        relative_to: b.configuration,
        percent,
    }
}

impl ComparisonReport {
    pub fn config(&self, name: ConfigurationName) -> Option<&ConfigAggregate> {
        self.configs.iter().find(|c| c.configuration == name)
    }

    pub fn reduction(&self, name: ConfigurationName, relative_to: ConfigurationName) -> Option<f64> {
        self.reductions
            .iter()
            .find(|r| r.configuration == name && r.relative_to == relative_to)
            .and_then(|r| r.percent)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub const BUMP_COLUMNS: [&'static str; 9] = [
        "configuration",
        "seed",
        "bump",
        "pitch_rmse_deg",
        "contact_delay_ms",
        "net_pitch_excursion_deg",
        "q_max",
        "q_min",
        "energy_absorbed_j",
    ];

    /// One row per bump across all runs; missing values are empty cells.
    pub fn write_bumps_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::BUMP_COLUMNS)?;
        let opt = |v: Option<f64>| v.map(format_real).unwrap_or_default();
        for run in &self.runs {
            let Some(report) = &run.report else { continue };
            for b in &report.bumps {
                w.write_record([
                    run.configuration.as_str().to_string(),
                    run.seed.to_string(),
                    b.index.to_string(),
                    format_real(b.pitch_rmse_deg),
                    opt(b.contact_delay_ms),
                    format_real(b.net_pitch_excursion_deg),
                    format_real(b.q_max),
                    format_real(b.q_min),
                    opt(b.energy_absorbed_j),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// One point of a parameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: String,
    pub mean_rmse_deg: Option<f64>,
    pub mean_contact_delay_ms: Option<f64>,
    pub collisions: usize,
    pub ground_truth_impacts: usize,
    pub unstable_seeds: Vec<u64>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub configuration: ConfigurationName,
    pub parameter: String,
    pub seeds: Vec<u64>,
    pub points: Vec<SweepPoint>,
}

impl SweepReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Runs `base` for each value of one dotted parameter path over all seeds.
pub fn sweep(
    base: &ExperimentConfig,
    parameter: &str,
    values: &[String],
    seeds: &[u64],
) -> Result<SweepReport, HarnessError> {
    if values.is_empty() || seeds.is_empty() {
        return Err(ConfigError::Invalid("sweep needs at least one value and one seed".into()).into());
    }
    // Reject bad paths or values up front rather than once per seed.
    let configs: Vec<ExperimentConfig> = values
        .iter()
        .map(|v| base.with_overrides(&[(parameter.to_string(), v.clone())]))
        .collect::<Result<_, _>>()?;
    let jobs: Vec<(usize, u64)> = (0..values.len())
        .flat_map(|i| seeds.iter().map(move |s| (i, *s)))
        .collect();
    let results: BTreeMap<(usize, u64), Result<MetricsReport, String>> = jobs
        .par_iter()
        .map(|&(i, seed)| {
            let mut cfg = configs[i].clone();
            cfg.seed = seed;
            ((i, seed), run_one(&cfg).map_err(|e| e.to_string()))
        })
        .collect();
    let points = values
        .iter()
        .enumerate()
        .map(|(i, value)| {
            let mine: Vec<(u64, &Result<MetricsReport, String>)> = results
                .iter()
                .filter(|((j, _), _)| *j == i)
                .map(|((_, s), r)| (*s, r))
                .collect();
            let ok: Vec<&MetricsReport> = mine.iter().filter_map(|(_, r)| r.as_ref().ok()).collect();
            let rmse: Vec<f64> = ok
                .iter()
                .flat_map(|r| r.pitch_rmse_deg.per_bump.iter().copied())
                .collect();
            let delays: Vec<f64> = ok
                .iter()
                .flat_map(|r| r.contact_delay_ms.per_bump.iter().flatten().copied())
                .collect();
            SweepPoint {
                value: value.clone(),
                mean_rmse_deg: mean(&rmse),
                mean_contact_delay_ms: mean(&delays),
                collisions: ok.iter().map(|r| r.collision_count).sum(),
                ground_truth_impacts: ok.iter().map(|r| r.ground_truth_impacts).sum(),
                unstable_seeds: mine
                    .iter()
                    .filter(|(_, r)| r.as_ref().map_or(true, |r| !r.stability.is_stable()))
                    .map(|(s, _)| *s)
                    .collect(),
                errors: mine.iter().filter_map(|(_, r)| r.as_ref().err().cloned()).collect(),
            }
        })
        .collect();
    Ok(SweepReport {
        schema_version: SCHEMA_VERSION,
        configuration: base.configuration,
        parameter: parameter.to_string(),
        seeds: seeds.to_vec(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(name: ConfigurationName) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::touch_and_go(name, 0);
        cfg.touch_and_go.n_bumps = 1;
        cfg
    }

    #[test]
    fn needs_two_configurations() {
        let cfg = short(ConfigurationName::FullSoft);
        assert!(compare_configs(&cfg, &[ConfigurationName::FullSoft], &[0]).is_err());
        assert!(compare_configs(&cfg, &[ConfigurationName::FullSoft, ConfigurationName::HalfSoft], &[]).is_err());
    }

    #[test]
    fn self_comparison_is_zero() {
        let cfg = short(ConfigurationName::FullSoft);
        let rep = compare_configs(&cfg, &[ConfigurationName::FullSoft, ConfigurationName::FullSoft], &[3]).unwrap();
        assert_eq!(rep.configs.len(), 1);
        let pct = rep
            .reduction(ConfigurationName::FullSoft, ConfigurationName::FullSoft)
            .unwrap();
        assert_eq!(pct, 0.0);
    }

    #[test]
    fn report_is_keyed_by_name_then_seed() {
        let cfg = short(ConfigurationName::FullSoft);
        let names = [ConfigurationName::HalfSoft, ConfigurationName::FullSoft];
        let rep = compare_configs(&cfg, &names, &[2, 1]).unwrap();
        let keys: Vec<(ConfigurationName, u64)> = rep.runs.iter().map(|r| (r.configuration, r.seed)).collect();
        assert_eq!(
            keys,
            vec![
                (ConfigurationName::HalfSoft, 1),
                (ConfigurationName::HalfSoft, 2),
                (ConfigurationName::FullSoft, 1),
                (ConfigurationName::FullSoft, 2),
            ]
        );
        assert!(rep.runs.iter().all(|r| r.report.is_some()));
        let hs = rep.config(ConfigurationName::HalfSoft).unwrap();
        let fs = rep.config(ConfigurationName::FullSoft).unwrap();
        let expected = 100.0 * (1.0 - hs.mean_rmse_deg.unwrap() / fs.mean_rmse_deg.unwrap());
        assert_eq!(
            rep.reduction(ConfigurationName::HalfSoft, ConfigurationName::FullSoft),
            Some(expected)
        );
        assert_eq!(hs.bumps_with_lower_contact, 0);
    }

    #[test]
    fn bumps_csv_has_one_row_per_bump() {
        let cfg = short(ConfigurationName::FullSoft);
        let rep = compare_configs(&cfg, &[ConfigurationName::FullSoft, ConfigurationName::HalfSoft], &[0]).unwrap();
        let mut buf = Vec::new();
        rep.write_bumps_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let bumps: usize = rep.runs.iter().map(|r| r.report.as_ref().unwrap().bumps.len()).sum();
        assert_eq!(text.lines().count(), bumps + 1);
        assert!(text.starts_with("configuration,seed,bump,"));
    }

    #[test]
    fn sweep_rejects_unknown_parameter() {
        let cfg = short(ConfigurationName::FullSoft);
        assert!(sweep(&cfg, "horns.nope", &["1".into()], &[0]).is_err());
    }

    #[test]
    fn sweep_reports_each_value() {
        let cfg = short(ConfigurationName::FullSoft);
        let rep = sweep(&cfg, "initial.standoff", &["0.1".into(), "0.2".into()], &[0]).unwrap();
        assert_eq!(rep.points.len(), 2);
        assert_eq!(rep.points[0].value, "0.1");
        assert!(rep.points.iter().all(|p| p.errors.is_empty() && p.collisions == 1));
    }
}
