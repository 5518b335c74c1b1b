//! `bumpsim`: run wall-contact experiments, compare horn configurations,
//! sweep a parameter and validate finished runs.
//!
//! Exit status is 0 when everything requested succeeded, 1 when a check or
//! run failed and 2 on usage, configuration or I/O errors.

mod args;

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use bumpsim::harness::export::{ensure_dir, write_csv_with, write_text};
use bumpsim::harness::{
    all_passed, compare_configs, evaluate, export_run, read_sensor_csv, run_experiment, sweep, validate_run, Check,
    CheckStatus, ComparisonReport, ExperimentConfig, MetricsReport, Scenario, SweepReport, TimeSeries,
};
use bumpsim::ConfigurationName;

#[derive(Parser, Debug)]
#[command(
    name = "bumpsim",
    version,
    about = "Quadrotor wall-contact simulator with tactile horns"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one experiment and export its series, sensor trace and metrics.
    Run(RunArgs),
    /// Run several horn configurations over a set of seeds.
    Compare(CompareArgs),
    /// Run one configuration for each value of one parameter.
    Sweep(SweepArgs),
    /// Check a finished run's CSV for physical and bookkeeping invariants.
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
struct BaseArgs {
    /// Experiment config file (TOML). Defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// touch_and_go, pushing or scripted.
    #[arg(long, value_name = "NAME")]
    scenario: Option<Scenario>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Config override, e.g. `--set horns.soft.stiffness=300`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = args::parse_override)]
    overrides: Vec<(String, String)>,
}

impl BaseArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.scenario {
            cfg.scenario = s;
        }
        Ok(cfg.with_overrides(&self.overrides)?)
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    base: BaseArgs,
    /// Horn configuration.
    #[arg(long, value_name = "NAME")]
    configset: Option<ConfigurationName>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// File stem of the outputs. Defaults to `<scenario>_<configuration>_s<seed>`.
    #[arg(long)]
    stem: Option<String>,
    /// Also run the invariant checks on the result.
    #[arg(long)]
    check: bool,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    base: BaseArgs,
    /// Configurations to compare.
    #[arg(long, value_name = "NAME[,NAME...]", value_parser = args::parse_configset,
          default_value = "full_soft,full_hard,half_soft")]
    configset: ::std::vec::Vec<ConfigurationName>,
    /// Seeds as `N`, `N..M` (end exclusive), `N..=M` or a comma list.
    #[arg(long, value_name = "N..M", value_parser = args::parse_seeds, default_value = "0..5")]
    seeds: ::std::vec::Vec<u64>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    base: BaseArgs,
    /// Dotted config path, e.g. `horns.soft.stiffness`.
    #[arg(long, value_name = "KEY")]
    param: String,
    /// Comma-separated values.
    #[arg(long, value_name = "V[,V...]", value_parser = args::parse_values)]
    values: ::std::vec::Vec<String>,
    #[arg(long, value_name = "NAME")]
    configset: Option<ConfigurationName>,
    #[arg(long, value_name = "N..M", value_parser = args::parse_seeds, default_value = "0..5")]
    seeds: ::std::vec::Vec<u64>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Series CSV written by `bumpsim run`.
    csv: PathBuf,
    /// Sensor trace. Defaults to `<stem>_sensors.csv` next to the series when present.
    #[arg(long, value_name = "PATH")]
    sensors: Option<PathBuf>,
    /// Metrics report. Defaults to `<stem>.json` next to the series when present.
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
}

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.prec$}"))
}

fn print_checks(checks: &[Check]) {
    for c in checks {
        let tag = match c.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skip => "SKIP",
        };
        println!("{tag:<5} {:<20} {}", c.name, c.detail);
    }
}

fn print_report(r: &MetricsReport) {
    println!(
        "{} {} seed {}: {} collisions, {} impacts, RMSE {} deg, delay {} ms, {:?}",
        r.scenario.as_str(),
        r.configuration,
        r.seed,
        r.collision_count,
        r.ground_truth_impacts,
        fmt_opt(r.pitch_rmse_deg.mean, 2),
        fmt_opt(r.contact_delay_ms.mean, 1),
        r.stability
    );
    for f in &r.failures {
        println!(
            "  horn {} failed at t = {:.3} s (impact {})",
            f.horn_id, f.t, f.impact_index
        );
    }
}

fn cmd_run(a: &RunArgs) -> Result<bool> {
    let mut cfg = a.base.load()?;
    if let Some(c) = a.configset {
        cfg.configuration = c;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let run = run_experiment(&cfg)?;
    let report = evaluate(&run)?;
    let stem = a
        .stem
        .clone()
        .unwrap_or_else(|| format!("{}_{}_s{}", cfg.scenario.as_str(), cfg.configuration.as_str(), cfg.seed));
    let paths = export_run(&run, &report, &a.base.out, &stem)?;
    write_text(&a.base.out.join(format!("{stem}.toml")), &cfg.to_toml_string())?;
    print_report(&report);
    println!("wrote {}", paths.series_csv.display());
    if !a.check {
        return Ok(true);
    }
    let checks = validate_run(&run.series, Some(&run.sensor_trace), Some(&report));
    print_checks(&checks);
    Ok(all_passed(&checks))
}

fn print_comparison(cmp: &ComparisonReport) {
    println!(
        "{:<10} {:>5} {:>10} {:>9} {:>10} {:>10} unstable",
        "config", "runs", "rmse_deg", "std", "delay_ms", "collisions"
    );
    for c in &cmp.configs {
        println!(
            "{:<10} {:>5} {:>10} {:>9} {:>10} {:>10} {:?}",
            c.configuration.as_str(),
            c.runs,
            fmt_opt(c.mean_rmse_deg, 3),
            fmt_opt(c.std_rmse_deg, 3),
            fmt_opt(c.mean_contact_delay_ms, 1),
            c.collisions,
            c.unstable_seeds
        );
    }
    for r in &cmp.reductions {
        println!(
            "reduction {} vs {}: {}%",
            r.configuration.as_str(),
            r.relative_to.as_str(),
            fmt_opt(r.percent, 1)
        );
    }
    for r in cmp.runs.iter().filter(|r| r.error.is_some()) {
        println!(
            "error {} seed {}: {}",
            r.configuration.as_str(),
            r.seed,
            r.error.as_deref().unwrap_or("")
        );
    }
}

fn cmd_compare(a: &CompareArgs) -> Result<bool> {
    let cfg = a.base.load()?;
    let cmp = compare_configs(&cfg, &a.configset, &a.seeds)?;
    ensure_dir(&a.base.out)?;
    write_text(&a.base.out.join("compare.json"), &cmp.to_json())?;
    write_csv_with(&a.base.out.join("compare_bumps.csv"), |w| cmp.write_bumps_csv(w))?;
    print_comparison(&cmp);
    Ok(cmp.runs.iter().all(|r| r.error.is_none()))
}

fn print_sweep(s: &SweepReport) {
    println!("{} on {}", s.parameter, s.configuration.as_str());
    println!(
        "{:>14} {:>10} {:>10} {:>10} {:>8} unstable",
        "value", "rmse_deg", "delay_ms", "collisions", "impacts"
    );
    for p in &s.points {
        println!(
            "{:>14} {:>10} {:>10} {:>10} {:>8} {:?}",
            p.value,
            fmt_opt(p.mean_rmse_deg, 3),
            fmt_opt(p.mean_contact_delay_ms, 1),
            p.collisions,
            p.ground_truth_impacts,
            p.unstable_seeds
        );
        for e in &p.errors {
            println!("  error: {e}");
        }
    }
}

fn cmd_sweep(a: &SweepArgs) -> Result<bool> {
    let mut cfg = a.base.load()?;
    if let Some(c) = a.configset {
        cfg.configuration = c;
    }
    let report = sweep(&cfg, &a.param, &a.values, &a.seeds)?;
    ensure_dir(&a.base.out)?;
    write_text(&a.base.out.join("sweep.json"), &report.to_json())?;
    print_sweep(&report);
    Ok(report.points.iter().all(|p| p.errors.is_empty()))
}

fn sibling(csv: &Path, suffix: &str) -> Option<PathBuf> {
    let stem = csv.file_stem()?.to_str()?;
    let p = csv.with_file_name(format!("{stem}{suffix}"));
    p.exists().then_some(p)
}

fn cmd_validate(a: &ValidateArgs) -> Result<bool> {
    let series = TimeSeries::load_csv(&a.csv)?;
    let sensors_path = a.sensors.clone().or_else(|| sibling(&a.csv, "_sensors.csv"));
    let report_path = a.report.clone().or_else(|| sibling(&a.csv, ".json"));
    let sensors = match &sensors_path {
        Some(p) => {
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            let records = read_sensor_csv(BufReader::new(f)).map_err(anyhow::Error::msg);
            Some(records.with_context(|| format!("reading {}", p.display()))?)
        }
        None => None,
    };
    let report = match &report_path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let parsed = MetricsReport::from_json(&text).map_err(anyhow::Error::msg);
            Some(parsed.with_context(|| format!("parsing {}", p.display()))?)
        }
        None => None,
    };
    if series.rows.is_empty() && report.as_ref().is_some_and(|r| r.duration_s > 0.0) {
        bail!(
            "{} has no rows but the report covers {} s",
            a.csv.display(),
            report.as_ref().unwrap().duration_s
        );
    }
    println!("series {}", a.csv.display());
    for (what, p) in [("sensors", &sensors_path), ("report", &report_path)] {
        if let Some(p) = p {
            println!("{what} {}", p.display());
        }
    }
    let checks = validate_run(&series, sensors.as_deref(), report.as_ref());
    print_checks(&checks);
    Ok(all_passed(&checks))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
