//! Writing run artifacts to disk.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::HarnessError;
use crate::harness::metrics::MetricsReport;
use crate::harness::run::RunOutput;
use crate::harness::series::write_sensor_csv;

/// Files produced by [`export_run`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportPaths {
    pub series_csv: PathBuf,
    pub sensors_csv: PathBuf,
    pub report_json: PathBuf,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Writes `text` to `path`, creating or truncating it.
pub fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    let mut f = File::create(path).map_err(io_err(path))?;
    f.write_all(text.as_bytes()).map_err(io_err(path))
}

/// Writes CSV produced by `body` to `path`.
pub fn write_csv_with<F>(path: &Path, body: F) -> Result<(), HarnessError>
where
    F: FnOnce(&mut BufWriter<File>) -> csv::Result<()>,
{
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    body(&mut w).map_err(|e| HarnessError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    w.flush().map_err(io_err(path))
}

/// Writes `<stem>.csv`, `<stem>_sensors.csv` and `<stem>.json` into `dir`.
pub fn export_run(
    run: &RunOutput,
    report: &MetricsReport,
    dir: &Path,
    stem: &str,
) -> Result<ExportPaths, HarnessError> {
    ensure_dir(dir)?;
    let paths = ExportPaths {
        series_csv: dir.join(format!("{stem}.csv")),
        sensors_csv: dir.join(format!("{stem}_sensors.csv")),
        report_json: dir.join(format!("{stem}.json")),
    };
    run.series.save_csv(&paths.series_csv)?;
    write_csv_with(&paths.sensors_csv, |w| write_sensor_csv(&run.sensor_trace, w))?;
    write_text(&paths.report_json, &report.to_json())?;
    Ok(paths)
}
