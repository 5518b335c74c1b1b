//! Logged state time series and its CSV form.
//!
//! Columns, in order: the base columns of [`BASE_COLUMNS`], then for each
//! horn present (upper first) the columns of [`HORN_COLUMNS`] prefixed with
//! the horn id, e.g. `upper_deflection`. Reals are written with nine
//! significant digits, flags and codes as integers.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::Phase;
use crate::error::HarnessError;

pub const BASE_COLUMNS: [&str; 19] = [
    "t",
    "x",
    "z",
    "theta",
    "vx",
    "vz",
    "q",
    "thrust",
    "torque",
    "pitch_setpoint",
    "altitude_setpoint",
    "phase",
    "kinetic_energy",
    "potential_energy",
    "spring_energy",
    "thrust_work",
    "torque_work",
    "damping_dissipation",
    "friction_dissipation",
];

pub const HORN_COLUMNS: [&str; 10] = [
    "deflection",
    "deflection_rate",
    "normal_force",
    "friction_force",
    "in_contact",
    "failed",
    "adc_code",
    "resistance",
    "filtered",
    "in_event",
];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HornLog {
    pub deflection: f64,
    pub deflection_rate: f64,
    pub normal_force: f64,
    pub friction_force: f64,
    pub in_contact: bool,
    pub failed: bool,
    /// Last sensor sample, held between samples.
    pub adc_code: u32,
    pub resistance: f64,
    pub filtered: f64,
    pub in_event: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub t: f64,
    pub x: f64,
    pub z: f64,
    pub theta: f64,
    pub vx: f64,
    pub vz: f64,
    pub q: f64,
    pub thrust: f64,
    pub torque: f64,
    pub pitch_setpoint: f64,
    pub altitude_setpoint: f64,
    pub phase: Phase,
    pub kinetic_energy: f64,
    pub potential_energy: f64,
    pub spring_energy: f64,
    pub thrust_work: f64,
    pub torque_work: f64,
    pub damping_dissipation: f64,
    pub friction_dissipation: f64,
    pub horns: Vec<HornLog>,
}

impl LogRow {
    /// Mechanical plus stored spring energy.
    pub fn stored_energy(&self) -> f64 {
        self.kinetic_energy + self.potential_energy + self.spring_energy
    }

    /// Stored energy minus all external work plus all dissipation; constant
    /// for an exact integration.
    pub fn energy_balance(&self) -> f64 {
        self.stored_energy() - self.thrust_work - self.torque_work
            + self.damping_dissipation
            + self.friction_dissipation
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TimeSeries {
    pub horn_ids: Vec<String>,
    pub rows: Vec<LogRow>,
}

pub fn format_real(v: f64) -> String {
    if v == 0.0 {
        // one spelling for both signed zeros
        return "0".to_string();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    format!("{v:.8e}")
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

impl TimeSeries {
    pub fn horn_index(&self, id: &str) -> Option<usize> {
        self.horn_ids.iter().position(|h| h == id)
    }

    pub fn header(&self) -> Vec<String> {
        let mut cols: Vec<String> = BASE_COLUMNS.iter().map(|c| c.to_string()).collect();
        for id in &self.horn_ids {
            cols.extend(HORN_COLUMNS.iter().map(|c| format!("{id}_{c}")));
        }
        cols
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        let mut rec: Vec<String> = Vec::new();
        for r in &self.rows {
            rec.clear();
            for v in [
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
            ] {
                rec.push(format_real(v));
            }
            rec.push(r.phase.code().to_string());
            for v in [
                r.kinetic_energy,
                r.potential_energy,
                r.spring_energy,
                r.thrust_work,
                r.torque_work,
                r.damping_dissipation,
                r.friction_dissipation,
            ] {
                rec.push(format_real(v));
            }
            for h in &r.horns {
                for v in [h.deflection, h.deflection_rate, h.normal_force, h.friction_force] {
                    rec.push(format_real(v));
                }
                rec.push(flag(h.in_contact).into());
                rec.push(flag(h.failed).into());
                rec.push(h.adc_code.to_string());
                rec.push(format_real(h.resistance));
                rec.push(format_real(h.filtered));
                rec.push(flag(h.in_event).into());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), HarnessError> {
        let file = std::fs::File::create(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| HarnessError::Csv {
                path: path.to_path_buf(),
                message: e.to_string(),
            })
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, String> {
        let mut rdr = csv::Reader::from_reader(input);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| e.to_string())?
            .iter()
            .map(str::to_string)
            .collect();
        if header.len() < BASE_COLUMNS.len() || header[..BASE_COLUMNS.len()] != BASE_COLUMNS {
            return Err("missing or reordered base columns".into());
        }
        let rest = &header[BASE_COLUMNS.len()..];
        if !rest.len().is_multiple_of(HORN_COLUMNS.len()) {
            return Err("horn column count is not a whole number of horns".into());
        }
        let mut horn_ids = Vec::new();
        for chunk in rest.chunks(HORN_COLUMNS.len()) {
            let id = chunk[0]
                .strip_suffix(&format!("_{}", HORN_COLUMNS[0]))
                .ok_or_else(|| format!("unexpected column `{}`", chunk[0]))?;
            for (col, name) in chunk.iter().zip(HORN_COLUMNS) {
                if *col != format!("{id}_{name}") {
                    return Err(format!("unexpected column `{col}`"));
                }
            }
            horn_ids.push(id.to_string());
        }

        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| e.to_string())?;
            if rec.len() != header.len() {
                return Err(format!("row {} has {} fields", line + 1, rec.len()));
            }
            let num = |i: usize| -> Result<f64, String> {
                rec[i]
                    .parse::<f64>()
                    .map_err(|_| format!("row {}: bad number `{}` in `{}`", line + 1, &rec[i], header[i]))
            };
            let int = |i: usize| -> Result<u32, String> {
                rec[i]
                    .parse::<u32>()
                    .map_err(|_| format!("row {}: bad integer `{}` in `{}`", line + 1, &rec[i], header[i]))
            };
            let boolean = |i: usize| -> Result<bool, String> {
                match int(i)? {
                    0 => Ok(false),
                    1 => Ok(true),
                    v => Err(format!("row {}: flag `{}` is {v}", line + 1, header[i])),
                }
            };
            let phase = u8::try_from(int(11)?)
                .ok()
                .and_then(Phase::from_code)
                .ok_or_else(|| format!("row {}: unknown phase", line + 1))?;
            let mut horns = Vec::with_capacity(horn_ids.len());
            for k in 0..horn_ids.len() {
                let b = BASE_COLUMNS.len() + k * HORN_COLUMNS.len();
                horns.push(HornLog {
                    deflection: num(b)?,
                    deflection_rate: num(b + 1)?,
                    normal_force: num(b + 2)?,
                    friction_force: num(b + 3)?,
                    in_contact: boolean(b + 4)?,
                    failed: boolean(b + 5)?,
                    adc_code: int(b + 6)?,
                    resistance: num(b + 7)?,
                    filtered: num(b + 8)?,
                    in_event: boolean(b + 9)?,
                });
            }
            rows.push(LogRow {
                t: num(0)?,
                x: num(1)?,
                z: num(2)?,
                theta: num(3)?,
                vx: num(4)?,
                vz: num(5)?,
                q: num(6)?,
                thrust: num(7)?,
                torque: num(8)?,
                pitch_setpoint: num(9)?,
                altitude_setpoint: num(10)?,
                phase,
                kinetic_energy: num(12)?,
                potential_energy: num(13)?,
                spring_energy: num(14)?,
                thrust_work: num(15)?,
                torque_work: num(16)?,
                damping_dissipation: num(17)?,
                friction_dissipation: num(18)?,
                horns,
            });
        }
        Ok(TimeSeries { horn_ids, rows })
    }

    pub fn load_csv(path: &Path) -> Result<Self, HarnessError> {
        let file = std::fs::File::open(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::read_csv(std::io::BufReader::new(file)).map_err(|message| HarnessError::Csv {
            path: path.to_path_buf(),
            message,
        })
    }
}

/// One sensor sample of one horn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorRecord {
    pub t: f64,
    pub horn_id: String,
    pub code: u32,
    pub resistance_ohm: f64,
    pub filtered_ohm: f64,
    pub in_event: bool,
}

pub const SENSOR_COLUMNS: [&str; 6] = ["t", "horn_id", "code", "resistance_ohm", "filtered_ohm", "in_event"];

pub fn write_sensor_csv<W: Write>(records: &[SensorRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SENSOR_COLUMNS)?;
    for r in records {
        w.write_record([
            format_real(r.t),
            r.horn_id.clone(),
            r.code.to_string(),
            format_real(r.resistance_ohm),
            format_real(r.filtered_ohm),
            flag(r.in_event).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sensor_csv<R: Read>(input: R) -> Result<Vec<SensorRecord>, String> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers().map_err(|e| e.to_string())?.clone();
    if header.iter().ne(SENSOR_COLUMNS) {
        return Err("unexpected sensor trace header".into());
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let bad = |what: &str| format!("row {}: bad {what}", line + 1);
        out.push(SensorRecord {
            t: rec[0].parse().map_err(|_| bad("t"))?,
            horn_id: rec[1].to_string(),
            code: rec[2].parse().map_err(|_| bad("code"))?,
            resistance_ohm: rec[3].parse().map_err(|_| bad("resistance_ohm"))?,
            filtered_ohm: rec[4].parse().map_err(|_| bad("filtered_ohm"))?,
            in_event: match &rec[5] {
                "0" => false,
                "1" => true,
                _ => return Err(bad("in_event")),
            },
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(t: f64, n_horns: usize) -> LogRow {
        LogRow {
            t,
            x: 0.123456789123,
            z: 1.0,
            theta: -0.26,
            vx: 1e-12,
            vz: -0.0,
            q: 3.0,
            thrust: 6.867,
            torque: -0.01,
            pitch_setpoint: 0.26,
            altitude_setpoint: 1.0,
            phase: Phase::Approach,
            kinetic_energy: 0.5,
            potential_energy: 6.867,
            spring_energy: 0.0,
            thrust_work: 1.0,
            torque_work: 0.0,
            damping_dissipation: 0.25,
            friction_dissipation: 0.0,
            horns: vec![
                HornLog {
                    deflection: 0.01,
                    in_contact: true,
                    adc_code: 1200,
                    resistance: 10_000.0,
                    filtered: 12.5,
                    in_event: true,
                    ..HornLog::default()
                };
                n_horns
            ],
        }
    }

    #[test]
    fn header_order() {
        let s = TimeSeries {
            horn_ids: vec!["upper".into(), "lower".into()],
            rows: vec![],
        };
        let h = s.header();
        assert_eq!(h.len(), BASE_COLUMNS.len() + 2 * HORN_COLUMNS.len());
        assert_eq!(h[0], "t");
        assert_eq!(h[BASE_COLUMNS.len()], "upper_deflection");
        assert_eq!(h.last().unwrap(), "lower_in_event");
    }

    #[test]
    fn format_real_keeps_nine_digits() {
        assert_eq!(format_real(0.123456789123), "1.23456789e-1");
        assert_eq!(format_real(-0.0), "0");
        assert_eq!(format_real(1.0), "1.00000000e0");
    }

    #[test]
    fn csv_round_trip_is_stable() {
        let s = TimeSeries {
            horn_ids: vec!["upper".into(), "lower".into()],
            rows: (0..5).map(|i| row(i as f64 * 0.01, 2)).collect(),
        };
        let text = s.to_csv_string();
        let back = TimeSeries::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back.horn_ids, s.horn_ids);
        assert_eq!(back.to_csv_string(), text);
        assert_eq!(back.rows[0].phase, Phase::Approach);
        assert!(back.rows[0].horns[1].in_event);
    }

    #[test]
    fn rejects_reordered_columns() {
        let text = "x,t\n1,2\n";
        assert!(TimeSeries::read_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn sensor_csv_round_trip() {
        let recs = vec![
            SensorRecord {
                t: 0.02,
                horn_id: "upper".into(),
                code: 1353,
                resistance_ohm: 10_012.5,
                filtered_ohm: 3.25,
                in_event: false,
            },
            SensorRecord {
                t: 0.02,
                horn_id: "lower".into(),
                code: 1353,
                resistance_ohm: 9_990.0,
                filtered_ohm: -1.0,
                in_event: true,
            },
        ];
        let mut buf = Vec::new();
        write_sensor_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,horn_id,code,resistance_ohm,filtered_ohm,in_event\n"));
        assert_eq!(read_sensor_csv(text.as_bytes()).unwrap(), recs);
    }

    proptest! {
        #[test]
        fn printed_reals_are_fixed_points(v in proptest::num::f64::NORMAL) {
            let once = format_real(v);
            let back: f64 = once.parse().unwrap();
            prop_assert_eq!(format_real(back), once);
            prop_assert!((back - v).abs() <= v.abs() * 1e-8);
        }
    }
}
