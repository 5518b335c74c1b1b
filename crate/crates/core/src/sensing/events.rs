//! Contact-event detection on the filtered resistance channel.

use serde::{Deserialize, Serialize};

use crate::error::SensingError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSample {
    pub t: f64,
    pub code: u32,
    /// Measured flex resistance, Ohm.
    pub resistance: f64,
    /// Baseline-subtracted, low-pass filtered resistance, Ohm.
    pub filtered: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactEvent {
    pub horn_id: String,
    pub onset_t: f64,
    pub peak_t: f64,
    pub peak_value: f64,
    pub release_t: f64,
}

impl ContactEvent {
    pub fn duration(&self) -> f64 {
        self.release_t - self.onset_t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub on: f64,
    pub off: f64,
    /// s
    pub min_duration: f64,
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), SensingError> {
        if self.on > self.off && self.off > 0.0 && self.min_duration >= 0.0 {
            Ok(())
        } else {
            Err(SensingError::InvalidThresholds {
                on: self.on,
                off: self.off,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Open {
    onset_t: f64,
    peak_t: f64,
    peak_value: f64,
}

/// Streaming hysteresis detector for one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct EventDetector {
    horn_id: String,
    thresholds: Thresholds,
    open: Option<Open>,
    last_t: Option<f64>,
}

impl EventDetector {
    pub fn new(horn_id: impl Into<String>, thresholds: Thresholds) -> Result<Self, SensingError> {
        thresholds.validate()?;
        Ok(Self {
            horn_id: horn_id.into(),
            thresholds,
            open: None,
            last_t: None,
        })
    }

    pub fn thresholds(&self) -> Thresholds {
        self.thresholds
    }

    /// An event is currently open (the channel reads as in contact).
    pub fn is_open(&self) -> bool {
        self.open.is_some()
    }

    pub fn open_since(&self) -> Option<f64> {
        self.open.map(|o| o.onset_t)
    }

    /// Feeds one filtered sample; returns an event when one closes and is
    /// long enough to keep.
    pub fn push(&mut self, t: f64, filtered: f64) -> Option<ContactEvent> {
        self.last_t = Some(t);
        match &mut self.open {
            None => {
                if filtered >= self.thresholds.on {
                    self.open = Some(Open {
                        onset_t: t,
                        peak_t: t,
                        peak_value: filtered,
                    });
                }
                None
            }
            Some(open) => {
                if filtered < self.thresholds.off {
                    let done = *open;
                    self.open = None;
                    self.finish(done, t)
                } else {
                    if filtered > open.peak_value {
                        open.peak_value = filtered;
                        open.peak_t = t;
                    }
                    None
                }
            }
        }
    }

    /// Closes a still-open event at the last sample time.
    pub fn flush(&mut self) -> Option<ContactEvent> {
        let open = self.open.take()?;
        let t = self.last_t.unwrap_or(open.onset_t);
        self.finish(open, t)
    }

    fn finish(&self, open: Open, release_t: f64) -> Option<ContactEvent> {
        (release_t - open.onset_t >= self.thresholds.min_duration).then(|| ContactEvent {
            horn_id: self.horn_id.clone(),
            onset_t: open.onset_t,
            peak_t: open.peak_t,
            peak_value: open.peak_value,
            release_t,
        })
    }
}

/// Batch detection over a finished series. An event still open at the end of
/// the series is closed at the final sample.
pub fn detect_contact_events(
    horn_id: &str,
    series: &[SensorSample],
    thresholds: Thresholds,
) -> Result<Vec<ContactEvent>, SensingError> {
    if let Some(i) = series.windows(2).position(|w| !(w[1].t > w[0].t)) {
        return Err(SensingError::UnorderedSamples(i + 1));
    }
    let mut det = EventDetector::new(horn_id, thresholds)?;
    let mut events: Vec<ContactEvent> = series.iter().filter_map(|s| det.push(s.t, s.filtered)).collect();
    events.extend(det.flush());
    Ok(events)
}
