//! One horn's complete sensing chain, sampled on the sensor clock:
//! flex model, divider, ADC, baseline subtraction, low-pass filter and the
//! streaming event detector.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adc::{adc_sample, divider_voltage, resistance_from_voltage, AdcConfig};
use super::events::{ContactEvent, EventDetector, SensorSample, Thresholds};
use super::filter::{design_lowpass, LowPassFilter};
use super::flex::{FlexSensorModel, FlexSensorParams};
use crate::error::SensingError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensingSettings {
    pub flex: FlexSensorParams,
    pub adc: AdcConfig,
    pub filter_order: usize,
    /// Hz
    pub cutoff: f64,
    /// Neutral-reading window at start-up used to estimate the baseline, s.
    pub baseline_window: f64,
    /// Absolute on/off thresholds, Ohm. When unset they follow from the
    /// filtered noise level.
    pub on_threshold: Option<f64>,
    pub off_threshold: Option<f64>,
    pub on_factor: f64,
    pub off_factor: f64,
    /// s
    pub min_duration: f64,
}

impl Default for SensingSettings {
    fn default() -> Self {
        Self {
            flex: FlexSensorParams::default(),
            adc: AdcConfig::default(),
            filter_order: 2,
            cutoff: 0.8,
            baseline_window: 0.5,
            on_threshold: None,
            off_threshold: None,
            on_factor: 5.0,
            off_factor: 2.5,
            min_duration: 0.06,
        }
    }
}

impl SensingSettings {
    pub fn noise_off(mut self) -> Self {
        self.flex.noise_sigma = 0.0;
        self
    }

    pub fn sample_period(&self) -> f64 {
        1.0 / self.adc.sample_rate
    }

    /// Standard deviation of the filtered channel at rest: sensor noise plus
    /// uniform quantization noise at the neutral resistance, shaped by the
    /// filter's white-noise gain.
    pub fn filtered_noise_sigma(&self, filter: &LowPassFilter) -> f64 {
        let per_code = self.adc.resistance_per_code(self.flex.neutral_resistance);
        let raw = self.flex.noise_sigma.powi(2) + per_code * per_code / 12.0;
        (raw * filter.noise_gain(4096)).sqrt()
    }

    pub fn thresholds(&self, filter: &LowPassFilter) -> Thresholds {
        let sigma = self.filtered_noise_sigma(filter);
        Thresholds {
            on: self.on_threshold.unwrap_or(self.on_factor * sigma),
            off: self.off_threshold.unwrap_or(self.off_factor * sigma),
            min_duration: self.min_duration,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SensorChain {
    horn_id: String,
    model: FlexSensorModel,
    adc: AdcConfig,
    filter: LowPassFilter,
    rng: ChaCha8Rng,
    period: f64,
    baseline_samples: usize,
    baseline_sum: f64,
    baseline_seen: usize,
    baseline: Option<f64>,
    detector: EventDetector,
    events: Vec<ContactEvent>,
}

impl SensorChain {
    /// `stream` separates the noise sequences of horns sharing one seed.
    pub fn new(horn_id: &str, settings: &SensingSettings, seed: u64, stream: u64) -> Result<Self, SensingError> {
        settings.adc.validate()?;
        let model = FlexSensorModel::from_params(&settings.flex)?;
        let filter = design_lowpass(settings.filter_order, settings.cutoff, settings.adc.sample_rate)?;
        let detector = EventDetector::new(horn_id, settings.thresholds(&filter))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let period = settings.sample_period();
        Ok(Self {
            horn_id: horn_id.to_string(),
            model,
            adc: settings.adc,
            filter,
            rng,
            period,
            baseline_samples: ((settings.baseline_window / period).round() as usize).max(1),
            baseline_sum: 0.0,
            baseline_seen: 0,
            baseline: None,
            detector,
            events: Vec::new(),
        })
    }

    pub fn horn_id(&self) -> &str {
        &self.horn_id
    }

    pub fn thresholds(&self) -> Thresholds {
        self.detector.thresholds()
    }

    pub fn baseline(&self) -> Option<f64> {
        self.baseline
    }

    /// The detector currently reports contact.
    pub fn in_event(&self) -> bool {
        self.detector.is_open()
    }

    pub fn events(&self) -> &[ContactEvent] {
        &self.events
    }

    /// Takes one sample. `load` is the normal force on one physical horn, N.
    pub fn sample(
        &mut self,
        t: f64,
        deflection: f64,
        deflection_rate: f64,
        load: f64,
    ) -> Result<SensorSample, SensingError> {
        let offset =
            self.model
                .deflection_to_resistance(deflection, deflection_rate, load, self.period, &mut self.rng)?;
        let r_true = (self.model.neutral_resistance + offset).max(0.0);
        let v = divider_voltage(r_true, &self.adc)?;
        let code = adc_sample(v, &self.adc);
        let v_measure = self.adc.code_to_voltage(code).min(self.adc.v_in);
        let resistance = resistance_from_voltage(v_measure, &self.adc)?;

        let filtered = match self.baseline {
            Some(base) => {
                let y = self.filter.filter_step(resistance - base);
                if let Some(ev) = self.detector.push(t, y) {
                    self.events.push(ev);
                }
                y
            }
            None => {
                self.baseline_sum += resistance;
                self.baseline_seen += 1;
                if self.baseline_seen >= self.baseline_samples {
                    self.baseline = Some(self.baseline_sum / self.baseline_seen as f64);
                }
                0.0
            }
        };
        Ok(SensorSample {
            t,
            code,
            resistance,
            filtered,
        })
    }

    /// Closes any open event and returns all detected events.
    pub fn finish(mut self) -> Vec<ContactEvent> {
        if let Some(ev) = self.detector.flush() {
            self.events.push(ev);
        }
        self.events
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quiet_chain_stays_at_zero() {
        let settings = SensingSettings::default().noise_off();
        let mut chain = SensorChain::new("upper", &settings, 1, 0).unwrap();
        for i in 0..500 {
            let s = chain.sample(i as f64 * 0.02, 0.0, 0.0, 0.0).unwrap();
            assert_eq!(s.filtered, 0.0);
        }
        assert!(chain.finish().is_empty());
    }

    #[test]
    fn press_produces_one_event() {
        let settings = SensingSettings::default();
        let mut chain = SensorChain::new("upper", &settings, 5, 0).unwrap();
        let mut t = 0.0;
        for i in 0..400 {
            // 0.2 s press of 2 cm starting at 4 s
            let d = if (200..210).contains(&i) { 0.02 } else { 0.0 };
            chain.sample(t, d, 0.0, 0.0).unwrap();
            t += 0.02;
        }
        let events = chain.finish();
        assert_eq!(events.len(), 1);
        assert!(events[0].onset_t >= 4.0);
    }

    #[test]
    fn identical_seeds_identical_samples() {
        let settings = SensingSettings::default();
        let run = |seed| {
            let mut c = SensorChain::new("lower", &settings, seed, 1).unwrap();
            (0..200)
                .map(|i| c.sample(i as f64 * 0.02, 0.001 * (i % 7) as f64, 0.0, 0.5).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(9), run(9));
    }

    #[test]
    fn thresholds_follow_noise() {
        let settings = SensingSettings::default();
        let filter = design_lowpass(2, 0.8, 50.0).unwrap();
        let th = settings.thresholds(&filter);
        assert!((th.on - 2.0 * th.off).abs() < 1e-12);
        let quiet = settings.clone().noise_off().thresholds(&filter);
        assert!(quiet.on < th.on);
    }
}
