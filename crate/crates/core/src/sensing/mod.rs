//! Synthetic tactile sensing: horn deflection to resistance, voltage
//! divider, ADC, low-pass filter and contact-event detection.

pub mod adc;
pub mod chain;
pub mod events;
pub mod filter;
pub mod flex;

pub use adc::{adc_sample, divider_voltage, resistance_from_voltage, AdcConfig};
pub use chain::{SensingSettings, SensorChain};
pub use events::{detect_contact_events, ContactEvent, EventDetector, SensorSample, Thresholds};
pub use filter::{design_lowpass, LowPassFilter};
pub use flex::{
    estimate_force, Branch, FlexSensorModel, FlexSensorParams, ForceCalibration, ForceEstimate, PiecewiseLinear,
};
