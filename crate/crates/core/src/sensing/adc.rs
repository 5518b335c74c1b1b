//! Voltage divider and ADC quantizer.
//!
//! The flex sensor sits on the top leg of the divider and the fixed resistor
//! on the bottom leg, so the measured voltage falls as the sensor bends.

use serde::{Deserialize, Serialize};

use crate::error::SensingError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdcConfig {
    pub bits: u32,
    /// Programmable full-scale range, V.
    pub full_scale: f64,
    /// Hz
    pub sample_rate: f64,
    /// Divider supply, V.
    pub v_in: f64,
    /// Fixed divider resistance, Ohm.
    pub r_fixed: f64,
}

impl Default for AdcConfig {
    fn default() -> Self {
        Self {
            bits: 12,
            full_scale: 4.096,
            sample_rate: 50.0,
            v_in: 3.3,
            r_fixed: 47_000.0,
        }
    }
}

impl AdcConfig {
    pub fn validate(&self) -> Result<(), SensingError> {
        if !(2..=24).contains(&self.bits) {
            return Err(SensingError::InvalidAdc(format!("unsupported bit depth {}", self.bits)));
        }
        if !(self.full_scale > self.v_in && self.v_in > 0.0) {
            return Err(SensingError::InvalidAdc(
                "full scale must exceed the divider supply".into(),
            ));
        }
        if !(self.sample_rate > 0.0 && self.r_fixed > 0.0) {
            return Err(SensingError::InvalidAdc(
                "sample rate and fixed resistance must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Single-ended input: one bit is spent on the sign.
    pub fn lsb(&self) -> f64 {
        self.full_scale / f64::from(1u32 << (self.bits - 1))
    }

    pub fn max_code(&self) -> u32 {
        (1u32 << (self.bits - 1)) - 1
    }

    /// Mid-point reconstruction of a code.
    pub fn code_to_voltage(&self, code: u32) -> f64 {
        (f64::from(code) + 0.5) * self.lsb()
    }

    /// Resistance change per code step around `r_flex`, Ohm.
    pub fn resistance_per_code(&self, r_flex: f64) -> f64 {
        let total = self.r_fixed + r_flex;
        self.lsb() * total * total / (self.v_in * self.r_fixed)
    }
}

pub fn divider_voltage(r_flex: f64, cfg: &AdcConfig) -> Result<f64, SensingError> {
    if !(r_flex >= 0.0) {
        return Err(SensingError::NegativeResistance(r_flex));
    }
    Ok(cfg.v_in * cfg.r_fixed / (cfg.r_fixed + r_flex))
}

/// Flex resistance from the measured divider voltage:
/// `R_flex = R_fixed (V_in - V_measure) / V_measure`.
pub fn resistance_from_voltage(v_measure: f64, cfg: &AdcConfig) -> Result<f64, SensingError> {
    if !(v_measure > 0.0 && v_measure <= cfg.v_in) {
        return Err(SensingError::OpenCircuit(v_measure));
    }
    Ok(cfg.r_fixed * (cfg.v_in - v_measure) / v_measure)
}

pub fn adc_sample(v: f64, cfg: &AdcConfig) -> u32 {
    if !(v > 0.0) {
        return 0;
    }
    // absorb representation error so exact multiples of the lsb land on their code
    let code = (v / cfg.lsb() + 1e-9).floor();
    if code >= f64::from(cfg.max_code()) {
        cfg.max_code()
    } else {
        code as u32
    }
}
