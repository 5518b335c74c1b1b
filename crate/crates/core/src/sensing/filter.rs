//! Causal Butterworth low-pass filter.
//!
//! The analog prototype is split into second-order sections (plus one
//! first-order section for odd orders). Each section is discretized by
//! impulse invariance and rescaled to unit DC gain, which keeps the digital
//! magnitude close to the analog Butterworth curve well into the stop band at
//! low cutoff-to-sample-rate ratios.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::SensingError;

/// `y[n] = b0 x[n] + b1 x[n-1] - a1 y[n-1] - a2 y[n-2]`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub b0: f64,
    pub b1: f64,
    pub a1: f64,
    pub a2: f64,
    x1: f64,
    y1: f64,
    y2: f64,
}

impl Section {
    fn new(b0: f64, b1: f64, a1: f64, a2: f64) -> Self {
        Self {
            b0,
            b1,
            a1,
            a2,
            x1: 0.0,
            y1: 0.0,
            y2: 0.0,
        }
    }

    fn process(&mut self, x: f64) -> f64 {
        let y = self.b0 * x + self.b1 * self.x1 - self.a1 * self.y1 - self.a2 * self.y2;
        self.x1 = x;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }

    fn reset(&mut self) {
        self.x1 = 0.0;
        self.y1 = 0.0;
        self.y2 = 0.0;
    }

    /// Largest pole magnitude.
    pub fn pole_radius(&self) -> f64 {
        // z^2 + a1 z + a2
        let disc = self.a1 * self.a1 - 4.0 * self.a2;
        if disc < 0.0 {
            self.a2.sqrt()
        } else {
            let r = disc.sqrt();
            ((-self.a1 + r) / 2.0).abs().max(((-self.a1 - r) / 2.0).abs())
        }
    }

    fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1) / (1.0 + self.a1 + self.a2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowPassFilter {
    pub order: usize,
    pub cutoff: f64,
    pub sample_rate: f64,
    pub sections: Vec<Section>,
}

pub fn design_lowpass(order: usize, cutoff: f64, sample_rate: f64) -> Result<LowPassFilter, SensingError> {
    if order == 0 {
        return Err(SensingError::InvalidOrder);
    }
    let nyquist = sample_rate / 2.0;
    if !(cutoff > 0.0 && cutoff < nyquist && sample_rate.is_finite()) {
        return Err(SensingError::InvalidCutoff { cutoff, nyquist });
    }
    let t = 1.0 / sample_rate;
    let wc = 2.0 * PI * cutoff;
    let mut sections = Vec::with_capacity(order.div_ceil(2));
    for k in 0..order / 2 {
        // wc^2 / (s^2 + 2 zeta wc s + wc^2)
        let zeta = ((2 * k + 1) as f64 * PI / (2 * order) as f64).sin();
        let r = (-zeta * wc * t).exp();
        let wd = wc * (1.0 - zeta * zeta).sqrt() * t;
        let a1 = -2.0 * r * wd.cos();
        let a2 = r * r;
        sections.push(Section::new(0.0, 1.0 + a1 + a2, a1, a2));
    }
    if order % 2 == 1 {
        // wc / (s + wc)
        let a1 = -(-wc * t).exp();
        sections.push(Section::new(1.0 + a1, 0.0, a1, 0.0));
    }
    Ok(LowPassFilter {
        order,
        cutoff,
        sample_rate,
        sections,
    })
}

impl LowPassFilter {
    /// One recurrence step.
    pub fn filter_step(&mut self, sample: f64) -> f64 {
        self.sections.iter_mut().fold(sample, |x, s| s.process(x))
    }

    pub fn reset(&mut self) {
        self.sections.iter_mut().for_each(Section::reset);
    }

    pub fn dc_gain(&self) -> f64 {
        self.sections.iter().map(Section::dc_gain).product()
    }

    pub fn is_stable(&self) -> bool {
        self.sections.iter().all(|s| s.pole_radius() < 1.0)
    }

    /// Sum of squared impulse-response samples over `n` steps: the output
    /// variance for unit-variance white input.
    pub fn noise_gain(&self, n: usize) -> f64 {
        let mut f = self.clone();
        f.reset();
        (0..n)
            .map(|i| {
                let y = f.filter_step(if i == 0 { 1.0 } else { 0.0 });
                y * y
            })
            .sum()
    }
}
