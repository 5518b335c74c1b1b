//! Flex-sensor forward model: deflection to calibrated resistance offset,
//! with loading/unloading hysteresis, first-order creep and additive noise.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::SensingError;

/// Deflection-rate dead band for branch switching, m/s.
pub const BRANCH_RATE_EPS: f64 = 1e-4;

/// Strictly increasing piecewise-linear map through its knots.
///
/// Beyond the last knot the final segment is extended; below the first knot
/// the first segment is extended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self, SensingError> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(SensingError::InvalidTable(
                "need at least two knots with matching lengths".into(),
            ));
        }
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]) && v.iter().all(|x| x.is_finite());
        if !increasing(&xs) || !increasing(&ys) {
            return Err(SensingError::InvalidTable(
                "knots must be finite and strictly increasing in both coordinates".into(),
            ));
        }
        Ok(Self { xs, ys })
    }

    /// Tabulates `f` on `n` evenly spaced knots over `[x0, x1]`.
    pub fn sample<F: Fn(f64) -> f64>(f: F, x0: f64, x1: f64, n: usize) -> Result<Self, SensingError> {
        let n = n.max(2);
        let xs: Vec<f64> = (0..n).map(|i| x0 + (x1 - x0) * i as f64 / (n - 1) as f64).collect();
        let ys = xs.iter().map(|&x| f(x)).collect();
        Self::new(xs, ys)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, SensingError> {
        Self::new(self.xs.clone(), self.ys.iter().map(|y| y * factor).collect())
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    pub fn y_range(&self) -> (f64, f64) {
        (self.ys[0], *self.ys.last().unwrap())
    }

    fn segment(v: &[f64], value: f64) -> usize {
        // index i such that v[i] <= value < v[i+1], clamped to valid segments
        let i = v.partition_point(|&k| k <= value);
        i.saturating_sub(1).min(v.len() - 2)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = Self::segment(&self.xs, x);
        let (x0, x1, y0, y1) = (self.xs[i], self.xs[i + 1], self.ys[i], self.ys[i + 1]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// Solves `eval(x) = y` by bisection on the knots, then exactly within
    /// the bracketing segment.
    pub fn inverse(&self, y: f64) -> f64 {
        let (mut lo, mut hi) = (0usize, self.ys.len() - 1);
        if y <= self.ys[0] {
            hi = 1;
        } else if y >= self.ys[hi] {
            lo = hi - 1;
        } else {
            while hi - lo > 1 {
                let mid = (lo + hi) / 2;
                if self.ys[mid] <= y {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        let (x0, x1, y0, y1) = (self.xs[lo], self.xs[hi], self.ys[lo], self.ys[hi]);
        x0 + (x1 - x0) * (y - y0) / (y1 - y0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Loading,
    Unloading,
}

/// Parameters of the synthetic flex-sensor model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlexSensorParams {
    /// Resistance at the unbent neutral state, Ohm.
    pub neutral_resistance: f64,
    /// Loading-branch offset at `reference_deflection`, Ohm.
    pub full_scale_offset: f64,
    /// m
    pub reference_deflection: f64,
    /// Shape exponent of the loading branch.
    pub exponent: f64,
    /// Unloading branch as a multiple of the loading branch.
    pub unloading_ratio: f64,
    /// Ohm per (N s) of per-horn load.
    pub creep_gain: f64,
    /// s
    pub creep_decay_tau: f64,
    /// Ohm, per sample.
    pub noise_sigma: f64,
}

impl Default for FlexSensorParams {
    fn default() -> Self {
        Self {
            neutral_resistance: 10_000.0,
            full_scale_offset: 3000.0,
            reference_deflection: 0.03,
            exponent: 1.5,
            unloading_ratio: 1.15,
            creep_gain: 2.0,
            creep_decay_tau: 4.0,
            noise_sigma: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlexSensorModel {
    pub neutral_resistance: f64,
    pub loading_branch: PiecewiseLinear,
    pub unloading_branch: PiecewiseLinear,
    pub creep_gain: f64,
    pub creep_decay_tau: f64,
    pub noise_sigma: f64,
    pub branch_state: Branch,
    pub creep_state: f64,
}

impl FlexSensorModel {
    /// Branch tables tabulated on 0..2x the reference deflection.
    pub fn from_params(p: &FlexSensorParams) -> Result<Self, SensingError> {
        if !(p.reference_deflection > 0.0 && p.full_scale_offset > 0.0 && p.exponent > 0.0) {
            return Err(SensingError::InvalidTable(
                "reference deflection, full-scale offset and exponent must be positive".into(),
            ));
        }
        if p.unloading_ratio < 1.0 {
            return Err(SensingError::InvalidTable(
                "unloading branch must not sit below the loading branch".into(),
            ));
        }
        if p.creep_decay_tau <= 0.0 || p.creep_gain < 0.0 || p.noise_sigma < 0.0 {
            return Err(SensingError::InvalidTable(
                "creep tau must be positive; creep gain and noise sigma non-negative".into(),
            ));
        }
        let loading = PiecewiseLinear::sample(
            |d| p.full_scale_offset * (d / p.reference_deflection).powf(p.exponent),
            0.0,
            2.0 * p.reference_deflection,
            61,
        )?;
        let unloading = loading.scaled(p.unloading_ratio)?;
        Ok(Self {
            neutral_resistance: p.neutral_resistance,
            loading_branch: loading,
            unloading_branch: unloading,
            creep_gain: p.creep_gain,
            creep_decay_tau: p.creep_decay_tau,
            noise_sigma: p.noise_sigma,
            branch_state: Branch::Loading,
            creep_state: 0.0,
        })
    }

    pub fn branch_table(&self, branch: Branch) -> &PiecewiseLinear {
        match branch {
            Branch::Loading => &self.loading_branch,
            Branch::Unloading => &self.unloading_branch,
        }
    }

    /// Advances the model by `dt` and returns the calibrated resistance offset
    /// (Ohm above neutral).
    ///
    /// `load` is the normal force on this horn, N. The creep state follows
    /// `dc/dt = creep_gain * load - c / tau`, integrated exactly for a load
    /// held over the step.
    pub fn deflection_to_resistance<R: Rng + ?Sized>(
        &mut self,
        deflection: f64,
        deflection_rate: f64,
        load: f64,
        dt: f64,
        rng: &mut R,
    ) -> Result<f64, SensingError> {
        if !(deflection >= 0.0) {
            return Err(SensingError::NegativeDeflection(deflection));
        }
        if !(dt > 0.0) {
            return Err(SensingError::InvalidStep(dt));
        }
        if deflection_rate > BRANCH_RATE_EPS {
            self.branch_state = Branch::Loading;
        } else if deflection_rate < -BRANCH_RATE_EPS {
            self.branch_state = Branch::Unloading;
        }

        let decay = (-dt / self.creep_decay_tau).exp();
        let drive = self.creep_gain * load.max(0.0) * self.creep_decay_tau;
        self.creep_state = self.creep_state * decay + drive * (1.0 - decay);

        let base = if deflection > 0.0 {
            self.branch_table(self.branch_state).eval(deflection)
        } else {
            0.0
        };
        let noise = if self.noise_sigma > 0.0 {
            Normal::new(0.0, self.noise_sigma)
                .expect("sigma validated non-negative")
                .sample(rng)
        } else {
            0.0
        };
        Ok(base + self.creep_state + noise)
    }

    /// Deflection implied by a calibrated resistance offset on one branch.
    pub fn estimate_deflection(&self, resistance: f64, branch: Branch) -> f64 {
        self.branch_table(branch).inverse(resistance.max(0.0)).max(0.0)
    }
}

/// Force-to-resistance calibration tables, one per hysteresis branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceCalibration {
    pub loading: PiecewiseLinear,
    pub unloading: PiecewiseLinear,
}

/// Per-horn maximum calibration load, N.
pub const MAX_CALIBRATION_FORCE: f64 = 2.5;

impl ForceCalibration {
    /// Synthetic calibration: a horn of stiffness `horn_stiffness` (N/m)
    /// loaded from 0 to `MAX_CALIBRATION_FORCE`, read through the model's
    /// branches.
    pub fn synthetic(model: &FlexSensorModel, horn_stiffness: f64, knots: usize) -> Result<Self, SensingError> {
        let table = |branch: Branch| {
            let b = model.branch_table(branch);
            PiecewiseLinear::sample(|f| b.eval(f / horn_stiffness), 0.0, MAX_CALIBRATION_FORCE, knots)
        };
        Ok(Self {
            loading: table(Branch::Loading)?,
            unloading: table(Branch::Unloading)?,
        })
    }

    pub fn table(&self, branch: Branch) -> &PiecewiseLinear {
        match branch {
            Branch::Loading => &self.loading,
            Branch::Unloading => &self.unloading,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceEstimate {
    /// N
    pub force: f64,
    /// The resistance fell outside the calibrated range and was clamped.
    pub extrapolated: bool,
}

pub fn estimate_force(
    calibration: &ForceCalibration,
    resistance: f64,
    branch: Branch,
) -> Result<ForceEstimate, SensingError> {
    if !(resistance >= 0.0) {
        return Err(SensingError::NegativeResistance(resistance));
    }
    let table = calibration.table(branch);
    let (r_min, r_max) = table.y_range();
    let (f_min, f_max) = table.x_range();
    if resistance > r_max {
        return Ok(ForceEstimate {
            force: f_max,
            extrapolated: true,
        });
    }
    if resistance < r_min {
        return Ok(ForceEstimate {
            force: f_min,
            extrapolated: true,
        });
    }
    Ok(ForceEstimate {
        force: table.inverse(resistance),
        extrapolated: false,
    })
}
