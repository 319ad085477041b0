//! Parametric fuel-rate surrogate used for every fuel edge cost.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FuelError {
    #[error("speed must be > 0, got {0}")]
    NonPositiveSpeed(f64),
    #[error("length must be >= 0, got {0}")]
    NegativeLength(f64),
    #[error("invalid fuel coefficients: {0}")]
    InvalidCoefficients(&'static str),
}

/// Per-meter fuel rate `f(v) = a/v + b + c*v^2` (g/m, v in m/s).
///
/// The `a/v` term is idle consumption spread over the distance covered, `c*v^2`
/// is aerodynamic drag. With `a, c > 0` the rate has a single minimum at
/// `v* = (a / 2c)^(1/3)`, about 18 m/s for the defaults, so slow congested
/// links and very fast links both cost more fuel per meter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuelModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Default for FuelModel {
    fn default() -> Self {
        Self { a: 0.3, b: 0.04, c: 2.5e-5 }
    }
}

impl FuelModel {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self, FuelError> {
        if [a, b, c].iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(FuelError::InvalidCoefficients("coefficients must be finite and >= 0"));
        }
        if a == 0.0 && b == 0.0 {
            return Err(FuelError::InvalidCoefficients("fuel rate must be positive at every speed"));
        }
        Ok(Self { a, b, c })
    }

    /// Fuel per meter at constant speed `v`.
    #[inline]
    pub fn fuel_rate(&self, v: f64) -> f64 {
        self.a / v + self.b + self.c * v * v
    }

    /// Speed minimizing fuel per meter, when the model has an interior minimum.
    pub fn optimal_speed(&self) -> Option<f64> {
        (self.a > 0.0 && self.c > 0.0).then(|| (self.a / (2.0 * self.c)).cbrt())
    }
}

/// Fuel (g) to drive `length` meters at `speed` m/s.
pub fn edge_fuel(model: &FuelModel, length: f64, speed: f64) -> Result<f64, FuelError> {
    if !(speed > 0.0) {
        return Err(FuelError::NonPositiveSpeed(speed));
    }
    if length < 0.0 {
        return Err(FuelError::NegativeLength(length));
    }
    Ok(length * model.fuel_rate(speed))
}
