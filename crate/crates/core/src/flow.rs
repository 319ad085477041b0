//! Link speed–density–flow relations and their least-squares fit.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FlowError {
    #[error("insufficient data: {0}")]
    InsufficientData(&'static str),
    #[error("fitted speed-density curve increases with density")]
    NonMonotoneFit,
    #[error("invalid speed-density model: {0}")]
    InvalidModel(&'static str),
}

/// Normalized mean speed as a function of density (veh/m/lane).
///
/// Below `rho_critical` the speed follows `alpha2*rho^2 + alpha1*rho + alpha0`,
/// above it the speed is the constant `epsilon`. Values are clamped to
/// `[epsilon, 1]`; the two branches need not meet at `rho_critical`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedDensityModel {
    pub alpha2: f64,
    pub alpha1: f64,
    pub alpha0: f64,
    pub epsilon: f64,
    pub rho_critical: f64,
}

impl Default for SpeedDensityModel {
    fn default() -> Self {
        Self { alpha2: -50.0, alpha1: -10.0, alpha0: 1.0, epsilon: 0.1, rho_critical: 0.06 }
    }
}

impl SpeedDensityModel {
    pub fn new(alpha2: f64, alpha1: f64, alpha0: f64, epsilon: f64, rho_critical: f64) -> Result<Self, FlowError> {
        let m = Self { alpha2, alpha1, alpha0, epsilon, rho_critical };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        if ![self.alpha2, self.alpha1, self.alpha0, self.epsilon, self.rho_critical].iter().all(|v| v.is_finite()) {
            return Err(FlowError::InvalidModel("coefficients must be finite"));
        }
        if self.epsilon <= 0.0 {
            return Err(FlowError::InvalidModel("epsilon must be > 0"));
        }
        if self.rho_critical <= 0.0 {
            return Err(FlowError::InvalidModel("critical density must be > 0"));
        }
        if !(0.9..=1.1).contains(&self.alpha0) {
            return Err(FlowError::InvalidModel("free-flow value must lie in [0.9, 1.1]"));
        }
        Ok(())
    }

    #[inline]
    pub fn polynomial(&self, rho: f64) -> f64 {
        (self.alpha2 * rho + self.alpha1) * rho + self.alpha0
    }

    /// Normalized mean speed at density `rho`.
    pub fn mean_speed(&self, rho: f64) -> f64 {
        if rho >= self.rho_critical {
            self.epsilon
        } else {
            self.polynomial(rho).clamp(self.epsilon, 1.0)
        }
    }

    /// True when the polynomial branch is non-increasing on `[0, rho_critical]`.
    pub fn is_monotone(&self) -> bool {
        // The derivative is linear, so checking both ends suffices.
        let d = |rho: f64| 2.0 * self.alpha2 * rho + self.alpha1;
        d(0.0) <= 1e-9 && d(self.rho_critical) <= 1e-9
    }

    /// Density on the sub-critical branch that produces normalized speed `v`.
    ///
    /// Returns `None` when `v <= epsilon` (congested, not invertible) or no
    /// root lies in `[0, rho_critical]`. Speeds at or above the free-flow value
    /// map to zero density.
    pub fn invert(&self, v: f64) -> Option<f64> {
        if v <= self.epsilon {
            return None;
        }
        if v >= self.alpha0 {
            return Some(0.0);
        }
        let (a, b, c) = (self.alpha2, self.alpha1, self.alpha0 - v);
        let roots: Vec<f64> = if a.abs() < 1e-14 {
            if b.abs() < 1e-300 {
                vec![]
            } else {
                vec![-c / b]
            }
        } else {
            let disc = b * b - 4.0 * a * c;
            if disc < 0.0 {
                vec![]
            } else {
                // Numerically stable quadratic roots.
                let q = -0.5 * (b + b.signum() * disc.sqrt());
                let mut r = vec![q / a];
                if q != 0.0 {
                    r.push(c / q);
                }
                r
            }
        };
        let tol = 1e-12 * self.rho_critical;
        roots
            .into_iter()
            .filter(|&r| r >= -tol && r <= self.rho_critical + tol)
            .map(|r| r.clamp(0.0, self.rho_critical))
            .min_by(|a, b| a.total_cmp(b))
    }

    /// Coefficient of determination of the model on `(rho, v)` samples.
    pub fn r_squared(&self, samples: &[(f64, f64)]) -> f64 {
        let mean = samples.iter().map(|s| s.1).sum::<f64>() / samples.len() as f64;
        let ss_tot: f64 = samples.iter().map(|s| (s.1 - mean).powi(2)).sum();
        let ss_res: f64 = samples.iter().map(|&(r, v)| (v - self.mean_speed(r)).powi(2)).sum();
        1.0 - ss_res / ss_tot
    }
}

/// Flow rate `q = N * rho * v` (veh/s) for `lanes` lanes.
#[inline]
pub fn flow_rate(density: f64, mean_speed: f64, lanes: u32) -> f64 {
    lanes as f64 * density * mean_speed
}

/// Inverse of [`flow_rate`] in the density argument.
pub fn density_from_flow(flow: f64, mean_speed: f64, lanes: u32) -> Option<f64> {
    (mean_speed > 0.0 && lanes > 0).then(|| flow / (lanes as f64 * mean_speed))
}

fn fit_polynomial(samples: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let m = samples.len();
    let a = DMatrix::from_fn(m, 3, |i, j| samples[i].0.powi(2 - j as i32));
    let b = DVector::from_iterator(m, samples.iter().map(|s| s.1));
    let x = a.svd(true, true).solve(&b, 1e-14).ok()?;
    Some((x[0], x[1], x[2]))
}

fn fit_with_threshold(samples: &[(f64, f64)], rho_critical: f64) -> Result<(SpeedDensityModel, f64), FlowError> {
    let (sub, sup): (Vec<_>, Vec<_>) = samples.iter().partition(|s| s.0 < rho_critical);
    if sup.is_empty() {
        return Err(FlowError::InsufficientData("no samples above the critical density"));
    }
    if sub.len() < 3 {
        return Err(FlowError::InsufficientData("fewer than 3 samples below the critical density"));
    }
    let (alpha2, alpha1, alpha0) = fit_polynomial(&sub).ok_or(FlowError::InsufficientData("singular fit"))?;
    let epsilon = sup.iter().map(|s| s.1).sum::<f64>() / sup.len() as f64;
    let model = SpeedDensityModel { alpha2, alpha1, alpha0, epsilon, rho_critical };
    if !model.is_monotone() {
        return Err(FlowError::NonMonotoneFit);
    }
    model.validate()?;
    let sse = sub.iter().map(|&(r, v)| (v - model.polynomial(r)).powi(2)).sum::<f64>()
        + sup.iter().map(|s| (s.1 - epsilon).powi(2)).sum::<f64>();
    Ok((model, sse))
}

/// Fits the two-branch speed-density model to `(rho, normalized speed)`
/// samples.
///
/// With `rho_critical` given, the polynomial is fit by least squares on the
/// samples below it and `epsilon` is the mean of the rest. Otherwise every
/// midpoint between consecutive distinct densities is tried and the split with
/// the lowest total squared error wins (ties go to the smaller density).
/// Candidate fits that increase with density are rejected.
pub fn fit_speed_density(samples: &[(f64, f64)], rho_critical: Option<f64>) -> Result<SpeedDensityModel, FlowError> {
    if samples.len() < 6 {
        return Err(FlowError::InsufficientData("need at least 6 samples"));
    }
    if let Some(rc) = rho_critical {
        return fit_with_threshold(samples, rc).map(|(m, _)| m);
    }
    let mut rhos: Vec<f64> = samples.iter().map(|s| s.0).collect();
    rhos.sort_by(f64::total_cmp);
    rhos.dedup();
    let mut best: Option<(SpeedDensityModel, f64)> = None;
    let mut last_err = FlowError::InsufficientData("samples do not span both regimes");
    for w in rhos.windows(2) {
        let threshold = 0.5 * (w[0] + w[1]);
        match fit_with_threshold(samples, threshold) {
            Ok((model, sse)) => {
                if best.as_ref().is_none_or(|b| sse < b.1) {
                    best = Some((model, sse));
                }
            }
            Err(e @ FlowError::NonMonotoneFit) => last_err = e,
            Err(_) => {}
        }
    }
    best.map(|b| b.0).ok_or(last_err)
}
