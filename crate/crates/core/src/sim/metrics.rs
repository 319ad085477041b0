use serde::{Deserialize, Serialize};

/// Version line written above metrics CSV headers.
pub const METRICS_SCHEMA: &str = "# ecomod metrics v1";

/// Linear-interpolation percentile of ascending `sorted` data, `q` in [0, 1].
/// Zero for empty input.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => 0.0,
        1 => sorted[0],
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Per-run metrics. Customer figures cover requests made inside the
/// measurement window, fleet figures cover edges finished inside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub configuration: u8,
    pub fleet_size: usize,
    pub seed: u64,
    /// Requests made in the window.
    pub requests: usize,
    pub served: usize,
    pub rejected: usize,
    /// Still waiting, assigned or on board when the run stopped.
    pub pending: usize,
    /// Share of window requests served within their wait and delay limits.
    pub served_ratio: f64,
    pub wait_mean: f64,
    pub wait_p25: f64,
    pub wait_p75: f64,
    pub delay_mean: f64,
    pub delay_p25: f64,
    pub delay_p75: f64,
    /// Fuel (g) burnt by the fleet in the window.
    pub fleet_fuel: f64,
    /// Window fuel over customers dropped off in the window.
    pub fuel_per_customer: f64,
    /// Empty distance over total distance in the window.
    pub empty_ratio: f64,
    /// Mean committed customers (assigned or on board) per serving vehicle.
    pub assigned_per_vehicle: f64,
    pub onboard_per_vehicle: f64,
    /// Relative change of fuel per customer against the baseline, when known.
    pub baseline_fuel_delta: Option<f64>,
    /// Served customers (whole run) beyond the wait or delay limit.
    pub violations: usize,
    pub max_occupancy: usize,
    pub total_requests: usize,
    pub total_served: usize,
    pub total_rejected: usize,
    pub total_pending: usize,
    pub total_fuel: f64,
    pub total_distance: f64,
    pub total_empty_distance: f64,
}

impl MetricsReport {
    /// Fills `baseline_fuel_delta` from a baseline run.
    pub fn with_baseline(mut self, baseline: &MetricsReport) -> Self {
        self.baseline_fuel_delta = (baseline.fuel_per_customer > 0.0)
            .then(|| (self.fuel_per_customer - baseline.fuel_per_customer) / baseline.fuel_per_customer);
        self
    }
}

/// Wait and delay summary of a set of served customers.
pub(crate) struct Spread {
    pub mean: f64,
    pub p25: f64,
    pub p75: f64,
}

impl Spread {
    pub fn of(mut xs: Vec<f64>) -> Self {
        xs.sort_by(f64::total_cmp);
        Self { mean: mean(&xs), p25: percentile(&xs, 0.25), p75: percentile(&xs, 0.75) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentiles_interpolate() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&xs, 0.25), 2.0);
        assert_eq!(percentile(&xs, 0.5), 3.0);
        assert_eq!(percentile(&[1.0, 2.0], 0.25), 1.25);
        assert_eq!(percentile(&[], 0.5), 0.0);
        assert_eq!(percentile(&[7.0], 0.9), 7.0);
        let s = Spread::of(vec![4.0, 1.0, 3.0, 2.0]);
        assert!(s.p25 <= s.mean && s.mean <= s.p75);
    }
}
