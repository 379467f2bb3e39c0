//! Sums of nonnegative terms kept in log space.

use num_traits::Float;

/// Accumulates `Σ e^{x_i}` as `(max, Σ e^{x_i - max})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogSum {
    max: f64,
    scaled: f64,
}

impl Default for LogSum {
    fn default() -> Self {
        Self { max: f64::NEG_INFINITY, scaled: 0.0 }
    }
}

impl LogSum {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `e^{log_term}`.
    #[inline]
    pub fn add_log(&mut self, log_term: f64) {
        if log_term == f64::NEG_INFINITY {
            return;
        }
        if log_term <= self.max {
            self.scaled += (log_term - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - log_term).exp() + 1.0;
            self.max = log_term;
        }
    }

    /// Adds `weight · e^{log_scale}` for `weight ≥ 0`.
    #[inline]
    pub fn add_scaled(&mut self, weight: f64, log_scale: f64) {
        if weight > 0.0 {
            self.add_log(weight.ln() + log_scale);
        }
    }

    pub fn merge(&mut self, other: &LogSum) {
        if other.scaled > 0.0 {
            self.add_scaled(other.scaled, other.max);
        }
    }

    /// `ln Σ`; `-∞` for an empty sum.
    pub fn ln(&self) -> f64 {
        if self.scaled > 0.0 {
            self.max + self.scaled.ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn value(&self) -> f64 {
        self.ln().exp()
    }

    pub fn is_zero(&self) -> bool {
        self.scaled == 0.0
    }
}
