//! Small numerical helpers shared by the calculus modules: compensated
//! summation and the per-level trend test used to certify limits.

use serde::{Deserialize, Serialize};

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut acc = Accumulator::new();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

/// Values below this are treated as zero when comparing consecutive levels.
pub const NOISE_FLOOR: f64 = 1e-12;

/// Default tolerance for deterministic paths.
pub const DETERMINISTIC_TOL: f64 = 1e-6;
/// Default tolerance for a single stochastic sample.
pub const STOCHASTIC_TOL: f64 = 5e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendSpec {
    /// Number of trailing levels that must be nonincreasing.
    pub window: usize,
    pub tol: f64,
}

impl TrendSpec {
    pub fn deterministic() -> Self {
        Self {
            window: 3,
            tol: DETERMINISTIC_TOL,
        }
    }

    pub fn stochastic() -> Self {
        Self {
            window: 3,
            tol: STOCHASTIC_TOL,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    /// Checks the trailing `window` values for monotone decrease and the
    /// last one against `tol`.
    pub fn check(&self, values: &[f64]) -> TrendReport {
        if values.len() < self.window || self.window == 0 {
            return TrendReport {
                nonincreasing: false,
                below_tol: false,
                last: values.last().copied(),
                enough_levels: false,
            };
        }
        let tail = &values[values.len() - self.window..];
        let nonincreasing = tail.iter().all(|v| v.is_finite())
            && tail
                .windows(2)
                .all(|w| w[1] <= w[0] || w[1] <= NOISE_FLOOR);
        let last = tail[tail.len() - 1];
        TrendReport {
            nonincreasing,
            below_tol: last.is_finite() && last <= self.tol,
            last: Some(last),
            enough_levels: true,
        }
    }
}

impl Default for TrendSpec {
    fn default() -> Self {
        Self::deterministic()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub nonincreasing: bool,
    pub below_tol: bool,
    pub last: Option<f64>,
    pub enough_levels: bool,
}

impl TrendReport {
    pub fn passed(&self) -> bool {
        self.enough_levels && self.nonincreasing && self.below_tol
    }
}

/// Outcome of a convergence claim.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Converged,
    Inconclusive,
    /// The jump condition fails at the available resolution.
    NoQv,
    /// Computed, but the integrand carries no admissibility witness.
    Unwitnessed,
}

impl Status {
    pub fn from_trend(trend: &TrendReport) -> Self {
        if trend.passed() {
            Status::Converged
        } else {
            Status::Inconclusive
        }
    }
}

/// Maximum absolute value, ignoring an empty slice.
pub fn sup_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut xs = vec![1.0];
        xs.extend(std::iter::repeat(1e-16).take(10_000));
        xs.push(-1.0);
        let naive: f64 = xs.iter().sum();
        assert_eq!(naive, 0.0);
        assert!((compensated_sum(xs) - 1e-12).abs() < 1e-24);
    }

    #[test]
    fn trend_needs_window_levels() {
        let spec = TrendSpec::deterministic();
        assert!(!spec.check(&[0.1, 0.01]).passed());
        assert!(spec.check(&[1e-5, 1e-7, 1e-8]).passed());
        assert!(!spec.check(&[1e-7, 1e-5, 1e-8]).passed());
        assert!(!spec.check(&[1e-3, 1e-4, 1e-5]).passed());
    }

    #[test]
    fn trend_ignores_noise_level_wiggle() {
        let spec = TrendSpec::deterministic();
        assert!(spec.check(&[1e-16, 3e-16, 2e-16]).passed());
    }
}
