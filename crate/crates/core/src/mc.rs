//! Monte Carlo check of quadratic variation along stopping-time partitions.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{Error, Result};
use crate::generate::{generate, Generator, JumpSizes, JumpSpec};
use crate::numeric::{sup_distance, TrendSpec, STOCHASTIC_TOL};
use crate::partition::{lebesgue_partition, oscillation};
use crate::path::{GridPath, TimeGrid};
use crate::quadvar::qv_curve;

fn default_horizon() -> f64 {
    1.0
}

fn default_tol() -> f64 {
    STOCHASTIC_TOL
}

fn default_window() -> usize {
    3
}

fn default_confidence() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McJumps {
    #[serde(default)]
    pub count: Option<usize>,
    #[serde(default)]
    pub intensity: Option<f64>,
    pub sizes: JumpSizes,
}

/// Brownian motion with volatility `sigma`, optionally plus compound jumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McExperiment {
    pub sigma: f64,
    #[serde(default)]
    pub x0: f64,
    #[serde(default)]
    pub jumps: Option<McJumps>,
    pub seeds: Vec<u64>,
    pub n_min: u32,
    pub n_max: u32,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    /// Dyadic level of the sampling grid.
    pub grid_level: u32,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
}

impl McExperiment {
    pub fn validate(&self) -> Result<()> {
        if self.n_min == 0 || self.n_min > self.n_max {
            return Err(Error::LevelRange(self.n_min, self.n_max));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidParameter("no seeds".into()));
        }
        if !(self.sigma >= 0.0) || !(self.tol >= 0.0) || !(self.horizon > 0.0) {
            return Err(Error::InvalidParameter(
                "sigma, tol must be >= 0 and horizon > 0".into(),
            ));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::InvalidParameter("confidence must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn generator(&self, seed: u64) -> Generator {
        let base = Generator::DyadicBrownian {
            seed,
            sigma: self.sigma,
            x0: self.x0,
        };
        match &self.jumps {
            None => base,
            Some(j) => Generator::CompoundJump {
                base: Box::new(base),
                jumps: JumpSpec::Random {
                    seed: seed.wrapping_add(1),
                    count: j.count,
                    intensity: j.intensity,
                    sizes: j.sizes.clone(),
                },
            },
        }
    }

    pub fn levels(&self) -> Vec<u32> {
        (self.n_min..=self.n_max).collect()
    }
}

/// `sigma^2 t + sum of squared declared jumps up to t`.
pub fn target_qv(x: &GridPath, sigma: f64) -> Vec<f64> {
    let mut jumps = 0.0;
    (0..x.len())
        .map(|i| {
            let d = x.jump_x(i);
            jumps += d * d;
            sigma * sigma * x.time(i) + jumps
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    /// `sup_t |[X,X]^{pi_n}_t - target_t|` per level.
    pub errors: Vec<f64>,
    /// `O_T(X, pi_n)` per level.
    pub oscillations: Vec<f64>,
    /// Largest partition gap per level.
    pub max_gaps: Vec<f64>,
    pub oscillation_sum: f64,
    pub passed: bool,
    /// Every gap `<= 1/n` and every `O_T <= 2^-n`.
    pub bounds_hold: bool,
}

pub fn run_seed(exp: &McExperiment, grid: &Arc<TimeGrid>, seed: u64) -> Result<SeedResult> {
    let x = generate(&exp.generator(seed), grid)?;
    let target = target_qv(&x, exp.sigma);
    let horizon = grid.horizon();
    let mut errors = Vec::new();
    let mut oscillations = Vec::new();
    let mut max_gaps = Vec::new();
    let mut bounds_hold = true;
    for n in exp.levels() {
        let p = lebesgue_partition(&x, n)?;
        let curve = qv_curve(&x, &p);
        errors.push(sup_distance(&curve, &target));
        let o = oscillation(&x, &p, horizon)?;
        let gap = p.mesh();
        bounds_hold &= gap <= 1.0 / n as f64 + 1e-12 && o <= 2f64.powi(-(n as i32));
        oscillations.push(o);
        max_gaps.push(gap);
    }
    let trend = TrendSpec {
        window: exp.window,
        tol: exp.tol,
    };
    Ok(SeedResult {
        seed,
        passed: trend.check(&errors).passed(),
        oscillation_sum: oscillations.iter().sum(),
        errors,
        oscillations,
        max_gaps,
        bounds_hold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub seeds: usize,
    pub levels: Vec<u32>,
    pub passed: usize,
    pub pass_fraction: f64,
    /// Exact binomial (Clopper–Pearson) interval for the pass probability.
    pub pass_interval: (f64, f64),
    /// Seed with the largest top-level error.
    pub worst_seed: u64,
    pub per_level_median_error: Vec<f64>,
    pub bounds_fraction: f64,
    pub oscillation_sum: Spread,
    /// `sum_n 2^-n` over the levels.
    pub oscillation_bound: f64,
    pub per_seed: Vec<SeedResult>,
}

/// Clopper–Pearson interval for `k` successes in `n` trials.
pub fn clopper_pearson(k: usize, n: usize, confidence: f64) -> (f64, f64) {
    let alpha = 1.0 - confidence;
    let (k, nf) = (k as f64, n as f64);
    let lo = if k == 0.0 {
        0.0
    } else {
        Beta::new(k, nf - k + 1.0)
            .map(|b| b.inverse_cdf(alpha / 2.0))
            .unwrap_or(0.0)
    };
    let hi = if k == nf {
        1.0
    } else {
        Beta::new(k + 1.0, nf - k)
            .map(|b| b.inverse_cdf(1.0 - alpha / 2.0))
            .unwrap_or(1.0)
    };
    (lo, hi)
}

pub fn run_mc(exp: &McExperiment) -> Result<McSummary> {
    exp.validate()?;
    let grid = Arc::new(TimeGrid::dyadic(exp.horizon, exp.grid_level)?);
    let per_seed = exp
        .seeds
        .par_iter()
        .map(|&s| run_seed(exp, &grid, s))
        .collect::<Result<Vec<_>>>()?;
    let n = per_seed.len();
    let passed = per_seed.iter().filter(|r| r.passed).count();
    let worst_seed = per_seed
        .iter()
        .max_by(|a, b| a.errors.last().unwrap().total_cmp(b.errors.last().unwrap()))
        .map(|r| r.seed)
        .unwrap();
    let levels = exp.levels();
    let per_level_median_error = (0..levels.len())
        .map(|k| median(per_seed.iter().map(|r| r.errors[k]).collect()))
        .collect();
    let sums: Vec<f64> = per_seed.iter().map(|r| r.oscillation_sum).collect();
    let oscillation_sum = Spread {
        min: sums.iter().copied().fold(f64::INFINITY, f64::min),
        median: median(sums.clone()),
        max: sums.iter().copied().fold(0.0, f64::max),
    };
    Ok(McSummary {
        seeds: n,
        oscillation_bound: levels.iter().map(|&l| 2f64.powi(-(l as i32))).sum(),
        levels,
        passed,
        pass_fraction: passed as f64 / n as f64,
        pass_interval: clopper_pearson(passed, n, exp.confidence),
        worst_seed,
        per_level_median_error,
        bounds_fraction: per_seed.iter().filter(|r| r.bounds_hold).count() as f64 / n as f64,
        oscillation_sum,
        per_seed,
    })
}
