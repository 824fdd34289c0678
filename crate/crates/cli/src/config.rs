//! Experiment configs. Every struct rejects unknown keys.

use anyhow::{bail, ensure, Result};
use serde::{Deserialize, Serialize};

use pathcalc::drawdown::FloorFunction;
use pathcalc::equations::Preconditions;
use pathcalc::functions::FunctionSpec;
use pathcalc::mc::McExperiment;
use pathcalc::Generator;

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "one")]
    pub horizon: f64,
    /// Dyadic level of the host grid.
    pub level: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionKindConfig {
    #[default]
    Dyadic,
    Lebesgue,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    #[serde(default)]
    pub kind: PartitionKindConfig,
    /// Inclusive level range `[lo, hi]`.
    pub levels: [u32; 2],
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrendConfig {
    #[serde(default)]
    pub window: Option<usize>,
    #[serde(default)]
    pub tol: Option<f64>,
}

/// Integrand or forcing term: `grad_x f(A, X)` with a witness, or a bare path.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum IntegrandConfig {
    Witnessed {
        function: FunctionSpec,
        #[serde(default)]
        a: Option<Generator>,
    },
    Raw {
        path: Generator,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expect {
    pub value: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QvConfig {
    pub grid: GridConfig,
    pub partition: PartitionConfig,
    #[serde(default)]
    pub trend: Option<TrendConfig>,
    #[serde(default)]
    pub t: Option<f64>,
    pub path: Generator,
    /// Second path for a covariation.
    #[serde(default)]
    pub other: Option<Generator>,
    #[serde(default = "yes")]
    pub measure_check: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrateConfig {
    pub grid: GridConfig,
    pub partition: PartitionConfig,
    #[serde(default)]
    pub trend: Option<TrendConfig>,
    #[serde(default)]
    pub t: Option<f64>,
    pub x: Generator,
    pub integrand: IntegrandConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItoConfig {
    pub grid: GridConfig,
    pub partition: PartitionConfig,
    #[serde(default)]
    pub trend: Option<TrendConfig>,
    #[serde(default)]
    pub t: Option<f64>,
    pub x: Generator,
    pub function: FunctionSpec,
    #[serde(default)]
    pub a: Option<Generator>,
    /// Bound on every per-level residual.
    #[serde(default)]
    pub max_residual: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssocConfig {
    pub grid: GridConfig,
    pub partition: PartitionConfig,
    #[serde(default)]
    pub trend: Option<TrendConfig>,
    #[serde(default)]
    pub t: Option<f64>,
    pub x: Generator,
    pub function: FunctionSpec,
    #[serde(default)]
    pub a: Option<Generator>,
    /// Outer integrand; defaults to the integral path `Y` itself.
    #[serde(default)]
    pub eta: Option<Generator>,
    #[serde(default)]
    pub max_gap: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionConfig {
    pub xi: Generator,
    pub a: Generator,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearConfig {
    pub grid: GridConfig,
    pub partition: PartitionConfig,
    #[serde(default)]
    pub trend: Option<TrendConfig>,
    #[serde(default)]
    pub t: Option<f64>,
    pub x: Generator,
    pub forcing: IntegrandConfig,
    #[serde(default)]
    pub decomposition: Option<DecompositionConfig>,
    /// Expected `Z_t` at the top level.
    #[serde(default)]
    pub expect: Option<Expect>,
    /// Bound on the disagreement of the two solution expressions.
    #[serde(default)]
    pub agreement_tol: Option<f64>,
}

/// Built-in drifts `f(t, z)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Drift {
    /// `a + b z`.
    Linear { a: f64, b: f64 },
    /// `c z^2`.
    Quadratic { c: f64 },
    /// `c sin(z)`.
    Sine { c: f64 },
    /// `r z (1 - z / k)`.
    Logistic { r: f64, k: f64 },
}

impl Drift {
    pub fn eval(&self, _t: f64, z: f64) -> f64 {
        match *self {
            Drift::Linear { a, b } => a + b * z,
            Drift::Quadratic { c } => c * z * z,
            Drift::Sine { c } => c * z.sin(),
            Drift::Logistic { r, k } => r * z * (1.0 - z / k),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearConfig {
    pub grid: GridConfig,
    pub partition: PartitionConfig,
    #[serde(default)]
    pub trend: Option<TrendConfig>,
    #[serde(default)]
    pub t: Option<f64>,
    pub x: Generator,
    pub drift: Drift,
    pub z0: f64,
    #[serde(default = "undeclared")]
    pub preconditions: Preconditions,
    #[serde(default)]
    pub spot_radius: Option<f64>,
    #[serde(default)]
    pub expect: Option<Expect>,
}

fn undeclared() -> Preconditions {
    Preconditions::Undeclared
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrawdownConfig {
    pub grid: GridConfig,
    pub partition: PartitionConfig,
    #[serde(default)]
    pub trend: Option<TrendConfig>,
    #[serde(default)]
    pub t: Option<f64>,
    pub x: Generator,
    pub floor: FloorFunction,
    /// Starting value of the constrained path; defaults to `X_0`.
    #[serde(default)]
    pub a_star: Option<f64>,
    #[serde(default = "round_trip_tol")]
    pub round_trip_tol: f64,
}

fn round_trip_tol() -> f64 {
    1e-6
}

/// Discounted floor multiplier `L`: a constant or an FV path.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FloorConfig {
    Constant(f64),
    Path(Generator),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MultiplierConfig {
    Constant(f64),
    Witnessed(WitnessedMultiplier),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessedMultiplier {
    pub function: FunctionSpec,
    #[serde(default)]
    pub a: Option<Generator>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InsuranceConfig {
    pub grid: GridConfig,
    pub partition: PartitionConfig,
    #[serde(default)]
    pub trend: Option<TrendConfig>,
    #[serde(default)]
    pub t: Option<f64>,
    /// Risky asset price.
    pub s: Generator,
    /// Riskless asset price; defaults to 1.
    #[serde(default)]
    pub b: Option<Generator>,
    pub floor: FloorConfig,
    pub multiplier: MultiplierConfig,
    #[serde(default = "one")]
    pub v0: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub experiment: McExperiment,
    #[serde(default = "min_pass_fraction")]
    pub min_pass_fraction: f64,
}

fn min_pass_fraction() -> f64 {
    0.9
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    pub grid: GridConfig,
    pub partition: PartitionConfig,
    #[serde(default)]
    pub trend: Option<TrendConfig>,
    #[serde(default)]
    pub t: Option<f64>,
    /// Integrand.
    pub f: Generator,
    /// Atoms `(time, weight)` of the limit measure; times must be grid times.
    pub atoms: Vec<(f64, f64)>,
    /// Bound on the top-level error.
    #[serde(default)]
    pub tol: Option<f64>,
}

pub fn check_tol(name: &str, v: Option<f64>) -> Result<()> {
    if let Some(v) = v {
        ensure!(v >= 0.0 && v.is_finite(), "{name} must be a finite number >= 0, got {v}");
    }
    Ok(())
}

/// Parses `a..b` (inclusive).
pub fn parse_levels(s: &str) -> Result<[u32; 2]> {
    let Some((a, b)) = s.split_once("..") else {
        bail!("levels must look like a..b, got {s:?}");
    };
    let a: u32 = a.trim().parse()?;
    let b: u32 = b.trim().trim_start_matches('=').parse()?;
    ensure!(a >= 1 && a <= b, "level range {a}..{b} must satisfy 1 <= a <= b");
    Ok([a, b])
}
