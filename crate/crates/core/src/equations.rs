//! Linear and nonlinear integral equations driven by a path `X`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integral::{riemann_path, riemann_sum, AdmissibleIntegrand, Convention};
use crate::numeric::{sup_distance, Accumulator, Status, TrendReport, TrendSpec};
use crate::partition::PartitionSequence;
use crate::path::{check_same_grid, same_grid, FvPath, GridPath};
use crate::quadvar::{qv_sequence_with, stieltjes_left, QvResult};

/// Values beyond this magnitude count as a blow-up.
pub const BLOW_UP: f64 = 1e100;

/// `E(X)` on the grid with its two factors.
#[derive(Debug, Clone)]
pub struct StochasticExponential {
    pub x: GridPath,
    /// Declared jumps are `E(X)_{t-} dX_t`.
    pub path: GridPath,
    /// `X_t - X_0 - [X,X]^c_t / 2`.
    pub exponent: Vec<f64>,
    /// `prod_{s <= t} (1 + dX_s) exp(-dX_s)`.
    pub jump_product: Vec<f64>,
    /// `[X,X]^c` used in the exponent.
    pub qv_continuous: Vec<f64>,
    /// First time a jump of size -1 occurs.
    pub zero_hit: Option<f64>,
    /// All jumps exceed -1.
    pub positive: bool,
}

impl StochasticExponential {
    pub fn value(&self, i: usize) -> f64 {
        self.path.x(i)
    }

    pub fn left(&self, i: usize) -> f64 {
        self.path.left_x(i)
    }
}

fn require_qv(qv: &QvResult) -> Result<()> {
    match qv.status {
        Status::Converged => Ok(()),
        Status::NoQv => Err(Error::QvUnavailable(
            "jump condition fails at the top level".into(),
        )),
        _ => Err(Error::QvUnavailable(format!(
            "trend test inconclusive (last gap {:?})",
            qv.trend.last
        ))),
    }
}

pub fn doleans_exponential(
    x: &GridPath,
    seq: &PartitionSequence,
    trend: &TrendSpec,
) -> Result<StochasticExponential> {
    x.expect_scalar()?;
    let qv = qv_sequence_with(x, seq, trend)?;
    require_qv(&qv)?;
    exponential_from_qv(x, &qv)
}

/// The closed form from an already computed `[X,X]`; only a failed jump
/// condition is rejected.
pub fn exponential_from_qv(x: &GridPath, qv: &QvResult) -> Result<StochasticExponential> {
    x.expect_scalar()?;
    if qv.status == Status::NoQv {
        return Err(Error::QvUnavailable(
            "jump condition fails at the top level".into(),
        ));
    }
    let c = qv.continuous_part.clone();
    let n = x.len();
    let x0 = x.x(0);
    let mut exponent = Vec::with_capacity(n);
    let mut jump_product = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    let mut jumps = BTreeMap::new();
    let mut prod = 1.0;
    let mut zero_hit = None;
    let mut positive = true;
    for i in 0..n {
        let e = x.x(i) - x0 - 0.5 * c[i];
        let dx = x.jump_x(i);
        let before = prod;
        if dx != 0.0 {
            if dx == -1.0 && zero_hit.is_none() {
                zero_hit = Some(x.time(i));
            }
            positive &= dx > -1.0;
            prod *= (1.0 + dx) * (-dx).exp();
        }
        let v = e.exp() * prod;
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("exponential at t = {}", x.time(i))));
        }
        if dx != 0.0 {
            let left = (e - dx).exp() * before;
            jumps.insert(i, vec![v - left]);
        }
        exponent.push(e);
        jump_product.push(prod);
        values.push(v);
    }
    let path = GridPath::new(x.grid().clone(), 1, values, jumps)?
        .with_finite_variation(x.is_finite_variation());
    Ok(StochasticExponential {
        x: x.clone(),
        path,
        exponent,
        jump_product,
        qv_continuous: c,
        zero_hit,
        positive,
    })
}

/// Per-level substitution residuals of an equation at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquationResidual {
    pub t: f64,
    pub levels: Vec<u32>,
    pub residuals: Vec<f64>,
    pub trend: TrendReport,
    pub status: Status,
}

impl EquationResidual {
    fn from_values(t: f64, seq: &PartitionSequence, residuals: Vec<f64>, trend: &TrendSpec) -> Self {
        let abs: Vec<f64> = residuals.iter().map(|r| r.abs()).collect();
        let report = trend.check(&abs);
        Self {
            t,
            levels: seq.levels().to_vec(),
            residuals,
            trend: report,
            status: Status::from_trend(&report),
        }
    }
}

/// `Z_t - H_t - int_0^t Z_{s-} dX_s` along every level.
pub fn linear_residual(
    z: &GridPath,
    h: &GridPath,
    x: &GridPath,
    seq: &PartitionSequence,
    t: f64,
    trend: &TrendSpec,
) -> Result<EquationResidual> {
    check_same_grid(z, x)?;
    check_same_grid(h, x)?;
    let end = x.grid().index_at(t)?;
    let residuals = seq
        .partitions()
        .iter()
        .map(|p| {
            let s = riemann_sum(z, x, p, t, Convention::Truncated)?;
            Ok(z.x(end) - h.x(end) - s)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EquationResidual::from_values(t, seq, residuals, trend))
}

/// Residual of `Y_t = 1 + int Y_{s-} dX_s`.
pub fn verify_homogeneous(
    solution: &GridPath,
    x: &GridPath,
    seq: &PartitionSequence,
    t: f64,
    trend: &TrendSpec,
) -> Result<EquationResidual> {
    let one = GridPath::constant(x.grid().clone(), 1.0);
    linear_residual(solution, &one, x, seq, t, trend)
}

#[derive(Debug, Clone)]
pub struct Reciprocal {
    /// `1 / E(X)` with declared jumps.
    pub path: GridPath,
    pub lhs: f64,
    /// Right side per level; only the Riemann sum depends on the level.
    pub rhs: Vec<f64>,
    pub residual: EquationResidual,
}

fn reciprocal_path(se: &StochasticExponential) -> Result<GridPath> {
    if let Some(t) = se.zero_hit {
        return Err(Error::ZeroHit { t });
    }
    let p = &se.path;
    let values: Vec<f64> = p.values().iter().map(|v| 1.0 / v).collect();
    let mut jumps = BTreeMap::new();
    for &i in p.jumps().keys() {
        jumps.insert(i, vec![values[i] - 1.0 / p.left_x(i)]);
    }
    Ok(GridPath::new(p.grid().clone(), 1, values, jumps)?.with_finite_variation(p.is_finite_variation()))
}

/// `1/E(X)` and the residual of its representation as `-int dX/E_- + int d[X,X]^c/E_-
/// + sum (dX)^2 / (E_- (1 + dX))`.
pub fn reciprocal_exponential(
    se: &StochasticExponential,
    seq: &PartitionSequence,
    t: f64,
    trend: &TrendSpec,
) -> Result<Reciprocal> {
    let path = reciprocal_path(se)?;
    let x = &se.x;
    let end = x.grid().index_at(t)?;
    let lhs = path.x(end) - 1.0;

    let left: Vec<f64> = (0..x.len()).map(|i| 1.0 / se.left(i)).collect();
    let cont = stieltjes_left(&left, &se.qv_continuous)[end];
    let mut jump = Accumulator::new();
    for (&i, dx) in x.jumps().range(..=end) {
        jump.add(left[i] * dx[0] * dx[0] / (1.0 + dx[0]));
    }
    let fixed = cont + jump.value();
    let rhs = seq
        .partitions()
        .iter()
        .map(|p| Ok(-riemann_sum(&path, x, p, t, Convention::Truncated)? + fixed))
        .collect::<Result<Vec<_>>>()?;
    let residuals = rhs.iter().map(|r| lhs - r).collect();
    Ok(Reciprocal {
        path,
        lhs,
        rhs,
        residual: EquationResidual::from_values(t, seq, residuals, trend),
    })
}

/// The forcing term `H` of `Z = H + int Z_- dX`.
#[derive(Debug, Clone, Copy)]
pub enum Forcing<'a> {
    /// `H` is the realised integrand of an admissible witness.
    Witnessed(&'a AdmissibleIntegrand),
    /// A bare path; the result is labelled unwitnessed.
    Raw(&'a GridPath),
}

impl<'a> Forcing<'a> {
    fn path(&self) -> &'a GridPath {
        match self {
            Forcing::Witnessed(w) => w.xi(),
            Forcing::Raw(p) => p,
        }
    }
}

/// `H = int xi_- dX + A` with `A` of finite variation.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub xi: GridPath,
    pub a: FvPath,
}

#[derive(Debug, Clone)]
pub struct LinearSolution {
    pub exponential: StochasticExponential,
    /// `Z = H - E(X) int H_- d(1/E(X))` from the top-level Riemann path.
    pub z: GridPath,
    /// Per-level value of that expression at `t`.
    pub z_at_t: Vec<f64>,
    /// The expression through `dH`, `d[H,X]^c` and the jumps, when a
    /// decomposition is supplied.
    pub z_alt: Option<GridPath>,
    /// Sup-distance between the two expressions.
    pub agreement: Option<f64>,
    /// Sup-distance between `H` and `int xi_- dX + A` on the top level.
    pub decomposition_gap: Option<f64>,
    pub residual: EquationResidual,
    pub status: Status,
}

pub fn solve_linear(
    forcing: Forcing<'_>,
    decomposition: Option<&Decomposition>,
    x: &GridPath,
    seq: &PartitionSequence,
    t: f64,
    trend: &TrendSpec,
) -> Result<LinearSolution> {
    let h = forcing.path();
    h.expect_scalar()?;
    check_same_grid(h, x)?;
    if let Forcing::Witnessed(w) = forcing {
        if w.x() != x {
            return Err(Error::InvalidParameter(
                "forcing is witnessed against a different path".into(),
            ));
        }
    }
    if !same_grid(x.grid(), seq.grid()) {
        return Err(Error::GridMismatch);
    }
    let se = doleans_exponential(x, seq, trend)?;
    let recip = reciprocal_path(&se)?;
    let end = x.grid().index_at(t)?;
    let n = x.len();

    let top = riemann_path(h, &recip, seq.top())?;
    let values: Vec<f64> = (0..n).map(|i| h.x(i) - se.value(i) * top[i]).collect();
    let mut idx: Vec<usize> = x.jumps().keys().chain(h.jumps().keys()).copied().collect();
    idx.sort_unstable();
    idx.dedup();
    let z = with_left_jumps(x, values, &idx, |i| {
        let before = top[i] - h.x(seq_left_point(seq, i)) * recip.jump_x(i);
        h.left_x(i) - se.left(i) * before
    })?;
    let z_at_t = seq
        .partitions()
        .iter()
        .map(|p| {
            let s = riemann_sum(h, &recip, p, t, Convention::Truncated)?;
            Ok(h.x(end) - se.value(end) * s)
        })
        .collect::<Result<Vec<_>>>()?;

    let (z_alt, agreement, decomposition_gap) = match decomposition {
        Some(d) => {
            let (alt, gap) = linear_alt(h, d, x, &se, &recip, seq)?;
            let agree = sup_distance(&alt.values()[..=end], &z.values()[..=end]);
            (Some(alt), Some(agree), Some(gap))
        }
        None => (None, None, None),
    };

    let residual = linear_residual(&z, h, x, seq, t, trend)?;
    let status = match forcing {
        Forcing::Raw(_) => Status::Unwitnessed,
        Forcing::Witnessed(_) => residual.status,
    };
    Ok(LinearSolution {
        exponential: se,
        z,
        z_at_t,
        z_alt,
        agreement,
        decomposition_gap,
        residual,
        status,
    })
}

/// Top-level partition point at or before the interval that ends at grid index `i`.
fn seq_left_point(seq: &PartitionSequence, i: usize) -> usize {
    let top = seq.top();
    if i == 0 {
        return 0;
    }
    top.indices()[top.straddling(i)]
}

fn with_left_jumps(
    x: &GridPath,
    values: Vec<f64>,
    idx: &[usize],
    left: impl Fn(usize) -> f64,
) -> Result<GridPath> {
    let mut jumps = BTreeMap::new();
    for &i in idx {
        let d = values[i] - left(i);
        if d != 0.0 {
            jumps.insert(i, vec![d]);
        }
    }
    GridPath::new(x.grid().clone(), 1, values, jumps)
}

fn linear_alt(
    h: &GridPath,
    d: &Decomposition,
    x: &GridPath,
    se: &StochasticExponential,
    recip: &GridPath,
    seq: &PartitionSequence,
) -> Result<(GridPath, f64)> {
    d.xi.expect_scalar()?;
    check_same_grid(&d.xi, x)?;
    check_same_grid(d.a.path(), x)?;
    let n = x.len();
    let top = seq.top();

    let y = riemann_path(&d.xi, x, top)?;
    let gap = (0..n)
        .map(|i| (h.x(i) - y[i] - d.a.path().x(i)).abs())
        .fold(0.0, f64::max);

    let dh = riemann_path(recip, h, top)?;
    let w: Vec<f64> = (0..n)
        .map(|i| d.xi.left_x(i) / se.left(i))
        .collect();
    let hx = stieltjes_left(&w, &se.qv_continuous);
    let mut jump = Accumulator::new();
    let mut cum = vec![0.0; n];
    for i in 0..n {
        let dx = x.jump_x(i);
        if dx != 0.0 {
            jump.add(h.jump_x(i) * dx / (se.left(i) * (1.0 + dx)));
        }
        cum[i] = jump.value();
    }
    let h0 = h.x(0);
    let values: Vec<f64> = (0..n)
        .map(|i| se.value(i) * (h0 + dh[i] - hx[i] - cum[i]))
        .collect();
    Ok((GridPath::new(x.grid().clone(), 1, values, BTreeMap::new())?, gap))
}

/// How the local-Lipschitz and linear-growth conditions on `f` are vouched for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preconditions {
    /// Not stated; the solver refuses to run.
    Undeclared,
    /// The caller asserts both conditions.
    Declared,
    /// The caller accepts running without them.
    Waived,
}

/// Relative disagreement between one step and two half steps at which a step is rejected.
pub const STEP_REJECT: f64 = 1e-3;

fn rk4(g: &dyn Fn(f64, f64) -> f64, t: f64, v: f64, h: f64) -> f64 {
    let k1 = g(t, v);
    let k2 = g(t + 0.5 * h, v + 0.5 * h * k1);
    let k3 = g(t + 0.5 * h, v + 0.5 * h * k2);
    let k4 = g(t + h, v + h * k3);
    v + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Finite-difference estimates from a lattice over `[0, T] x [-m, m]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpotCheck {
    pub radius: f64,
    /// Largest `|f(t,z) - f(t,z')| / |z - z'|` between lattice neighbours.
    pub lipschitz: f64,
    /// Largest `|f(t,z)| / (1 + |z|)`.
    pub growth: f64,
}

/// Points per axis of the spot-check lattice.
pub const SPOT_CHECK_POINTS: usize = 100;

pub fn spot_check(f: &dyn Fn(f64, f64) -> f64, horizon: f64, radius: f64) -> SpotCheck {
    let k = SPOT_CHECK_POINTS;
    let dz = 2.0 * radius / (k - 1) as f64;
    let (mut lip, mut growth) = (0.0_f64, 0.0_f64);
    for a in 0..k {
        let t = horizon * a as f64 / (k - 1) as f64;
        let mut prev: Option<(f64, f64)> = None;
        for b in 0..k {
            let z = -radius + dz * b as f64;
            let v = f(t, z);
            growth = growth.max(v.abs() / (1.0 + z.abs()));
            if let Some((pz, pv)) = prev {
                lip = lip.max((v - pv).abs() / (z - pz));
            }
            prev = Some((z, v));
        }
    }
    SpotCheck {
        radius,
        lipschitz: lip,
        growth,
    }
}

#[derive(Debug, Clone)]
pub struct NonlinearSolution {
    pub exponential: StochasticExponential,
    /// Solution of the reduced ODE.
    pub y: Vec<f64>,
    /// `Z = Y E(X)`.
    pub z: GridPath,
    pub residual: EquationResidual,
    pub spot_check: Option<SpotCheck>,
}

/// Solves `Z_t = z0 + int f(s, Z_s) ds + int Z_{s-} dX_s` through the ODE for
/// `Y = Z / E(X)`, with `E(X)` held at its left grid value inside each step.
/// Each grid step is one RK4 step checked against two half steps.
#[allow(clippy::too_many_arguments)]
pub fn solve_nonlinear(
    f: &dyn Fn(f64, f64) -> f64,
    x: &GridPath,
    z0: f64,
    seq: &PartitionSequence,
    preconditions: Preconditions,
    spot_radius: Option<f64>,
    t: f64,
    trend: &TrendSpec,
) -> Result<NonlinearSolution> {
    if preconditions == Preconditions::Undeclared {
        return Err(Error::PreconditionsUndeclared);
    }
    let se = doleans_exponential(x, seq, trend)?;
    if let Some(t) = se.zero_hit {
        return Err(Error::ZeroHit { t });
    }
    let n = x.len();
    let mut y = Vec::with_capacity(n);
    y.push(z0);
    for i in 0..n - 1 {
        let (t0, t1) = (x.time(i), x.time(i + 1));
        let e = se.value(i);
        let g = |s: f64, v: f64| f(s, v * e) / e;
        let h = t1 - t0;
        let v = y[i];
        let full = rk4(&g, t0, v, h);
        let half = rk4(&g, t0, v, 0.5 * h);
        let next = rk4(&g, t0 + 0.5 * h, half, 0.5 * h);
        let finite = full.is_finite() && next.is_finite();
        if !finite || next.abs() > BLOW_UP || (next - full).abs() > STEP_REJECT * (1.0 + next.abs()) {
            return Err(Error::BlowUp { t: t1 });
        }
        y.push(next);
    }
    let values: Vec<f64> = (0..n).map(|i| y[i] * se.value(i)).collect();
    let idx: Vec<usize> = x.jumps().keys().copied().collect();
    let z = with_left_jumps(x, values, &idx, |i| y[i] * se.left(i))?;

    let end = x.grid().index_at(t)?;
    let residuals = seq
        .partitions()
        .iter()
        .map(|p| {
            let mut drift = Accumulator::new();
            for w in p.indices().windows(2) {
                if w[0] >= end {
                    break;
                }
                let hi = w[1].min(end);
                drift.add(f(x.time(w[0]), z.x(w[0])) * (x.time(hi) - x.time(w[0])));
            }
            let s = riemann_sum(&z, x, p, t, Convention::Truncated)?;
            Ok(z.x(end) - z0 - drift.value() - s)
        })
        .collect::<Result<Vec<_>>>()?;
    let spot_check = spot_radius.map(|r| spot_check(f, x.grid().horizon(), r));
    Ok(NonlinearSolution {
        exponential: se,
        y,
        z,
        residual: EquationResidual::from_values(t, seq, residuals, trend),
        spot_check,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GronwallReport {
    /// `sup_{s <= t} |Y1_s - Y2_s|`.
    pub sup_distance: f64,
    /// `V(R)_t`.
    pub variation: f64,
    /// `sup |Y1 - Y2|_{s-} * V(R)_t`, the largest value the hypothesis allows.
    pub hypothesis_rhs: f64,
    /// `0 * exp(V(R)_t)`.
    pub bound: f64,
    /// The hypothesis `|Y1_t - Y2_t| <= int |Y1 - Y2|_{s-} dV(R)_s` holds at every grid time.
    pub hypothesis_holds: bool,
    pub within_bound: bool,
}

/// Compares two candidate solutions against the Gronwall bound, which forces them equal.
pub fn gronwall_uniqueness_probe(
    y1: &GridPath,
    y2: &GridPath,
    r: &FvPath,
    t: f64,
    tol: f64,
) -> Result<GronwallReport> {
    y1.expect_scalar()?;
    check_same_grid(y1, y2)?;
    check_same_grid(y1, r.path())?;
    let end = y1.grid().index_at(t)?;
    let diff: Vec<f64> = (0..=end).map(|i| (y1.x(i) - y2.x(i)).abs()).collect();
    let left: Vec<f64> = (0..=end)
        .map(|i| (y1.left_x(i) - y2.left_x(i)).abs())
        .collect();
    let mut v = vec![0.0; end + 1];
    for k in 0..r.dim() {
        for (a, b) in v.iter_mut().zip(r.variation_path(k)) {
            *a += b;
        }
    }
    let rhs = stieltjes_left(&left, &v);
    let hypothesis_holds = diff.iter().zip(&rhs).all(|(d, r)| *d <= r + tol);
    let sup = diff.iter().copied().fold(0.0, f64::max);
    let variation = v[end];
    let bound = 0.0 * variation.exp();
    Ok(GronwallReport {
        sup_distance: sup,
        variation,
        hypothesis_rhs: rhs[end],
        bound,
        hypothesis_holds,
        within_bound: sup <= bound + tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate, Formula, Generator};
    use crate::path::TimeGrid;
    use std::sync::Arc;

    fn setup(level: u32) -> (Arc<TimeGrid>, PartitionSequence) {
        let g = Arc::new(TimeGrid::dyadic(1.0, level).unwrap());
        let seq = PartitionSequence::dyadic(&g, 1, level).unwrap();
        (g, seq)
    }

    fn linear(g: &Arc<TimeGrid>) -> GridPath {
        generate(
            &Generator::Formula {
                formula: Formula::Linear { x0: 0.0, slope: 1.0 },
            },
            g,
        )
        .unwrap()
    }

    fn step(g: &Arc<TimeGrid>, c: f64) -> GridPath {
        generate(&Generator::Step { c, t0: 0.5, x0: 0.0 }, g).unwrap()
    }

    #[test]
    fn exponential_of_time() {
        let (g, seq) = setup(10);
        let se = doleans_exponential(&linear(&g), &seq, &TrendSpec::deterministic()).unwrap();
        assert!((se.value(1024) - 1f64.exp()).abs() < 1e-12);
        assert!(se.positive);
    }

    #[test]
    fn exponential_of_step() {
        let (g, seq) = setup(6);
        let se = doleans_exponential(&step(&g, 0.5), &seq, &TrendSpec::deterministic()).unwrap();
        assert_eq!(se.value(31), 1.0);
        assert!((se.value(32) - 1.5).abs() < 1e-15);
        assert!((se.path.jump_x(32) - 0.5).abs() < 1e-15);
        let r = verify_homogeneous(&se.path, &se.x, &seq, 1.0, &TrendSpec::deterministic()).unwrap();
        assert!(r.residuals.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn exponential_zero_hit() {
        let (g, seq) = setup(4);
        let se = doleans_exponential(&step(&g, -1.0), &seq, &TrendSpec::deterministic()).unwrap();
        assert_eq!(se.zero_hit, Some(0.5));
        assert!(se.path.values()[8..].iter().all(|&v| v == 0.0));
        assert!(matches!(
            reciprocal_exponential(&se, &seq, 1.0, &TrendSpec::deterministic()),
            Err(Error::ZeroHit { .. })
        ));
    }

    #[test]
    fn constant_candidate_is_falsified() {
        let (g, seq) = setup(6);
        let x = linear(&g);
        let one = GridPath::constant(g.clone(), 1.0);
        let r = verify_homogeneous(&one, &x, &seq, 1.0, &TrendSpec::deterministic()).unwrap();
        assert!(r.residuals.iter().all(|v| (v + 1.0).abs() < 1e-12));
    }

    #[test]
    fn reciprocal_of_step() {
        let (g, seq) = setup(6);
        let c = 0.7;
        let se = doleans_exponential(&step(&g, c), &seq, &TrendSpec::deterministic()).unwrap();
        let r = reciprocal_exponential(&se, &seq, 1.0, &TrendSpec::deterministic()).unwrap();
        assert!((r.lhs + c / (1.0 + c)).abs() < 1e-15);
        assert!(r.residual.residuals.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn nonlinear_pure_ode() {
        let (g, seq) = setup(6);
        let x = GridPath::constant(g.clone(), 0.0).with_finite_variation(true);
        let s = solve_nonlinear(
            &|_, _| 1.0,
            &x,
            0.25,
            &seq,
            Preconditions::Declared,
            None,
            1.0,
            &TrendSpec::deterministic(),
        )
        .unwrap();
        assert!((s.z.x(64) - 1.25).abs() < 1e-14);
    }

    #[test]
    fn nonlinear_requires_declaration() {
        let (g, seq) = setup(3);
        let x = linear(&g);
        let r = solve_nonlinear(
            &|_, z| z,
            &x,
            1.0,
            &seq,
            Preconditions::Undeclared,
            None,
            1.0,
            &TrendSpec::deterministic(),
        );
        assert!(matches!(r, Err(Error::PreconditionsUndeclared)));
    }

    #[test]
    fn nonlinear_blow_up() {
        let (g, seq) = setup(8);
        let x = GridPath::constant(g.clone(), 0.0).with_finite_variation(true);
        let r = solve_nonlinear(
            &|_, z| z * z,
            &x,
            1.0,
            &seq,
            Preconditions::Waived,
            None,
            1.0,
            &TrendSpec::deterministic(),
        );
        assert!(matches!(r, Err(Error::BlowUp { .. })));
    }

    #[test]
    fn spot_check_linear() {
        let s = spot_check(&|_, z| 3.0 * z, 1.0, 2.0);
        assert!((s.lipschitz - 3.0).abs() < 1e-9);
        assert!(s.growth <= 3.0);
    }

    #[test]
    fn gronwall_rejects_perturbation() {
        let (g, seq) = setup(6);
        let x = linear(&g);
        let se = doleans_exponential(&x, &seq, &TrendSpec::deterministic()).unwrap();
        let bump = GridPath::scalar(
            g.clone(),
            (0..65).map(|i| if i >= 32 { 1e-3 } else { 0.0 }).collect(),
            [(32, 1e-3)],
        )
        .unwrap();
        let perturbed = se.path.add(&bump).unwrap();
        let r = FvPath::new(x.clone()).unwrap();
        let same = gronwall_uniqueness_probe(&se.path, &se.path, &r, 1.0, 1e-12).unwrap();
        assert!(same.within_bound && same.sup_distance == 0.0);
        let off = gronwall_uniqueness_probe(&se.path, &perturbed, &r, 1.0, 1e-12).unwrap();
        assert!((off.sup_distance - 1e-3).abs() < 1e-15);
        assert!(!off.within_bound);
    }
}
