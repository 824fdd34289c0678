//! Azéma–Yor paths, floor functions and the drawdown equation.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::equations::{exponential_from_qv, EquationResidual};
use crate::quadvar::qv_sequence_with;
use crate::error::{Error, Result};
use crate::integral::{riemann_path, riemann_sum, Convention};
use crate::numeric::{sup_distance, Accumulator, Status, TrendSpec};
use crate::partition::{Partition, PartitionSequence};
use crate::path::{check_same_grid, GridPath};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A `C^2` function on `[lo, hi)` with its first two derivatives; right
/// derivatives at `lo`.
#[derive(Clone)]
pub struct MonotoneC2Function {
    lo: f64,
    hi: f64,
    f: ScalarFn,
    d1: ScalarFn,
    d2: ScalarFn,
    increasing: bool,
}

impl fmt::Debug for MonotoneC2Function {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MonotoneC2Function")
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .field("increasing", &self.increasing)
            .finish()
    }
}

impl MonotoneC2Function {
    pub fn new(
        lo: f64,
        hi: f64,
        increasing: bool,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(lo < hi) || lo.is_nan() {
            return Err(Error::InvalidParameter(format!("empty domain [{lo}, {hi})")));
        }
        Ok(Self {
            lo,
            hi,
            f: Arc::new(f),
            d1: Arc::new(d1),
            d2: Arc::new(d2),
            increasing,
        })
    }

    pub fn identity(lo: f64) -> Self {
        Self::affine(1.0, 0.0, lo).expect("slope 1 is valid")
    }

    /// `alpha x + beta`.
    pub fn affine(alpha: f64, beta: f64, lo: f64) -> Result<Self> {
        Self::new(
            lo,
            f64::INFINITY,
            alpha > 0.0,
            move |x| alpha * x + beta,
            move |_| alpha,
            |_| 0.0,
        )
    }

    /// `c x^p` on `[lo, inf)`, `lo > 0`.
    pub fn power(c: f64, p: f64, lo: f64) -> Result<Self> {
        if lo <= 0.0 {
            return Err(Error::InvalidParameter("power needs a positive domain".into()));
        }
        Self::new(
            lo,
            f64::INFINITY,
            c * p > 0.0,
            move |x| c * x.powf(p),
            move |x| c * p * x.powf(p - 1.0),
            move |x| c * p * (p - 1.0) * x.powf(p - 2.0),
        )
    }

    /// `c log x + d` on `[lo, inf)`, `lo > 0`.
    pub fn log(c: f64, d: f64, lo: f64) -> Result<Self> {
        if lo <= 0.0 {
            return Err(Error::InvalidParameter("log needs a positive domain".into()));
        }
        Self::new(
            lo,
            f64::INFINITY,
            c > 0.0,
            move |x| c * x.ln() + d,
            move |x| c / x,
            move |x| -c / (x * x),
        )
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn is_increasing(&self) -> bool {
        self.increasing
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x < self.hi
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn d1(&self, x: f64) -> f64 {
        (self.d1)(x)
    }

    pub fn d2(&self, x: f64) -> f64 {
        (self.d2)(x)
    }

    fn require(&self, x: f64) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "{x} outside [{}, {})",
                self.lo, self.hi
            )))
        }
    }

    /// Finite-difference check of both derivatives at `x`; forward differences at `lo`.
    pub fn check_derivatives(&self, x: f64) -> Result<()> {
        self.require(x)?;
        let h = 1e-5 * x.abs().max(1.0);
        let (a, b) = if x - h < self.lo { (x, x + 2.0 * h) } else { (x - h, x + h) };
        if !self.contains(b) {
            return Ok(());
        }
        let cases = [
            ("first derivative", self.d1(x), (self.eval(b) - self.eval(a)) / (b - a)),
            ("second derivative", self.d2(x), (self.d1(b) - self.d1(a)) / (b - a)),
        ];
        for (which, analytic, numeric) in cases {
            if (analytic - numeric).abs() > 1e-4 * (1.0 + analytic.abs()) {
                return Err(Error::Derivative {
                    which: which.into(),
                    analytic,
                    numeric,
                });
            }
        }
        Ok(())
    }

    /// Solves `f(x) = y` by bisection with a Newton polish; strictly increasing only.
    pub fn inverse_at(&self, y: f64) -> Result<f64> {
        if !self.increasing {
            return Err(Error::InvalidParameter("inverse needs an increasing function".into()));
        }
        let mut lo = self.lo;
        if self.eval(lo) > y {
            return Err(Error::InvalidParameter(format!("{y} below the range")));
        }
        let mut hi = if self.hi.is_finite() {
            self.hi
        } else {
            let mut step = lo.abs().max(1.0);
            while self.eval(lo + step) < y {
                step *= 2.0;
                if !step.is_finite() {
                    return Err(Error::InvalidParameter(format!("{y} above the range")));
                }
            }
            lo + step
        };
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eval(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..3 {
            let d = self.d1(x);
            if d > 0.0 {
                let next = x - (self.eval(x) - y) / d;
                if next >= self.lo && next.is_finite() {
                    x = next;
                }
            }
        }
        Ok(x)
    }

    /// The inverse function on `[f(lo), f(hi))`.
    pub fn inverse(&self) -> Result<Self> {
        if !self.increasing {
            return Err(Error::InvalidParameter("inverse needs an increasing function".into()));
        }
        let this = self.clone();
        let (a, b, c) = (this.clone(), this.clone(), this.clone());
        let hi = if self.hi.is_finite() {
            self.eval(self.hi)
        } else {
            f64::INFINITY
        };
        Self::new(
            self.eval(self.lo),
            hi,
            true,
            move |y| a.inverse_at(y).unwrap_or(f64::NAN),
            move |y| {
                let x = b.inverse_at(y).unwrap_or(f64::NAN);
                1.0 / b.d1(x)
            },
            move |y| {
                let x = c.inverse_at(y).unwrap_or(f64::NAN);
                let d = c.d1(x);
                -c.d2(x) / (d * d * d)
            },
        )
    }

    /// `outer(inner(x))` on `inner`'s domain.
    pub fn compose(outer: &Self, inner: &Self) -> Result<Self> {
        let (o1, o2, o3) = (outer.clone(), outer.clone(), outer.clone());
        let (i1, i2, i3) = (inner.clone(), inner.clone(), inner.clone());
        Self::new(
            inner.lo,
            inner.hi,
            outer.increasing && inner.increasing,
            move |x| o1.eval(i1.eval(x)),
            move |x| o2.d1(i2.eval(x)) * i2.d1(x),
            move |x| {
                let d = i3.d1(x);
                o3.d2(i3.eval(x)) * d * d + o3.d1(i3.eval(x)) * i3.d2(x)
            },
        )
    }
}

/// Floor functions `w` for the drawdown constraint `X ^ X_- > w(max X)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FloorFunction {
    Zero,
    /// `alpha y`.
    Proportional { alpha: f64 },
    /// `y - c`.
    ConstantMargin { c: f64 },
    /// Monotone cubic through `(y, w)` points, linear beyond the ends.
    Table { points: Vec<(f64, f64)> },
}

impl FloorFunction {
    pub fn eval(&self, y: f64) -> f64 {
        match self {
            FloorFunction::Zero => 0.0,
            FloorFunction::Proportional { alpha } => alpha * y,
            FloorFunction::ConstantMargin { c } => y - c,
            FloorFunction::Table { points } => table_eval(points, y).0,
        }
    }

    pub fn derivative(&self, y: f64) -> f64 {
        match self {
            FloorFunction::Zero => 0.0,
            FloorFunction::Proportional { alpha } => *alpha,
            FloorFunction::ConstantMargin { .. } => 1.0,
            FloorFunction::Table { points } => table_eval(points, y).1,
        }
    }

    /// `y - w(y)`.
    pub fn margin(&self, y: f64) -> f64 {
        y - self.eval(y)
    }

    pub fn validate(&self) -> Result<()> {
        if let FloorFunction::Table { points } = self {
            if points.len() < 2 || points.windows(2).any(|w| !(w[0].0 < w[1].0)) {
                return Err(Error::InvalidParameter(
                    "floor table needs at least two points with increasing y".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Fritsch–Carlson slopes for the table.
fn table_slopes(points: &[(f64, f64)]) -> Vec<f64> {
    let n = points.len();
    let delta: Vec<f64> = points
        .windows(2)
        .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
        .collect();
    let mut m = vec![0.0; n];
    m[0] = delta[0];
    m[n - 1] = delta[n - 2];
    for k in 1..n - 1 {
        m[k] = if delta[k - 1] * delta[k] <= 0.0 {
            0.0
        } else {
            0.5 * (delta[k - 1] + delta[k])
        };
    }
    for k in 0..n - 1 {
        if delta[k] == 0.0 {
            m[k] = 0.0;
            m[k + 1] = 0.0;
            continue;
        }
        let (a, b) = (m[k] / delta[k], m[k + 1] / delta[k]);
        let s = a * a + b * b;
        if s > 9.0 {
            let tau = 3.0 / s.sqrt();
            m[k] = tau * a * delta[k];
            m[k + 1] = tau * b * delta[k];
        }
    }
    m
}

fn table_eval(points: &[(f64, f64)], y: f64) -> (f64, f64) {
    let m = table_slopes(points);
    let n = points.len();
    if y <= points[0].0 {
        return (points[0].1 + m[0] * (y - points[0].0), m[0]);
    }
    if y >= points[n - 1].0 {
        return (points[n - 1].1 + m[n - 1] * (y - points[n - 1].0), m[n - 1]);
    }
    let k = points.partition_point(|p| p.0 <= y) - 1;
    let (x0, y0) = points[k];
    let (x1, y1) = points[k + 1];
    hermite(x0, x1, y0, y1, m[k], m[k + 1], y)
}

/// Cubic Hermite value and derivative.
fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, m0: f64, m1: f64, x: f64) -> (f64, f64) {
    let h = x1 - x0;
    let s = (x - x0) / h;
    let (s2, s3) = (s * s, s * s * s);
    let v = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * m0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * m1;
    let d = ((6.0 * s2 - 6.0 * s) * y0 + (6.0 * s2 - 6.0 * s) * -y1) / h
        + (3.0 * s2 - 4.0 * s + 1.0) * m0
        + (3.0 * s2 - 2.0 * s) * m1;
    (v, d)
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        left + right + (left + right - whole) / 15.0
    } else {
        simpson(f, a, m, fa, flm, fm, 0.5 * tol, depth - 1)
            + simpson(f, m, b, fm, frm, fb, 0.5 * tol, depth - 1)
    }
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    simpson(f, a, b, f(a), f(m), f(b), tol, 40)
}

/// Increment of `G = int 1/(s - w(s)) ds` per table segment.
const TABLE_STEP: f64 = 1.0 / 1024.0;
const MAX_SEGMENTS: usize = 4_000_000;

/// `V(y) = a exp(int_{[a*, y]} ds / (s - w(s)))` tabulated up to `V >= x_max`,
/// and `U = V^{-1}`.
#[derive(Debug, Clone)]
pub struct Transform {
    pub v: MonotoneC2Function,
    pub u: MonotoneC2Function,
    pub a: f64,
    pub a_star: f64,
    /// Upper end of the tabulated `y` range.
    pub y_max: f64,
}

pub fn floor_to_transform(w: &FloorFunction, a: f64, a_star: f64, x_max: f64) -> Result<Transform> {
    w.validate()?;
    if !(a > 0.0) {
        return Err(Error::InvalidParameter(format!("a = {a} must be positive")));
    }
    let target = (x_max.max(a) / a).ln() + 2.0 * TABLE_STEP;
    let margin = |y: f64| -> Result<f64> {
        let m = w.margin(y);
        if m > 0.0 && m.is_finite() {
            Ok(m)
        } else {
            Err(Error::Margin { y, margin: m })
        }
    };
    let mut ys = vec![a_star];
    let mut gs = vec![0.0];
    let mut y = a_star;
    let mut g = 0.0;
    while g < target {
        if ys.len() > MAX_SEGMENTS {
            return Err(Error::InvalidParameter(format!(
                "floor table does not reach {x_max}"
            )));
        }
        let m0 = margin(y)?;
        let next = y + m0 * TABLE_STEP;
        margin(next)?;
        let f = |s: f64| 1.0 / w.margin(s);
        g += integrate(&f, y, next, 1e-15 * (1.0 + g));
        y = next;
        ys.push(y);
        gs.push(g);
    }
    // Margin sign is checked at the nodes only; check the midpoints too.
    for k in 0..ys.len() - 1 {
        margin(0.5 * (ys[k] + ys[k + 1]))?;
    }

    let table = Arc::new((ys, gs, w.clone()));
    let y_max = *table.0.last().unwrap();
    let g_at = {
        let t = table.clone();
        move |y: f64| -> f64 {
            let (ys, gs, w) = (&t.0, &t.1, &t.2);
            let k = (ys.partition_point(|&v| v <= y).max(1) - 1).min(ys.len() - 2);
            let (m0, m1) = (1.0 / w.margin(ys[k]), 1.0 / w.margin(ys[k + 1]));
            hermite(ys[k], ys[k + 1], gs[k], gs[k + 1], m0, m1, y).0
        }
    };
    let (w1, w2, w3) = (w.clone(), w.clone(), w.clone());
    let (g1, g2, g3) = (g_at.clone(), g_at.clone(), g_at);
    let v = MonotoneC2Function::new(
        a_star,
        y_max,
        true,
        move |y| a * g1(y).exp(),
        move |y| a * g2(y).exp() / w1.margin(y),
        move |y| {
            let m = w2.margin(y);
            a * g3(y).exp() * w3.derivative(y) / (m * m)
        },
    )?;
    let u = v.inverse()?;
    Ok(Transform {
        v,
        u,
        a,
        a_star,
        y_max,
    })
}

/// `M^U(X)` and the check of its integral form.
#[derive(Debug, Clone)]
pub struct AzemaYor {
    /// `U(max X) - U'(max X)(max X - X)` with declared jumps `U'(max X) dX`.
    pub path: GridPath,
    pub running_max: GridPath,
    /// `M_t - U(X_0) - int U'(max X_s) dX_s` per level.
    pub residual: EquationResidual,
    /// `sum (max X - X)_{t_i} (max X_{t_{i+1}} - max X_{t_i})` per level.
    pub max_support: Vec<f64>,
}

fn continuous_max(x: &GridPath) -> Result<GridPath> {
    let rm = x.running_maximum()?;
    if let Some(i) = rm.first_break {
        return Err(Error::DiscontinuousMaximum { t: x.time(i) });
    }
    Ok(rm.path)
}

fn max_support_sum(x: &GridPath, xbar: &GridPath, p: &Partition) -> f64 {
    let mut acc = Accumulator::new();
    for w in p.indices().windows(2) {
        acc.add((xbar.x(w[0]) - x.x(w[0])) * (xbar.x(w[1]) - xbar.x(w[0])));
    }
    acc.value()
}

/// The Azéma–Yor path without the integral check.
pub fn azema_yor_values(u: &MonotoneC2Function, x: &GridPath) -> Result<GridPath> {
    let xbar = continuous_max(x)?;
    let n = x.len();
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let m = xbar.x(i);
        if !u.contains(m) {
            return Err(Error::Domain { t: x.time(i) });
        }
        values.push(u.eval(m) - u.d1(m) * (m - x.x(i)));
    }
    let jumps = x
        .jumps()
        .iter()
        .map(|(&i, d)| (i, vec![u.d1(xbar.x(i)) * d[0]]))
        .collect();
    Ok(GridPath::new(x.grid().clone(), 1, values, jumps)?)
}

pub fn azema_yor_path(
    u: &MonotoneC2Function,
    x: &GridPath,
    seq: &PartitionSequence,
    t: f64,
    trend: &TrendSpec,
) -> Result<AzemaYor> {
    x.expect_scalar()?;
    let path = azema_yor_values(u, x)?;
    let xbar = continuous_max(x)?;
    let n = x.len();
    let slope: Vec<f64> = (0..n).map(|i| u.d1(xbar.x(i))).collect();
    let slope = GridPath::scalar(x.grid().clone(), slope, [])?;
    let end = x.grid().index_at(t)?;
    let a_star = u.eval(x.x(0));
    let residuals = seq
        .partitions()
        .iter()
        .map(|p| Ok(path.x(end) - a_star - riemann_sum(&slope, x, p, t, Convention::Truncated)?))
        .collect::<Result<Vec<_>>>()?;
    let max_support = seq
        .partitions()
        .iter()
        .map(|p| max_support_sum(x, &xbar, p))
        .collect();
    Ok(AzemaYor {
        path,
        running_max: xbar,
        residual: residual_report(t, seq, residuals, trend),
        max_support,
    })
}

fn residual_report(t: f64, seq: &PartitionSequence, residuals: Vec<f64>, trend: &TrendSpec) -> EquationResidual {
    let abs: Vec<f64> = residuals.iter().map(|r| r.abs()).collect();
    let report = trend.check(&abs);
    EquationResidual {
        t,
        levels: seq.levels().to_vec(),
        residuals,
        trend: report,
        status: Status::from_trend(&report),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxIdentityReport {
    /// `sup |max M^U(X) - U(max X)|`.
    pub max_gap: f64,
    /// `sup |M^U(M^F(X)) - M^{U o F}(X)|`, when `F` is given.
    pub composition_gap: Option<f64>,
    /// The running maximum of `M^U(X)` has no declared jumps.
    pub max_continuous: bool,
}

pub fn max_identity_check(
    u: &MonotoneC2Function,
    x: &GridPath,
    f: Option<&MonotoneC2Function>,
) -> Result<MaxIdentityReport> {
    if !u.is_increasing() {
        return Err(Error::Precondition("U must be increasing".into()));
    }
    let m = azema_yor_values(u, x)?;
    let rm = m.running_maximum()?;
    let xbar = continuous_max(x)?;
    let target: Vec<f64> = xbar.values().iter().map(|&v| u.eval(v)).collect();
    let max_gap = sup_distance(rm.path.values(), &target);
    let composition_gap = match f {
        Some(f) => {
            if !f.is_increasing() {
                return Err(Error::Precondition("F must be increasing".into()));
            }
            let inner = azema_yor_values(f, x)?;
            let lhs = azema_yor_values(u, &inner)?;
            let uf = MonotoneC2Function::compose(u, f)?;
            let rhs = azema_yor_values(&uf, x)?;
            Some(lhs.sup_distance(&rhs)?)
        }
        None => None,
    };
    Ok(MaxIdentityReport {
        max_gap,
        composition_gap,
        max_continuous: rm.is_continuous(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    /// `min_t (Y_t ^ Y_{t-} - w(max Y_t))`.
    pub min_margin: f64,
    /// Time of the minimum.
    pub at: f64,
    pub holds: bool,
}

pub fn check_drawdown_constraint(y: &GridPath, w: &FloorFunction) -> Result<ConstraintReport> {
    let ybar = y.running_maximum()?.path;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..y.len() {
        let m = y.x(i).min(y.left_x(i)) - w.eval(ybar.x(i));
        if m < best.0 {
            best = (m, y.time(i));
        }
    }
    Ok(ConstraintReport {
        min_margin: best.0,
        at: best.1,
        holds: best.0 > 0.0,
    })
}

fn require_positive(x: &GridPath) -> Result<()> {
    for i in 0..x.len() {
        if !(x.x(i) > 0.0 && x.left_x(i) > 0.0) {
            return Err(Error::Positivity { t: x.time(i) });
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct DrawdownSolution {
    pub transform: Transform,
    /// `Y = M^U(X)`.
    pub y: GridPath,
    /// Residual of `Y_t = a* + int (Y_- - w(max Y))/X_- dX` per level.
    pub residual: EquationResidual,
    pub constraint: ConstraintReport,
    /// `sup |M^V(Y) - X|`.
    pub round_trip: f64,
}

pub fn solve_drawdown(
    w: &FloorFunction,
    x: &GridPath,
    a_star: f64,
    seq: &PartitionSequence,
    t: f64,
    trend: &TrendSpec,
) -> Result<DrawdownSolution> {
    x.expect_scalar()?;
    require_positive(x)?;
    let xbar = continuous_max(x)?;
    let x_max = xbar.x(x.len() - 1);
    let transform = floor_to_transform(w, x.x(0), a_star, x_max)?;
    let y = azema_yor_values(&transform.u, x)?;
    let ybar = y.running_maximum()?.path;
    let n = x.len();
    let integrand: Vec<f64> = (0..n)
        .map(|i| (y.x(i) - w.eval(ybar.x(i))) / x.x(i))
        .collect();
    let integrand = GridPath::scalar(x.grid().clone(), integrand, [])?;
    let end = x.grid().index_at(t)?;
    let residuals = seq
        .partitions()
        .iter()
        .map(|p| Ok(y.x(end) - a_star - riemann_sum(&integrand, x, p, t, Convention::Truncated)?))
        .collect::<Result<Vec<_>>>()?;
    let constraint = check_drawdown_constraint(&y, w)?;
    let back = azema_yor_values(&transform.v, &y)?;
    let round_trip = back.sup_distance(x)?;
    Ok(DrawdownSolution {
        transform,
        y,
        residual: residual_report(t, seq, residuals, trend),
        constraint,
        round_trip,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    /// `sup |int dX/X_- - int dY/Y_-|` on the top level.
    pub integral_distance: f64,
    /// `sup |X - Y|`.
    pub path_distance: f64,
    /// The integral paths agree within `tol`, so the paths must too.
    pub integrals_agree: bool,
    pub paths_agree: bool,
}

/// Log-return integral path `int dX / X_-` along the top partition.
pub fn log_return_path(x: &GridPath, top: &Partition) -> Result<GridPath> {
    require_positive(x)?;
    let inv = x.map(|v| 1.0 / v)?;
    let values = riemann_path(&inv, x, top)?;
    let jumps = x
        .jumps()
        .iter()
        .map(|(&i, d)| (i, vec![d[0] / x.left_x(i)]))
        .collect();
    Ok(GridPath::new(x.grid().clone(), 1, values, jumps)?.with_finite_variation(x.is_finite_variation()))
}

/// Equal log-return integrals and equal starting points force equal paths.
pub fn log_return_uniqueness(
    x: &GridPath,
    y: &GridPath,
    seq: &PartitionSequence,
    tol: f64,
    path_tol: f64,
) -> Result<UniquenessReport> {
    check_same_grid(x, y)?;
    if x.x(0) != y.x(0) {
        return Err(Error::Precondition(format!(
            "starting values differ: {} vs {}",
            x.x(0),
            y.x(0)
        )));
    }
    let zx = log_return_path(x, seq.top())?;
    let zy = log_return_path(y, seq.top())?;
    let integral_distance = zx.sup_distance(&zy)?;
    let path_distance = x.sup_distance(y)?;
    let integrals_agree = integral_distance < tol;
    Ok(UniquenessReport {
        integral_distance,
        path_distance,
        integrals_agree,
        paths_agree: !integrals_agree || path_distance < path_tol,
    })
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub log_returns: GridPath,
    /// `X_0 E(int dX / X_-)`.
    pub path: GridPath,
    pub sup_error: f64,
    /// Convergence status of `[Z,Z]` for the log returns `Z`. The path is
    /// built from the top-level estimate even when this is inconclusive.
    pub qv_status: Status,
}

/// Rebuilds a positive path from its log-return integral.
pub fn exponential_reconstruction(
    x: &GridPath,
    seq: &PartitionSequence,
    trend: &TrendSpec,
) -> Result<Reconstruction> {
    let z = log_return_path(x, seq.top())?;
    let qv = qv_sequence_with(&z, seq, trend)?;
    let se = exponential_from_qv(&z, &qv)?;
    let path = se.path.scale(x.x(0));
    let sup_error = path.sup_distance(x)?;
    Ok(Reconstruction {
        log_returns: z,
        path,
        sup_error,
        qv_status: qv.status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate, Generator};
    use crate::path::TimeGrid;

    fn positive_path(seed: u64, level: u32) -> (GridPath, PartitionSequence) {
        let g = Arc::new(TimeGrid::dyadic(1.0, level).unwrap());
        let x = generate(
            &Generator::Exp {
                base: Box::new(Generator::DyadicBrownian {
                    seed,
                    sigma: 0.3,
                    x0: 0.0,
                }),
                scale: 1.0,
            },
            &g,
        )
        .unwrap();
        (x, PartitionSequence::dyadic(&g, 1, level).unwrap())
    }

    #[test]
    fn identity_transform_is_exact() {
        let (x, seq) = positive_path(1, 8);
        let ay = azema_yor_path(&MonotoneC2Function::identity(0.0), &x, &seq, 1.0, &TrendSpec::deterministic()).unwrap();
        assert_eq!(ay.path.values(), x.values());
    }

    #[test]
    fn floor_zero_gives_linear_transform() {
        let t = floor_to_transform(&FloorFunction::Zero, 2.0, 1.0, 10.0).unwrap();
        for y in [1.0, 1.5, 3.0, 4.9] {
            assert!((t.v.eval(y) - 2.0 * y).abs() < 1e-11 * y);
            assert!((t.v.d1(y) - 2.0).abs() < 1e-12);
            assert!((t.u.eval(2.0 * y) - y).abs() < 1e-12 * y);
        }
    }

    #[test]
    fn floor_unit_margin_gives_exponential() {
        let t = floor_to_transform(&FloorFunction::ConstantMargin { c: 1.0 }, 1.5, 1.0, 20.0).unwrap();
        for y in [1.0, 1.3, 2.0, 3.5] {
            assert!((t.v.eval(y) - 1.5 * (y - 1.0).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn margin_violation_is_located() {
        let w = FloorFunction::Table {
            points: vec![(0.0, 0.5), (1.0, 1.5), (2.0, 2.5)],
        };
        assert!(matches!(
            floor_to_transform(&w, 1.0, 1.0, 100.0),
            Err(Error::Margin { .. })
        ));
    }

    #[test]
    fn drawdown_zero_floor_returns_input() {
        let (x, seq) = positive_path(2, 8);
        let s = solve_drawdown(&FloorFunction::Zero, &x, x.x(0), &seq, 1.0, &TrendSpec::stochastic()).unwrap();
        assert!(s.y.sup_distance(&x).unwrap() < 1e-11);
        assert!(s.constraint.holds);
    }

    #[test]
    fn jump_to_new_max_is_rejected() {
        let g = Arc::new(TimeGrid::dyadic(1.0, 4).unwrap());
        let x = generate(&Generator::Step { c: 1.0, t0: 0.5, x0: 1.0 }, &g).unwrap();
        let seq = PartitionSequence::dyadic(&g, 1, 4).unwrap();
        let r = azema_yor_path(&MonotoneC2Function::identity(0.0), &x, &seq, 1.0, &TrendSpec::deterministic());
        assert!(matches!(r, Err(Error::DiscontinuousMaximum { t }) if t == 0.5));
    }

    #[test]
    fn uniqueness_rejects_different_starts() {
        let (x, seq) = positive_path(3, 6);
        let y = x.scale(2.0);
        assert!(matches!(
            log_return_uniqueness(&x, &y, &seq, 1e-9, 1e-6),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn inverse_of_power() {
        let u = MonotoneC2Function::power(1.0, 0.5, 1.0).unwrap();
        let v = u.inverse().unwrap();
        assert!((v.eval(2.0) - 4.0).abs() < 1e-12);
        assert!((v.d1(2.0) - 4.0).abs() < 1e-9);
        assert!((v.d2(2.0) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn table_floor_is_c1() {
        let w = FloorFunction::Table {
            points: vec![(0.0, 0.0), (1.0, 0.2), (2.0, 0.9), (4.0, 1.0)],
        };
        for y in [0.5, 1.0, 1.7, 3.0] {
            let h = 1e-6;
            let fd = (w.eval(y + h) - w.eval(y - h)) / (2.0 * h);
            assert!((fd - w.derivative(y)).abs() < 1e-5);
        }
    }
}
