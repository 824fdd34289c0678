//! Non-anticipative Riemann sums, the Itô–Föllmer integral, the pathwise
//! Itô formula, integration by parts, associativity and the quadratic
//! variation of integral paths.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::{check_derivatives, C12Function};
use crate::numeric::{sup_distance, Accumulator, Status, TrendReport, TrendSpec};
use crate::partition::{Partition, PartitionSequence};
use crate::path::{check_same_grid, same_grid, FvPath, GridPath};
use crate::quadvar::{
    cov_matrix, covariation_with, discrete_cov, stieltjes_left, QvResult,
};

/// Number of grid points at which derivatives are checked when an
/// admissible integrand is built.
const DERIVATIVE_SAMPLES: usize = 8;

/// `xi_t = grad_x f(A_t, X_t)` together with its witness `(f, A, X)`.
#[derive(Debug, Clone)]
pub struct AdmissibleIntegrand {
    f: Arc<dyn C12Function>,
    a: Option<FvPath>,
    x: GridPath,
    xi: GridPath,
}

impl AdmissibleIntegrand {
    pub fn new(f: Arc<dyn C12Function>, a: Option<FvPath>, x: GridPath) -> Result<Self> {
        let m = a.as_ref().map_or(0, FvPath::dim);
        if f.fv_dim() != m {
            return Err(Error::DimensionMismatch {
                expected: f.fv_dim(),
                got: m,
            });
        }
        if f.qv_dim() != x.dim() {
            return Err(Error::DimensionMismatch {
                expected: f.qv_dim(),
                got: x.dim(),
            });
        }
        if let Some(a) = &a {
            check_same_grid(a.path(), &x)?;
        }
        let n = x.len();
        check_domain(f.as_ref(), a.as_ref(), &x, n - 1)?;
        let step = (n / DERIVATIVE_SAMPLES).max(1);
        for i in (0..n).step_by(step) {
            check_derivatives(f.as_ref(), &fv_value(a.as_ref(), i), x.value(i))?;
        }

        let d = x.dim();
        let mut values = Vec::with_capacity(n * d);
        for i in 0..n {
            values.extend(f.grad_x(&fv_value(a.as_ref(), i), x.value(i)));
        }
        let mut jumps = BTreeMap::new();
        for i in joint_jumps(a.as_ref(), &x) {
            let left = f.grad_x(&fv_left(a.as_ref(), i), &x.left_limit(i)?);
            let dxi: Vec<f64> = (0..d).map(|k| values[i * d + k] - left[k]).collect();
            jumps.insert(i, dxi);
        }
        let fv = x.is_finite_variation();
        let xi = GridPath::new(x.grid().clone(), d, values, jumps)?.with_finite_variation(fv);
        Ok(Self { f, a, x, xi })
    }

    pub fn function(&self) -> &Arc<dyn C12Function> {
        &self.f
    }

    pub fn fv(&self) -> Option<&FvPath> {
        self.a.as_ref()
    }

    pub fn x(&self) -> &GridPath {
        &self.x
    }

    /// Realized integrand values.
    pub fn xi(&self) -> &GridPath {
        &self.xi
    }

    /// `f(A_t, X_t)` on the grid.
    pub fn potential(&self) -> Result<GridPath> {
        let n = self.x.len();
        let values: Vec<f64> = (0..n)
            .map(|i| self.f.eval(&fv_value(self.a.as_ref(), i), self.x.value(i)))
            .collect();
        let mut jumps = BTreeMap::new();
        for i in joint_jumps(self.a.as_ref(), &self.x) {
            let left = self
                .f
                .eval(&fv_left(self.a.as_ref(), i), &self.x.left_limit(i)?);
            jumps.insert(i, vec![values[i] - left]);
        }
        GridPath::new(self.x.grid().clone(), 1, values, jumps)
    }
}

fn fv_value(a: Option<&FvPath>, i: usize) -> Vec<f64> {
    a.map(|a| a.path().value(i).to_vec()).unwrap_or_default()
}

fn fv_left(a: Option<&FvPath>, i: usize) -> Vec<f64> {
    a.map(|a| a.path().left_limit(i).expect("index checked by caller"))
        .unwrap_or_default()
}

fn joint_jumps(a: Option<&FvPath>, x: &GridPath) -> Vec<usize> {
    let mut idx: Vec<usize> = x.jumps().keys().copied().collect();
    if let Some(a) = a {
        idx.extend(a.path().jumps().keys().copied());
    }
    idx.sort_unstable();
    idx.dedup();
    idx
}

/// Every `(A_t, X_t)` and `(A_{t-}, X_{t-})` up to grid index `end` must lie in the domain.
fn check_domain(
    f: &dyn C12Function,
    a: Option<&FvPath>,
    x: &GridPath,
    end: usize,
) -> Result<()> {
    for i in 0..=end {
        let ok = f.in_domain(&fv_value(a, i), x.value(i))
            && f.in_domain(&fv_left(a, i), &x.left_limit(i)?);
        if !ok {
            return Err(Error::Domain { t: x.time(i) });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// `sum <xi_{t_i}, X_{t_{i+1} ^ t} - X_{t_i ^ t}>`.
    Truncated,
    /// `sum_{t_i <= t} <xi_{t_i}, X_{t_{i+1}} - X_{t_i}>`.
    Restricted,
}

fn check_pair(xi: &GridPath, x: &GridPath, p: &Partition) -> Result<()> {
    check_same_grid(xi, x)?;
    if xi.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: xi.dim(),
        });
    }
    if !same_grid(x.grid(), p.grid()) {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

#[inline]
fn increment_dot(xi: &GridPath, x: &GridPath, at: usize, lo: usize, hi: usize) -> f64 {
    let (g, x0, x1) = (xi.value(at), x.value(lo), x.value(hi));
    let mut s = 0.0;
    for k in 0..g.len() {
        s += g[k] * (x1[k] - x0[k]);
    }
    s
}

/// Left-point Riemann sum of `xi` against `X` along `p`, up to `t`.
pub fn riemann_sum(
    xi: &GridPath,
    x: &GridPath,
    p: &Partition,
    t: f64,
    convention: Convention,
) -> Result<f64> {
    check_pair(xi, x, p)?;
    let end = x.grid().index_at(t)?;
    let mut acc = Accumulator::new();
    for w in p.indices().windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if lo > end {
            break;
        }
        let hi = match convention {
            Convention::Truncated => hi.min(end),
            Convention::Restricted => hi,
        };
        acc.add(increment_dot(xi, x, lo, lo, hi));
    }
    Ok(acc.value())
}

/// Truncated Riemann sums at every host-grid time.
pub fn riemann_path(xi: &GridPath, x: &GridPath, p: &Partition) -> Result<Vec<f64>> {
    check_pair(xi, x, p)?;
    let mut out = vec![0.0; x.len()];
    let mut acc = Accumulator::new();
    for w in p.indices().windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let base = acc.value();
        for j in lo + 1..hi {
            out[j] = base + increment_dot(xi, x, lo, lo, j);
        }
        acc.add(increment_dot(xi, x, lo, lo, hi));
        out[hi] = acc.value();
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub enum Integrand<'a> {
    Witnessed(&'a AdmissibleIntegrand),
    /// A bare path; convergence is only claimed when the integrator has finite variation.
    Raw(&'a GridPath),
}

impl<'a> Integrand<'a> {
    pub fn path(&self) -> &'a GridPath {
        match self {
            Integrand::Witnessed(a) => a.xi(),
            Integrand::Raw(p) => p,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IntegralResult {
    pub levels: Vec<u32>,
    /// Per-level truncated sums on the host grid.
    pub curves: Vec<Vec<f64>>,
    /// Top-level path; declared jumps are `<xi_{t-}, dX_t>`.
    pub estimate: GridPath,
    /// Per-level sup-distance to the top level (top level excluded).
    pub gaps: Vec<f64>,
    pub trend: TrendReport,
    pub status: Status,
    /// Largest `|<xi_{t_i}, dX_t> - <xi_{t-}, dX_t>|` over declared jumps, `t_i`
    /// the top-level point before the jump.
    pub max_jump_error: f64,
}

impl IntegralResult {
    pub fn value_at(&self, i: usize) -> f64 {
        self.estimate.x(i)
    }
}

pub fn follmer_integral(
    integrand: Integrand<'_>,
    x: &GridPath,
    seq: &PartitionSequence,
    trend: &TrendSpec,
) -> Result<IntegralResult> {
    let xi = integrand.path();
    if let Integrand::Witnessed(w) = integrand {
        if w.x() != x {
            return Err(Error::InvalidParameter(
                "integrand is witnessed against a different path".into(),
            ));
        }
    }
    if !same_grid(x.grid(), seq.grid()) {
        return Err(Error::GridMismatch);
    }
    let curves = seq
        .partitions()
        .par_iter()
        .map(|p| riemann_path(xi, x, p))
        .collect::<Result<Vec<_>>>()?;
    let top = curves.last().unwrap().clone();
    let gaps: Vec<f64> = curves[..curves.len() - 1]
        .iter()
        .map(|c| sup_distance(c, &top))
        .collect();

    let top_part = seq.top();
    let mut jumps = BTreeMap::new();
    let mut max_jump_error = 0.0_f64;
    for (&j, dx) in x.jumps() {
        let left = xi.left_limit(j)?;
        let at = top_part.indices()[top_part.straddling(j)];
        let g = xi.value(at);
        let exact: f64 = left.iter().zip(dx).map(|(a, b)| a * b).sum();
        let sampled: f64 = g.iter().zip(dx).map(|(a, b)| a * b).sum();
        max_jump_error = max_jump_error.max((exact - sampled).abs());
        jumps.insert(j, vec![exact]);
    }
    let estimate = GridPath::new(x.grid().clone(), 1, top, jumps)?
        .with_finite_variation(x.is_finite_variation());

    let report = trend.check(&gaps);
    let status = match integrand {
        Integrand::Raw(_) if !x.is_finite_variation() => Status::Unwitnessed,
        _ => Status::from_trend(&report),
    };
    Ok(IntegralResult {
        levels: seq.levels().to_vec(),
        curves,
        estimate,
        gaps,
        trend: report,
        status,
        max_jump_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItoReport {
    pub t: f64,
    pub levels: Vec<u32>,
    /// `f(A_t, X_t) - f(A_0, X_0)`.
    pub lhs: f64,
    /// Riemann sums of `grad_x f` against `X`.
    pub integral: Vec<f64>,
    /// Riemann sums of `grad_a f` against `A^c`.
    pub drift: Vec<f64>,
    /// Half the Hessian against squared increments with jump products removed.
    pub qv_term: Vec<f64>,
    /// `sum over jumps of f(A_s, X_s) - f(A_{s-}, X_{s-}) - <grad_x f(A_{s-}, X_{s-}), dX_s>`.
    pub jump_term: f64,
    pub residuals: Vec<f64>,
    pub trend: TrendReport,
    pub status: Status,
}

/// Both sides of the pathwise Itô formula at time `t`, with every integral
/// term evaluated along each partition of `seq`.
pub fn ito_formula_eval(
    f: &dyn C12Function,
    a: Option<&FvPath>,
    x: &GridPath,
    seq: &PartitionSequence,
    t: f64,
    trend: &TrendSpec,
) -> Result<ItoReport> {
    let m = a.map_or(0, FvPath::dim);
    if f.fv_dim() != m {
        return Err(Error::DimensionMismatch {
            expected: f.fv_dim(),
            got: m,
        });
    }
    let d = x.dim();
    if f.qv_dim() != d {
        return Err(Error::DimensionMismatch {
            expected: f.qv_dim(),
            got: d,
        });
    }
    if let Some(a) = a {
        check_same_grid(a.path(), x)?;
    }
    if !same_grid(x.grid(), seq.grid()) {
        return Err(Error::GridMismatch);
    }
    let end = x.grid().index_at(t)?;
    check_domain(f, a, x, end)?;

    let lhs = f.eval(&fv_value(a, end), x.value(end)) - f.eval(&fv_value(a, 0), x.value(0));

    // Cumulative sums of dX^k dX^l over declared jumps.
    let mut cum_jumps = vec![0.0; (end + 1) * d * d];
    let mut running = vec![0.0; d * d];
    for i in 0..=end {
        if let Some(dx) = x.jump(i) {
            for k in 0..d {
                for l in 0..d {
                    running[k * d + l] += dx[k] * dx[l];
                }
            }
        }
        cum_jumps[i * d * d..(i + 1) * d * d].copy_from_slice(&running);
    }
    let ac = a.map(FvPath::continuous_part);

    let per_level: Vec<(f64, f64, f64)> = seq
        .partitions()
        .par_iter()
        .map(|p| {
            let (mut integral, mut drift, mut qv) =
                (Accumulator::new(), Accumulator::new(), Accumulator::new());
            for w in p.indices().windows(2) {
                let lo = w[0];
                if lo >= end {
                    break;
                }
                let hi = w[1].min(end);
                let av = fv_value(a, lo);
                let xv = x.value(lo);
                let dx: Vec<f64> = (0..d).map(|k| x.value(hi)[k] - xv[k]).collect();
                let g = f.grad_x(&av, xv);
                integral.add(g.iter().zip(&dx).map(|(u, v)| u * v).sum());
                if let Some(ac) = ac {
                    let ga = f.grad_a(&av, xv);
                    let (c0, c1) = (ac.value(lo), ac.value(hi));
                    drift.add((0..m).map(|k| ga[k] * (c1[k] - c0[k])).sum());
                }
                let h = f.hess_x(&av, xv);
                let mut q = 0.0;
                for k in 0..d {
                    for l in 0..d {
                        let kl = k * d + l;
                        let jumps = cum_jumps[hi * d * d + kl] - cum_jumps[lo * d * d + kl];
                        q += h[kl] * (dx[k] * dx[l] - jumps);
                    }
                }
                qv.add(0.5 * q);
            }
            (integral.value(), drift.value(), qv.value())
        })
        .collect();

    let mut jump = Accumulator::new();
    for i in joint_jumps(a, x).into_iter().filter(|&i| i <= end) {
        let (al, xl) = (fv_left(a, i), x.left_limit(i)?);
        let g = f.grad_x(&al, &xl);
        let dx = x.jump(i).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; d]);
        let df = f.eval(&fv_value(a, i), x.value(i)) - f.eval(&al, &xl);
        jump.add(df - g.iter().zip(&dx).map(|(u, v)| u * v).sum::<f64>());
    }
    let jump_term = jump.value();

    let integral: Vec<f64> = per_level.iter().map(|v| v.0).collect();
    let drift: Vec<f64> = per_level.iter().map(|v| v.1).collect();
    let qv_term: Vec<f64> = per_level.iter().map(|v| v.2).collect();
    let residuals: Vec<f64> = per_level
        .iter()
        .map(|&(i, dr, q)| lhs - i - dr - q - jump_term)
        .collect();
    let abs: Vec<f64> = residuals.iter().map(|r| r.abs()).collect();
    let report = trend.check(&abs);
    Ok(ItoReport {
        t,
        levels: seq.levels().to_vec(),
        lhs,
        integral,
        drift,
        qv_term,
        jump_term,
        residuals,
        trend: report,
        status: Status::from_trend(&report),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IbpReport {
    pub t: f64,
    pub levels: Vec<u32>,
    /// Per-level `|d(XY) - Y dX - X dY - dX dY|` summed, absolute and relative.
    pub discrete_abs: Vec<f64>,
    pub discrete_rel: Vec<f64>,
    pub integral_y_dx: Vec<f64>,
    pub integral_x_dy: Vec<f64>,
    /// `[X,Y]_t` from the covariation limit.
    pub covariation: f64,
    /// `X_t Y_t - X_0 Y_0 - int Y dX - int X dY - [X,Y]_t` per level.
    pub residuals: Vec<f64>,
    pub trend: TrendReport,
    pub status: Status,
}

pub fn integration_by_parts(
    x: &GridPath,
    y: &GridPath,
    seq: &PartitionSequence,
    t: f64,
    trend: &TrendSpec,
) -> Result<IbpReport> {
    x.expect_scalar()?;
    y.expect_scalar()?;
    check_same_grid(x, y)?;
    let end = x.grid().index_at(t)?;
    let lhs = x.x(end) * y.x(end) - x.x(0) * y.x(0);
    let cov: QvResult = covariation_with(x, y, seq, trend)?;
    let covariation = cov.limit[end];

    let mut report = IbpReport {
        t,
        levels: seq.levels().to_vec(),
        discrete_abs: vec![],
        discrete_rel: vec![],
        integral_y_dx: vec![],
        integral_x_dy: vec![],
        covariation,
        residuals: vec![],
        trend: TrendSpec::deterministic().check(&[]),
        status: Status::Inconclusive,
    };
    for p in seq.partitions() {
        let iyx = riemann_sum(y, x, p, t, Convention::Truncated)?;
        let ixy = riemann_sum(x, y, p, t, Convention::Truncated)?;
        let q = discrete_cov(x, y, p, t)?;
        let mut scale = lhs.abs();
        let mut total = 0.0;
        for w in p.indices().windows(2) {
            if w[0] >= end {
                break;
            }
            let (lo, hi) = (w[0], w[1].min(end));
            let (dx, dy) = (x.x(hi) - x.x(lo), y.x(hi) - y.x(lo));
            total += (y.x(lo) * dx).abs() + (x.x(lo) * dy).abs() + (dx * dy).abs();
        }
        scale = scale.max(total);
        let abs = (lhs - (iyx + ixy + q)).abs();
        report.discrete_abs.push(abs);
        report
            .discrete_rel
            .push(if scale > 0.0 { abs / scale } else { abs });
        report.integral_y_dx.push(iyx);
        report.integral_x_dy.push(ixy);
        report.residuals.push(lhs - iyx - ixy - covariation);
    }
    let abs: Vec<f64> = report.residuals.iter().map(|r| r.abs()).collect();
    report.trend = trend.check(&abs);
    report.status = if cov.status == Status::NoQv {
        Status::NoQv
    } else {
        Status::from_trend(&report.trend)
    };
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct IntegralQvReport {
    /// `[Y^1, Y^2]` along the sequence, `Y^k` the top-level integral paths.
    pub qv: QvResult,
    /// `sum_{k,l} int xi^{1,k}_{s-} xi^{2,l}_{s-} d[X^k, X^l]_s` on the grid.
    pub target: Vec<f64>,
    /// Per-level sup-distance between the level curve and the target.
    pub gaps: Vec<f64>,
    pub top_gap: f64,
    pub trend: TrendReport,
    pub status: Status,
}

pub fn qv_of_integral(
    xi: &AdmissibleIntegrand,
    seq: &PartitionSequence,
    trend: &TrendSpec,
) -> Result<IntegralQvReport> {
    covariation_of_integrals(xi, xi, seq, trend)
}

/// Covariation of two integral paths against the same `X`.
pub fn covariation_of_integrals(
    xi1: &AdmissibleIntegrand,
    xi2: &AdmissibleIntegrand,
    seq: &PartitionSequence,
    trend: &TrendSpec,
) -> Result<IntegralQvReport> {
    let x = xi1.x();
    if xi2.x() != x {
        return Err(Error::InvalidParameter(
            "integrands are witnessed against different paths".into(),
        ));
    }
    let y1 = follmer_integral(Integrand::Witnessed(xi1), x, seq, trend)?;
    let y2 = follmer_integral(Integrand::Witnessed(xi2), x, seq, trend)?;
    let qv = covariation_with(&y1.estimate, &y2.estimate, seq, trend)?;

    let d = x.dim();
    let xx = cov_matrix(x, seq, trend)?;
    let n = x.len();
    let mut target = vec![0.0; n];
    for k in 0..d {
        for l in 0..d {
            let w: Vec<f64> = (0..n)
                .map(|i| {
                    let a = xi1.xi().left_limit(i).expect("grid index")[k];
                    let b = xi2.xi().left_limit(i).expect("grid index")[l];
                    a * b
                })
                .collect();
            let part = stieltjes_left(&w, &xx[k][l].limit);
            for (t, v) in target.iter_mut().zip(part) {
                *t += v;
            }
        }
    }
    let gaps: Vec<f64> = qv.curves.iter().map(|c| sup_distance(c, &target)).collect();
    let top_gap = sup_distance(&qv.limit, &target);
    let report = trend.check(&gaps);
    let status = if qv.status == Status::NoQv {
        Status::NoQv
    } else if [y1.status, y2.status].contains(&Status::Inconclusive) {
        Status::Inconclusive
    } else {
        Status::from_trend(&report)
    };
    Ok(IntegralQvReport {
        qv,
        target,
        gaps,
        top_gap,
        trend: report,
        status,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssocReport {
    pub t: f64,
    pub levels: Vec<u32>,
    /// `int <eta_{s-}, dY_s>` per level, `Y` the top-level integral paths.
    pub lhs: Vec<f64>,
    /// `int <sum_k eta^k xi^(k)_{s-}, dX_s>` per level.
    pub rhs: Vec<f64>,
    pub gaps: Vec<f64>,
    pub trend: TrendReport,
    pub status: Status,
}

pub fn associativity_check(
    eta: &GridPath,
    integrands: &[AdmissibleIntegrand],
    x: &GridPath,
    seq: &PartitionSequence,
    t: f64,
    trend: &TrendSpec,
) -> Result<AssocReport> {
    let nu = integrands.len();
    if nu == 0 || eta.dim() != nu {
        return Err(Error::DimensionMismatch {
            expected: nu,
            got: eta.dim(),
        });
    }
    check_same_grid(eta, x)?;
    let mut ys = Vec::with_capacity(nu);
    let mut inconclusive = false;
    for w in integrands {
        let r = follmer_integral(Integrand::Witnessed(w), x, seq, trend)?;
        inconclusive |= r.status != Status::Converged;
        ys.push(r.estimate);
    }
    let refs: Vec<&GridPath> = ys.iter().collect();
    let y = GridPath::stack(&refs)?;

    // Combined integrand sum_k eta^k xi^(k).
    let d = x.dim();
    let n = x.len();
    let combine = |i: usize, left: bool| -> Result<Vec<f64>> {
        let e = if left {
            eta.left_limit(i)?
        } else {
            eta.value(i).to_vec()
        };
        let mut out = vec![0.0; d];
        for (k, w) in integrands.iter().enumerate() {
            let g = if left {
                w.xi().left_limit(i)?
            } else {
                w.xi().value(i).to_vec()
            };
            for l in 0..d {
                out[l] += e[k] * g[l];
            }
        }
        Ok(out)
    };
    let mut values = Vec::with_capacity(n * d);
    for i in 0..n {
        values.extend(combine(i, false)?);
    }
    let mut jumps = BTreeMap::new();
    let mut idx: Vec<usize> = eta.jumps().keys().copied().collect();
    for w in integrands {
        idx.extend(w.xi().jumps().keys().copied());
    }
    idx.sort_unstable();
    idx.dedup();
    for i in idx {
        let left = combine(i, true)?;
        jumps.insert(i, (0..d).map(|l| values[i * d + l] - left[l]).collect());
    }
    let zeta = GridPath::new(x.grid().clone(), d, values, jumps)?;

    let mut lhs = Vec::with_capacity(seq.len());
    let mut rhs = Vec::with_capacity(seq.len());
    for p in seq.partitions() {
        lhs.push(riemann_sum(eta, &y, p, t, Convention::Truncated)?);
        rhs.push(riemann_sum(&zeta, x, p, t, Convention::Truncated)?);
    }
    let gaps: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).collect();
    let report = trend.check(&gaps);
    let status = if inconclusive {
        Status::Inconclusive
    } else {
        Status::from_trend(&report)
    };
    Ok(AssocReport {
        t,
        levels: seq.levels().to_vec(),
        lhs,
        rhs,
        gaps,
        trend: report,
        status,
    })
}

/// Normal form of an integral path: `Y = F(A~, X)` with the augmented
/// finite-variation argument `A~ = (f(A, X) - f(A_0, X_0) - Y, A)` and
/// `F(a0, a, x) = f(a, x) - f(A_0, X_0) - a0`.
#[derive(Debug, Clone)]
pub struct AdmissibleRep {
    pub integrand: AdmissibleIntegrand,
    /// The drift-cancelling component `f(A, X) - f(A_0, X_0) - Y`.
    pub a0: GridPath,
}

impl AdmissibleRep {
    /// `F(A~_t, X_t)`, equal to `Y` on the grid.
    pub fn values(&self) -> Result<GridPath> {
        self.integrand.potential()
    }
}

#[derive(Debug)]
struct Shifted {
    inner: Arc<dyn C12Function>,
    offset: f64,
}

impl C12Function for Shifted {
    fn fv_dim(&self) -> usize {
        self.inner.fv_dim() + 1
    }
    fn qv_dim(&self) -> usize {
        self.inner.qv_dim()
    }
    fn eval(&self, a: &[f64], x: &[f64]) -> f64 {
        self.inner.eval(&a[1..], x) - self.offset - a[0]
    }
    fn grad_a(&self, a: &[f64], x: &[f64]) -> Vec<f64> {
        let mut g = vec![-1.0];
        g.extend(self.inner.grad_a(&a[1..], x));
        g
    }
    fn grad_x(&self, a: &[f64], x: &[f64]) -> Vec<f64> {
        self.inner.grad_x(&a[1..], x)
    }
    fn hess_x(&self, a: &[f64], x: &[f64]) -> Vec<f64> {
        self.inner.hess_x(&a[1..], x)
    }
    fn in_domain(&self, a: &[f64], x: &[f64]) -> bool {
        self.inner.in_domain(&a[1..], x)
    }
}

/// Builds the normal form of `Y = int <xi_{s-}, dX_s>` from `xi`'s witness.
pub fn admissible_rep_of_integral(
    xi: &AdmissibleIntegrand,
    y: &GridPath,
) -> Result<AdmissibleRep> {
    y.expect_scalar()?;
    check_same_grid(y, xi.x())?;
    let x = xi.x();
    let f = xi.function();
    let a = xi.fv();
    let offset = f.eval(&fv_value(a, 0), x.value(0));
    let pot = xi.potential()?;
    let a0 = GridPath::affine(&[(1.0, &pot), (-1.0, y)], -offset)?.with_finite_variation(true);

    let mut parts: Vec<&GridPath> = vec![&a0];
    if let Some(a) = a {
        parts.push(a.path());
    }
    let aug = FvPath::new(GridPath::stack(&parts)?)?;
    let shifted: Arc<dyn C12Function> = Arc::new(Shifted {
        inner: f.clone(),
        offset,
    });
    let integrand = AdmissibleIntegrand::new(shifted, Some(aug), x.clone())?;
    Ok(AdmissibleRep { integrand, a0 })
}
