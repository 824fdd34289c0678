//! Discrete quadratic (co)variation along partitions, its limit across a
//! partition sequence, discrete measures and weighted-sum convergence.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{sup_distance, Accumulator, Status, TrendReport, TrendSpec};
use crate::partition::{Partition, PartitionSequence};
use crate::path::{check_same_grid, same_grid, GridPath, TimeGrid};

/// Truncated sum `sum_i (X_{t_{i+1} ^ t} - X_{t_i ^ t})^2`.
pub fn discrete_qv(path: &GridPath, p: &Partition, t: f64) -> Result<f64> {
    discrete_cov(path, path, p, t)
}

pub fn discrete_cov(x: &GridPath, y: &GridPath, p: &Partition, t: f64) -> Result<f64> {
    x.expect_scalar()?;
    y.expect_scalar()?;
    check_same_grid(x, y)?;
    if !same_grid(x.grid(), p.grid()) {
        return Err(Error::GridMismatch);
    }
    let end = x.grid().index_at(t)?;
    let mut acc = Accumulator::new();
    for w in p.indices().windows(2) {
        if w[0] > end {
            break;
        }
        let hi = w[1].min(end);
        acc.add((x.x(hi) - x.x(w[0])) * (y.x(hi) - y.x(w[0])));
    }
    Ok(acc.value())
}

/// `t -> [X,Y]^pi_t` at every host-grid time (truncated convention).
pub fn cov_curve(x: &GridPath, y: &GridPath, p: &Partition) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n];
    let mut acc = Accumulator::new();
    for w in p.indices().windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let (x0, y0) = (x.x(lo), y.x(lo));
        let base = acc.value();
        for j in lo + 1..hi {
            out[j] = base + (x.x(j) - x0) * (y.x(j) - y0);
        }
        acc.add((x.x(hi) - x0) * (y.x(hi) - y0));
        out[hi] = acc.value();
    }
    out
}

pub fn qv_curve(x: &GridPath, p: &Partition) -> Vec<f64> {
    cov_curve(x, x, p)
}

/// `t -> sum_{0 < s <= t} dX_s dY_s` over declared jumps.
pub fn jump_cov_curve(x: &GridPath, y: &GridPath) -> Vec<f64> {
    let n = x.len();
    let mut incr = vec![0.0; n];
    for &i in x.jumps().keys() {
        incr[i] = x.jump_x(i) * y.jump_x(i);
    }
    let mut acc = Accumulator::new();
    incr.iter()
        .map(|&d| {
            acc.add(d);
            acc.value()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpViolation {
    pub index: usize,
    pub t: f64,
    pub observed: f64,
    pub expected: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JumpCheck {
    pub checked: usize,
    /// Largest `|observed - expected| - tolerance`; positive means a violation.
    pub worst_excess: f64,
    pub violations: Vec<JumpViolation>,
}

impl JumpCheck {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QvResult {
    pub levels: Vec<u32>,
    /// Per-level curves on the host grid.
    pub curves: Vec<Vec<f64>>,
    /// Limit estimate on the host grid.
    pub limit: Vec<f64>,
    pub jump_part: Vec<f64>,
    pub continuous_part: Vec<f64>,
    /// Per-level sup-distance to the limit. Excludes the top level unless the
    /// limit comes from the finite-variation rule.
    pub gaps: Vec<f64>,
    pub trend: TrendReport,
    pub status: Status,
    pub jump_check: JumpCheck,
    /// The limit was set to the sum of squared jumps because both paths are
    /// flagged finite-variation.
    pub fv_rule: bool,
}

impl QvResult {
    pub fn at(&self, i: usize) -> f64 {
        self.limit[i]
    }

    /// Limit value at time `t` (right-continuous extension between grid times).
    pub fn at_time(&self, grid: &TimeGrid, t: f64) -> Result<f64> {
        Ok(self.limit[grid.index_at(t)?])
    }

    /// Per-level values at grid index `i`.
    pub fn level_values(&self, i: usize) -> Vec<f64> {
        self.curves.iter().map(|c| c[i]).collect()
    }
}

pub fn qv_sequence(path: &GridPath, seq: &PartitionSequence) -> Result<QvResult> {
    qv_sequence_with(path, seq, &TrendSpec::deterministic())
}

pub fn qv_sequence_with(
    path: &GridPath,
    seq: &PartitionSequence,
    trend: &TrendSpec,
) -> Result<QvResult> {
    covariation_with(path, path, seq, trend)
}

pub fn covariation(x: &GridPath, y: &GridPath, seq: &PartitionSequence) -> Result<QvResult> {
    covariation_with(x, y, seq, &TrendSpec::deterministic())
}

/// Covariation by polarization of the quadratic variations of `X + Y`, `X`
/// and `Y`. For `X = Y` this is the quadratic variation itself.
pub fn covariation_with(
    x: &GridPath,
    y: &GridPath,
    seq: &PartitionSequence,
    trend: &TrendSpec,
) -> Result<QvResult> {
    x.expect_scalar()?;
    y.expect_scalar()?;
    check_same_grid(x, y)?;
    if !same_grid(x.grid(), seq.grid()) {
        return Err(Error::GridMismatch);
    }
    let fv_rule = x.is_finite_variation() && y.is_finite_variation();
    let top = seq.top();
    let polarize = |a: &[f64], b: &[f64], c: &[f64]| -> Vec<f64> {
        a.iter()
            .zip(b)
            .zip(c)
            .map(|((s, u), v)| 0.5 * (s - u - v))
            .collect()
    };

    let identical = x == y;
    let curves: Vec<Vec<f64>> = if identical {
        seq.partitions().par_iter().map(|p| qv_curve(x, p)).collect()
    } else {
        let sum = x.add(y)?;
        seq.partitions()
            .par_iter()
            .map(|p| polarize(&qv_curve(&sum, p), &qv_curve(x, p), &qv_curve(y, p)))
            .collect()
    };
    let jump_part = if identical {
        jump_cov_curve(x, x)
    } else {
        let sum = x.add(y)?;
        polarize(
            &jump_cov_curve(&sum, &sum),
            &jump_cov_curve(x, x),
            &jump_cov_curve(y, y),
        )
    };

    let (limit, gaps, jump_check) = if fv_rule {
        let gaps: Vec<f64> = curves.iter().map(|c| sup_distance(c, &jump_part)).collect();
        let check = JumpCheck {
            checked: union_jumps(x, y).len(),
            ..JumpCheck::default()
        };
        (jump_part.clone(), gaps, check)
    } else {
        let limit = curves.last().unwrap().clone();
        let gaps: Vec<f64> = curves[..curves.len() - 1]
            .iter()
            .map(|c| sup_distance(c, &limit))
            .collect();
        (limit, gaps, check_jump_condition(x, y, top))
    };
    let continuous_part: Vec<f64> = limit.iter().zip(&jump_part).map(|(a, b)| a - b).collect();
    let report = trend.check(&gaps);
    let status = if !jump_check.passed() {
        Status::NoQv
    } else if fv_rule {
        Status::Converged
    } else {
        Status::from_trend(&report)
    };
    Ok(QvResult {
        levels: seq.levels().to_vec(),
        curves,
        limit,
        jump_part,
        continuous_part,
        gaps,
        trend: report,
        status,
        jump_check,
        fv_rule,
    })
}

fn union_jumps(x: &GridPath, y: &GridPath) -> Vec<usize> {
    let mut idx: Vec<usize> = x.jumps().keys().chain(y.jumps().keys()).copied().collect();
    idx.sort_unstable();
    idx.dedup();
    idx
}

/// Continuous part `X - sum of declared jumps up to t`.
fn continuous_values(x: &GridPath) -> Vec<f64> {
    let mut acc = 0.0;
    (0..x.len())
        .map(|i| {
            acc += x.jump_x(i);
            x.x(i) - acc
        })
        .collect()
}

fn diameter(v: &[f64]) -> f64 {
    let (lo, hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    hi - lo
}

/// Jump of the top-level curve at each declared jump against `dX dY`.
///
/// The truncated curve jumps by `dX (Y_{t-} - Y_{t_i}) + dY (X_{t-} - X_{t_i}) + dX dY`
/// where `t_i` is the partition point before the jump. The cross terms are
/// bounded by the oscillation of the continuous parts over `[t_i, t]`, so
/// they are added to the float tolerance; a second jump inside the same
/// interval is not covered and is reported.
pub fn check_jump_condition(x: &GridPath, y: &GridPath, top: &Partition) -> JumpCheck {
    let xc = continuous_values(x);
    let yc = continuous_values(y);
    let mut check = JumpCheck {
        worst_excess: f64::NEG_INFINITY,
        ..JumpCheck::default()
    };
    for j in union_jumps(x, y) {
        let k = top.straddling(j);
        let i0 = top.indices()[k];
        let (dx, dy) = (x.jump_x(j), y.jump_x(j));
        let expected = dx * dy;
        let observed = (x.x(j) - x.x(i0)) * (y.x(j) - y.x(i0))
            - (x.left_x(j) - x.x(i0)) * (y.left_x(j) - y.x(i0));
        let wx = diameter(&xc[i0..=j]);
        let wy = diameter(&yc[i0..=j]);
        let tolerance = (1e-6 * expected.abs()).max(1e-9) + dx.abs() * wy + dy.abs() * wx;
        let excess = (observed - expected).abs() - tolerance;
        check.checked += 1;
        check.worst_excess = check.worst_excess.max(excess);
        if excess > 0.0 {
            check.violations.push(JumpViolation {
                index: j,
                t: x.time(j),
                observed,
                expected,
                tolerance,
            });
        }
    }
    if check.checked == 0 {
        check.worst_excess = 0.0;
    }
    check
}

/// `[X^k, X^l]` for all component pairs of a `d`-dimensional path.
pub fn cov_matrix(
    x: &GridPath,
    seq: &PartitionSequence,
    trend: &TrendSpec,
) -> Result<Vec<Vec<QvResult>>> {
    let comps = (0..x.dim())
        .map(|k| x.component(k))
        .collect::<Result<Vec<_>>>()?;
    let d = comps.len();
    let mut upper: Vec<Vec<Option<QvResult>>> = vec![vec![None; d]; d];
    for k in 0..d {
        for l in k..d {
            upper[k][l] = Some(covariation_with(&comps[k], &comps[l], seq, trend)?);
        }
    }
    let mut out = Vec::with_capacity(d);
    for k in 0..d {
        let mut row = Vec::with_capacity(d);
        for l in 0..d {
            let (a, b) = if k <= l { (k, l) } else { (l, k) };
            row.push(upper[a][b].clone().unwrap());
        }
        out.push(row);
    }
    Ok(out)
}

/// `mu = sum_i a_i delta_{t_i}` with atoms at host-grid indices.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    grid: Arc<TimeGrid>,
    atoms: Vec<(usize, f64)>,
}

impl DiscreteMeasure {
    /// Atoms are sorted and atoms at the same index merged.
    pub fn new(grid: Arc<TimeGrid>, mut atoms: Vec<(usize, f64)>) -> Result<Self> {
        for &(i, w) in &atoms {
            if i >= grid.len() {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: grid.len(),
                });
            }
            if !w.is_finite() {
                return Err(Error::NonFinite(format!("atom at t = {}", grid.time(i))));
            }
        }
        atoms.sort_by_key(|a| a.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(atoms.len());
        for (i, w) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += w,
                _ => merged.push((i, w)),
            }
        }
        Ok(Self {
            grid,
            atoms: merged,
        })
    }

    pub fn dirac(grid: Arc<TimeGrid>, t: f64, weight: f64) -> Result<Self> {
        let i = grid.require(t)?;
        Self::new(grid, vec![(i, weight)])
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn atoms(&self) -> &[(usize, f64)] {
        &self.atoms
    }

    pub fn atom_at(&self, i: usize) -> f64 {
        self.atoms
            .binary_search_by_key(&i, |a| a.0)
            .map(|k| self.atoms[k].1)
            .unwrap_or(0.0)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.atoms.iter().all(|a| a.1 >= 0.0)
    }

    pub fn total(&self) -> f64 {
        let mut acc = Accumulator::new();
        for a in &self.atoms {
            acc.add(a.1);
        }
        acc.value()
    }

    /// `F(t) = mu([0, t])`.
    pub fn distribution(&self, t: f64) -> Result<f64> {
        let end = self.grid.index_at(t)?;
        let mut acc = Accumulator::new();
        for a in self.atoms.iter().take_while(|a| a.0 <= end) {
            acc.add(a.1);
        }
        Ok(acc.value())
    }

    /// `int_[0,t] f(s) mu(ds)`.
    pub fn integrate(&self, f: &GridPath, t: f64) -> Result<f64> {
        self.integrate_by(f, t, |f, i| f.x(i))
    }

    /// `int_[0,t] f(s-) mu(ds)`.
    pub fn integrate_left(&self, f: &GridPath, t: f64) -> Result<f64> {
        self.integrate_by(f, t, |f, i| f.left_x(i))
    }

    fn integrate_by(
        &self,
        f: &GridPath,
        t: f64,
        eval: impl Fn(&GridPath, usize) -> f64,
    ) -> Result<f64> {
        f.expect_scalar()?;
        if !same_grid(f.grid(), &self.grid) {
            return Err(Error::GridMismatch);
        }
        let end = self.grid.index_at(t)?;
        let mut acc = Accumulator::new();
        for &(i, w) in self.atoms.iter().take_while(|a| a.0 <= end) {
            acc.add(eval(f, i) * w);
        }
        Ok(acc.value())
    }

    /// `sum_i mu(]t_i, t_{i+1}]) delta_{t_i}`.
    pub fn pushforward(&self, p: &Partition) -> Result<DiscreteMeasure> {
        if !same_grid(p.grid(), &self.grid) {
            return Err(Error::GridMismatch);
        }
        let mut out = Vec::with_capacity(p.len() - 1);
        let mut it = self.atoms.iter().peekable();
        for w in p.indices().windows(2) {
            while it.next_if(|a| a.0 <= w[0]).is_some() {}
            let mut acc = Accumulator::new();
            while let Some(a) = it.next_if(|a| a.0 <= w[1]) {
                acc.add(a.1);
            }
            out.push((w[0], acc.value()));
        }
        Self::new(self.grid.clone(), out)
    }
}

/// Atoms `(t_i, (X_{t_{i+1}} - X_{t_i})(Y_{t_{i+1}} - Y_{t_i}))`.
pub fn qv_measure(x: &GridPath, y: &GridPath, p: &Partition) -> Result<DiscreteMeasure> {
    x.expect_scalar()?;
    y.expect_scalar()?;
    check_same_grid(x, y)?;
    if !same_grid(x.grid(), p.grid()) {
        return Err(Error::GridMismatch);
    }
    let atoms = p
        .indices()
        .windows(2)
        .map(|w| (w[0], (x.x(w[1]) - x.x(w[0])) * (y.x(w[1]) - y.x(w[0]))))
        .collect();
    DiscreteMeasure::new(x.grid().clone(), atoms)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureQvReport {
    pub t: f64,
    pub levels: Vec<u32>,
    pub qv: Vec<f64>,
    pub measure: Vec<f64>,
    pub diff: Vec<f64>,
    /// `4 sup_{s <= t + |pi|} |X_s| |X_{t_{i+1}} - X_t|` per level.
    pub bound: Vec<f64>,
    pub within_bound: bool,
}

/// Compares `[X,X]^pi_t` and `mu^pi_X([0,t])` level by level.
pub fn measure_vs_qv_check(
    x: &GridPath,
    seq: &PartitionSequence,
    t: f64,
) -> Result<MeasureQvReport> {
    x.expect_scalar()?;
    let grid = x.grid();
    let end = grid.index_at(t)?;
    let mut report = MeasureQvReport {
        t,
        levels: seq.levels().to_vec(),
        qv: vec![],
        measure: vec![],
        diff: vec![],
        bound: vec![],
        within_bound: true,
    };
    for p in seq.partitions() {
        let qv = discrete_qv(x, p, t)?;
        let mu = qv_measure(x, x, p)?.distribution(t)?;
        let k = p.interval_of(end);
        let bound = if k + 1 < p.len() {
            let next = p.indices()[k + 1];
            let reach = grid.time(end) + p.mesh();
            let sup = (0..grid.len())
                .take_while(|&i| grid.time(i) <= reach)
                .fold(0.0_f64, |m, i| m.max(x.x(i).abs()));
            4.0 * sup * (x.x(next) - x.x(end)).abs()
        } else {
            0.0
        };
        let diff = (qv - mu).abs();
        let slack = 1e-12 * (1.0 + qv.abs().max(mu.abs()));
        if diff > bound + slack {
            report.within_bound = false;
        }
        report.qv.push(qv);
        report.measure.push(mu);
        report.diff.push(diff);
        report.bound.push(bound);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSumReport {
    pub t: f64,
    pub levels: Vec<u32>,
    pub sums: Vec<f64>,
    pub target: f64,
    pub gaps: Vec<f64>,
    pub trend: TrendReport,
    pub status: Status,
}

/// Cumulative `sum_{j <= i} h_j (F_j - F_{j-1})`, with `h_j` the integrand's
/// left limit at grid time `j`.
pub fn stieltjes_left(integrand_left: &[f64], integrator: &[f64]) -> Vec<f64> {
    let mut acc = Accumulator::new();
    let mut out = Vec::with_capacity(integrator.len());
    out.push(0.0);
    for j in 1..integrator.len() {
        acc.add(integrand_left[j] * (integrator[j] - integrator[j - 1]));
        out.push(acc.value());
    }
    out
}

/// `int_[0,t] g(X_s, Y_s) mu^{pi_n}_{X^i, X^j}(ds)` per level against the
/// Stieltjes target `int_[0,t] g(X_{s-}, Y_{s-}) d[X^i, X^j]_s`.
#[allow(clippy::too_many_arguments)]
pub fn weighted_sum_limit(
    g: &dyn Fn(&[f64], &[f64]) -> f64,
    x: &GridPath,
    y: &GridPath,
    i: usize,
    j: usize,
    seq: &PartitionSequence,
    t: f64,
    trend: &TrendSpec,
) -> Result<WeightedSumReport> {
    check_same_grid(x, y)?;
    let xi = x.component(i)?;
    let xj = x.component(j)?;
    let end = x.grid().index_at(t)?;
    let eval = |xv: &[f64], yv: &[f64], at: f64| -> Result<f64> {
        let v = g(xv, yv);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(format!("weight function at t = {at}")))
        }
    };

    let mut sums = Vec::with_capacity(seq.len());
    for p in seq.partitions() {
        let mu = qv_measure(&xi, &xj, p)?;
        let mut acc = Accumulator::new();
        for &(k, w) in mu.atoms().iter().take_while(|a| a.0 <= end) {
            acc.add(eval(x.value(k), y.value(k), x.time(k))? * w);
        }
        sums.push(acc.value());
    }

    let qv = covariation_with(&xi, &xj, seq, trend)?;
    let mut acc = Accumulator::new();
    for k in 1..=end {
        let d = qv.limit[k] - qv.limit[k - 1];
        if d != 0.0 {
            let w = eval(&x.left_limit(k)?, &y.left_limit(k)?, x.time(k))?;
            acc.add(w * d);
        }
    }
    let target = acc.value();
    let gaps: Vec<f64> = sums.iter().map(|s| (s - target).abs()).collect();
    let report = trend.check(&gaps);
    let status = if qv.status == Status::NoQv {
        Status::NoQv
    } else {
        Status::from_trend(&report)
    };
    Ok(WeightedSumReport {
        t,
        levels: seq.levels().to_vec(),
        sums,
        target,
        gaps,
        trend: report,
        status,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarCheck {
    pub index: usize,
    pub t: f64,
    pub mass: f64,
    /// Weight `a^n_{i_n}` of the atom whose interval `]t_i, t_{i+1}]` holds the point.
    pub weights: Vec<f64>,
    pub gaps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureConvergenceReport {
    pub t: f64,
    pub levels: Vec<u32>,
    pub integrals: Vec<f64>,
    pub target: f64,
    pub errors: Vec<f64>,
    /// `|mu_n([0,t]) - mu([0,t])|` per level.
    pub distribution_gaps: Vec<f64>,
    pub star: Vec<StarCheck>,
    pub trend: TrendReport,
}

/// Checks `int_[0,t] f dmu_n -> int_[0,t] f(s-) dmu` for nonnegative
/// discrete measures `mu_n` carried by the partitions of `seq`.
pub fn measure_convergence_check(
    mus: &[DiscreteMeasure],
    seq: &PartitionSequence,
    mu: &DiscreteMeasure,
    f: &GridPath,
    t: f64,
    trend: &TrendSpec,
) -> Result<MeasureConvergenceReport> {
    if mus.len() != seq.len() {
        return Err(Error::InvalidParameter(format!(
            "{} measures for {} partition levels",
            mus.len(),
            seq.len()
        )));
    }
    let grid = mu.grid();
    for m in mus.iter().chain(std::iter::once(mu)) {
        if !same_grid(m.grid(), grid) {
            return Err(Error::GridMismatch);
        }
        if let Some(&(i, w)) = m.atoms().iter().find(|a| a.1 < 0.0) {
            return Err(Error::NegativeAtom {
                t: grid.time(i),
                weight: w,
            });
        }
    }
    let end = grid.index_at(t)?;
    let target = mu.integrate_left(f, t)?;
    let mass = mu.distribution(t)?;
    let mut integrals = Vec::with_capacity(mus.len());
    let mut distribution_gaps = Vec::with_capacity(mus.len());
    for m in mus {
        integrals.push(m.integrate(f, t)?);
        distribution_gaps.push((m.distribution(t)? - mass).abs());
    }
    let errors: Vec<f64> = integrals.iter().map(|v| (v - target).abs()).collect();

    let mut star = Vec::new();
    for &(i, a) in mu.atoms().iter().filter(|a| a.0 > 0 && a.0 <= end) {
        let weights: Vec<f64> = seq
            .partitions()
            .iter()
            .zip(mus)
            .map(|(p, m)| m.atom_at(p.indices()[p.straddling(i)]))
            .collect();
        let gaps = weights.iter().map(|w| (w - a).abs()).collect();
        star.push(StarCheck {
            index: i,
            t: grid.time(i),
            mass: a,
            weights,
            gaps,
        });
    }
    let report = trend.check(&errors);
    Ok(MeasureConvergenceReport {
        t,
        levels: seq.levels().to_vec(),
        integrals,
        target,
        errors,
        distribution_gaps,
        star,
        trend: report,
    })
}
