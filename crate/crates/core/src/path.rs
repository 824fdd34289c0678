//! Cadlag paths sampled on a finite time grid.
//!
//! Values are right-continuous: `values[i]` is the value at `t[i]`. Jumps are
//! declared explicitly at grid times and the left limit at grid time `t[i]` is
//! the value there minus the declared jump. Index 0 never carries a jump.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DyadicInfo {
    pub horizon: f64,
    pub level: u32,
}

/// Strictly increasing sample times starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
    dyadic: Option<DyadicInfo>,
}

/// Largest dyadic level a grid may be built at.
pub const MAX_DYADIC_LEVEL: u32 = 28;

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidGrid("need at least two times".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidGrid(format!("first time is {}, not 0", times[0])));
        }
        for w in times.windows(2) {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::InvalidGrid(format!(
                    "times not strictly increasing at {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self {
            times,
            dyadic: None,
        })
    }

    /// Grid `{k T 2^-level}`.
    pub fn dyadic(horizon: f64, level: u32) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidGrid(format!("horizon {horizon}")));
        }
        if level > MAX_DYADIC_LEVEL {
            return Err(Error::InvalidGrid(format!(
                "dyadic level {level} exceeds {MAX_DYADIC_LEVEL}"
            )));
        }
        let n = 1usize << level;
        let denom = n as f64;
        let times = (0..=n).map(|k| horizon * (k as f64 / denom)).collect();
        Ok(Self {
            times,
            dyadic: Some(DyadicInfo { horizon, level }),
        })
    }

    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        if steps == 0 || !(horizon > 0.0) {
            return Err(Error::InvalidGrid(format!("{steps} steps over {horizon}")));
        }
        let times = (0..=steps)
            .map(|k| horizon * (k as f64 / steps as f64))
            .collect();
        Self::new(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn last_index(&self) -> usize {
        self.times.len() - 1
    }

    pub fn dyadic_info(&self) -> Option<DyadicInfo> {
        self.dyadic
    }

    /// Largest index `i` with `t[i] <= t`.
    pub fn index_at(&self, t: f64) -> Result<usize> {
        if !(t >= 0.0) || t > self.horizon() {
            return Err(Error::TimeOutOfRange {
                t,
                horizon: self.horizon(),
            });
        }
        Ok(self.times.partition_point(|&s| s <= t) - 1)
    }

    /// Index of an exact grid time.
    pub fn find(&self, t: f64) -> Option<usize> {
        self.times
            .binary_search_by(|s| s.partial_cmp(&t).unwrap_or(std::cmp::Ordering::Less))
            .ok()
    }

    pub fn require(&self, t: f64) -> Result<usize> {
        self.find(t).ok_or(Error::NotGridTime(t))
    }
}

pub(crate) fn same_grid(a: &Arc<TimeGrid>, b: &Arc<TimeGrid>) -> bool {
    Arc::ptr_eq(a, b) || a.times == b.times
}

pub(crate) fn check_same_grid(a: &GridPath, b: &GridPath) -> Result<()> {
    if same_grid(&a.grid, &b.grid) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// A `dim`-dimensional cadlag path on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    grid: Arc<TimeGrid>,
    dim: usize,
    values: Vec<f64>,
    jumps: BTreeMap<usize, Vec<f64>>,
    finite_variation: bool,
}

impl GridPath {
    /// `values` is row-major: `values[i * dim + k]` is component `k` at `t[i]`.
    pub fn new(
        grid: Arc<TimeGrid>,
        dim: usize,
        values: Vec<f64>,
        jumps: BTreeMap<usize, Vec<f64>>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidPath("dimension 0".into()));
        }
        if values.len() != grid.len() * dim {
            return Err(Error::InvalidPath(format!(
                "{} values for {} grid points of dimension {dim}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "path value at t = {}",
                grid.time(pos / dim)
            )));
        }
        for (&i, dx) in &jumps {
            if i == 0 {
                return Err(Error::InvalidPath("jump declared at t = 0".into()));
            }
            if i >= grid.len() {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: grid.len(),
                });
            }
            if dx.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: dx.len(),
                });
            }
            if dx.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("jump at t = {}", grid.time(i))));
            }
        }
        Ok(Self {
            grid,
            dim,
            values,
            jumps,
            finite_variation: false,
        })
    }

    pub fn scalar(
        grid: Arc<TimeGrid>,
        values: Vec<f64>,
        jumps: impl IntoIterator<Item = (usize, f64)>,
    ) -> Result<Self> {
        let jumps = jumps.into_iter().map(|(i, d)| (i, vec![d])).collect();
        Self::new(grid, 1, values, jumps)
    }

    pub fn continuous(grid: Arc<TimeGrid>, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, 1, values, BTreeMap::new())
    }

    pub fn constant(grid: Arc<TimeGrid>, value: f64) -> Self {
        let n = grid.len();
        Self {
            grid,
            dim: 1,
            values: vec![value; n],
            jumps: BTreeMap::new(),
            finite_variation: true,
        }
    }

    /// Marks the path as having finite variation on the grid horizon.
    pub fn with_finite_variation(mut self, fv: bool) -> Self {
        self.finite_variation = fv;
        self
    }

    pub fn is_finite_variation(&self) -> bool {
        self.finite_variation
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.grid.time(i)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// First component at index `i`.
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.values[i * self.dim]
    }

    pub fn jumps(&self) -> &BTreeMap<usize, Vec<f64>> {
        &self.jumps
    }

    pub fn jump(&self, i: usize) -> Option<&[f64]> {
        self.jumps.get(&i).map(Vec::as_slice)
    }

    /// First component of the jump at `i`, zero if none is declared.
    #[inline]
    pub fn jump_x(&self, i: usize) -> f64 {
        self.jumps.get(&i).map_or(0.0, |d| d[0])
    }

    pub fn has_jumps(&self) -> bool {
        !self.jumps.is_empty()
    }

    pub fn left_limit(&self, i: usize) -> Result<Vec<f64>> {
        if i >= self.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.len(),
            });
        }
        let mut v = self.value(i).to_vec();
        if let Some(d) = self.jump(i) {
            for (a, b) in v.iter_mut().zip(d) {
                *a -= b;
            }
        }
        Ok(v)
    }

    /// First component of the left limit at `i`.
    #[inline]
    pub fn left_x(&self, i: usize) -> f64 {
        self.x(i) - self.jump_x(i)
    }

    pub fn scalar_values(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.x(i)).collect()
    }

    pub fn component(&self, k: usize) -> Result<GridPath> {
        if k >= self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: k + 1,
            });
        }
        let values = (0..self.len()).map(|i| self.values[i * self.dim + k]).collect();
        let jumps = self
            .jumps
            .iter()
            .map(|(&i, d)| (i, vec![d[k]]))
            .collect();
        Ok(GridPath {
            grid: self.grid.clone(),
            dim: 1,
            values,
            jumps,
            finite_variation: self.finite_variation,
        })
    }

    /// Stacks scalar or vector paths on a common grid into one path.
    pub fn stack(parts: &[&GridPath]) -> Result<GridPath> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidPath("nothing to stack".into()))?;
        for p in parts {
            check_same_grid(first, p)?;
        }
        let dim: usize = parts.iter().map(|p| p.dim).sum();
        let n = first.len();
        let mut values = Vec::with_capacity(n * dim);
        for i in 0..n {
            for p in parts {
                values.extend_from_slice(p.value(i));
            }
        }
        let mut jumps: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        let mut offset = 0;
        for p in parts {
            for (&i, d) in &p.jumps {
                let e = jumps.entry(i).or_insert_with(|| vec![0.0; dim]);
                e[offset..offset + p.dim].copy_from_slice(d);
            }
            offset += p.dim;
        }
        let fv = parts.iter().all(|p| p.finite_variation);
        Ok(GridPath::new(first.grid.clone(), dim, values, jumps)?.with_finite_variation(fv))
    }

    /// `sum_k w_k X_k + offset`, componentwise; the jump set is the union.
    pub fn affine(terms: &[(f64, &GridPath)], offset: f64) -> Result<GridPath> {
        let (_, first) = terms
            .first()
            .ok_or_else(|| Error::InvalidPath("empty affine combination".into()))?;
        let dim = first.dim;
        for (_, p) in terms {
            check_same_grid(first, p)?;
            if p.dim != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.dim,
                });
            }
        }
        let mut values = vec![offset; first.values.len()];
        for (w, p) in terms {
            for (v, x) in values.iter_mut().zip(&p.values) {
                *v += w * x;
            }
        }
        let mut jumps: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for (w, p) in terms {
            for (&i, d) in &p.jumps {
                let e = jumps.entry(i).or_insert_with(|| vec![0.0; dim]);
                for (a, b) in e.iter_mut().zip(d) {
                    *a += w * b;
                }
            }
        }
        let fv = terms.iter().all(|(_, p)| p.finite_variation);
        Ok(GridPath::new(first.grid.clone(), dim, values, jumps)?.with_finite_variation(fv))
    }

    pub fn add(&self, other: &GridPath) -> Result<GridPath> {
        GridPath::affine(&[(1.0, self), (1.0, other)], 0.0)
    }

    pub fn sub(&self, other: &GridPath) -> Result<GridPath> {
        GridPath::affine(&[(1.0, self), (-1.0, other)], 0.0)
    }

    pub fn scale(&self, c: f64) -> GridPath {
        GridPath {
            grid: self.grid.clone(),
            dim: self.dim,
            values: self.values.iter().map(|v| c * v).collect(),
            jumps: self
                .jumps
                .iter()
                .map(|(&i, d)| (i, d.iter().map(|v| c * v).collect()))
                .collect(),
            finite_variation: self.finite_variation,
        }
    }

    /// Applies a scalar function pointwise to a scalar path. Jumps become
    /// `f(X_t) - f(X_{t-})`.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Result<GridPath> {
        self.expect_scalar()?;
        let values: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        let jumps = self
            .jumps
            .keys()
            .map(|&i| (i, vec![values[i] - f(self.left_x(i))]))
            .collect();
        GridPath::new(self.grid.clone(), 1, values, jumps)
    }

    /// Pointwise product of two scalar paths.
    pub fn mul(&self, other: &GridPath) -> Result<GridPath> {
        self.expect_scalar()?;
        other.expect_scalar()?;
        check_same_grid(self, other)?;
        let values: Vec<f64> = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        let mut jumps = BTreeMap::new();
        for &i in self.jumps.keys().chain(other.jumps.keys()) {
            let left = self.left_x(i) * other.left_x(i);
            jumps.insert(i, vec![values[i] - left]);
        }
        let fv = self.finite_variation && other.finite_variation;
        Ok(GridPath::new(self.grid.clone(), 1, values, jumps)?.with_finite_variation(fv))
    }

    pub fn expect_scalar(&self) -> Result<()> {
        if self.dim == 1 {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: 1,
                got: self.dim,
            })
        }
    }

    /// Running supremum `sup_{s <= t} X_s` of a scalar path.
    pub fn running_maximum(&self) -> Result<RunningMax> {
        self.expect_scalar()?;
        let n = self.len();
        let mut values = Vec::with_capacity(n);
        let mut jumps = BTreeMap::new();
        let mut current = self.x(0);
        values.push(current);
        let mut first_break = None;
        for i in 1..n {
            let before = current.max(self.left_x(i));
            current = before.max(self.x(i));
            if current > before {
                jumps.insert(i, vec![current - before]);
                first_break.get_or_insert(i);
            }
            values.push(current);
        }
        let path = GridPath::new(self.grid.clone(), 1, values, jumps)?.with_finite_variation(true);
        Ok(RunningMax {
            path,
            first_break,
        })
    }

    /// Sup-distance between two scalar paths on a common grid.
    pub fn sup_distance(&self, other: &GridPath) -> Result<f64> {
        check_same_grid(self, other)?;
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        Ok(crate::numeric::sup_distance(&self.values, &other.values))
    }
}

/// Running maximum together with its continuity flag.
#[derive(Debug, Clone)]
pub struct RunningMax {
    pub path: GridPath,
    /// First grid index where a jump sets a new maximum.
    pub first_break: Option<usize>,
}

impl RunningMax {
    pub fn is_continuous(&self) -> bool {
        self.first_break.is_none()
    }
}

/// A path of finite variation with cached total variation and its split
/// into continuous and pure-jump parts.
#[derive(Debug, Clone)]
pub struct FvPath {
    path: GridPath,
    variation: Vec<f64>,
    continuous: GridPath,
}

impl FvPath {
    pub fn new(path: GridPath) -> Result<Self> {
        let path = path.with_finite_variation(true);
        let n = path.len();
        let d = path.dim();
        let mut variation = vec![0.0; n * d];
        for i in 1..n {
            for k in 0..d {
                let inc = (path.values[i * d + k] - path.values[(i - 1) * d + k]).abs();
                variation[i * d + k] = variation[(i - 1) * d + k] + inc;
            }
        }
        let mut cvalues = path.values.clone();
        let mut acc = vec![0.0; d];
        let mut jumps = path.jumps.iter().peekable();
        for i in 0..n {
            if let Some((_, dx)) = jumps.next_if(|(&j, _)| j == i) {
                for (a, b) in acc.iter_mut().zip(dx.iter()) {
                    *a += b;
                }
            }
            for k in 0..d {
                cvalues[i * d + k] -= acc[k];
            }
        }
        let continuous = GridPath::new(path.grid.clone(), d, cvalues, BTreeMap::new())?
            .with_finite_variation(true);
        Ok(Self {
            path,
            variation,
            continuous,
        })
    }

    pub fn path(&self) -> &GridPath {
        &self.path
    }

    pub fn into_path(self) -> GridPath {
        self.path
    }

    pub fn dim(&self) -> usize {
        self.path.dim()
    }

    /// `V(A)_t` for component `k`.
    pub fn total_variation(&self, t: f64, k: usize) -> Result<f64> {
        if k >= self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: k + 1,
            });
        }
        let i = self.path.grid.index_at(t)?;
        Ok(self.variation[i * self.dim() + k])
    }

    /// Cumulative variation of component `k` on the grid.
    pub fn variation_path(&self, k: usize) -> Vec<f64> {
        let d = self.dim();
        (0..self.path.len()).map(|i| self.variation[i * d + k]).collect()
    }

    pub fn continuous_part(&self) -> &GridPath {
        &self.continuous
    }

    /// `A^d_t = sum of declared jumps up to t`.
    pub fn jump_part(&self) -> GridPath {
        let values = self
            .path
            .values
            .iter()
            .zip(&self.continuous.values)
            .map(|(a, c)| a - c)
            .collect();
        GridPath::new(
            self.path.grid.clone(),
            self.dim(),
            values,
            self.path.jumps.clone(),
        )
        .expect("jump part inherits a valid jump set")
        .with_finite_variation(true)
    }
}
