//! Partitions of `[0, T]` stored as indices into a host grid, dyadic and
//! path-adapted (Lebesgue) sequences, mesh and oscillation.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::{GridPath, TimeGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    grid: Arc<TimeGrid>,
    idx: Vec<usize>,
}

impl Partition {
    /// Indices must start at 0, increase strictly and end at the last grid index.
    pub fn from_indices(grid: Arc<TimeGrid>, idx: Vec<usize>) -> Result<Self> {
        if idx.len() < 2 {
            return Err(Error::DegeneratePartition);
        }
        if idx[0] != 0 {
            return Err(Error::InvalidPartition("first point must be 0".into()));
        }
        if *idx.last().unwrap() != grid.last_index() {
            return Err(Error::InvalidPartition("last point must be the horizon".into()));
        }
        if idx.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidPartition("points must increase strictly".into()));
        }
        Ok(Self { grid, idx })
    }

    /// Every time must be an exact grid time.
    pub fn from_times(grid: Arc<TimeGrid>, times: &[f64]) -> Result<Self> {
        let idx = times
            .iter()
            .map(|&t| grid.find(t).ok_or(Error::NotGridTime(t)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_indices(grid, idx)
    }

    pub fn whole_grid(grid: Arc<TimeGrid>) -> Self {
        let idx = (0..grid.len()).collect();
        Self { grid, idx }
    }

    /// `{k T 2^-n}`; exact index stepping on a dyadic grid, exact time lookup otherwise.
    pub fn dyadic(grid: Arc<TimeGrid>, n: u32) -> Result<Self> {
        if let Some(info) = grid.dyadic_info() {
            if n > info.level {
                return Err(Error::IncompatibleGrid(format!(
                    "dyadic level {n} is finer than the grid level {}",
                    info.level
                )));
            }
            let step = 1usize << (info.level - n);
            let idx = (0..=(1usize << n)).map(|k| k * step).collect();
            return Self::from_indices(grid, idx);
        }
        if n >= 63 {
            return Err(Error::InvalidParameter(format!("dyadic level {n}")));
        }
        let horizon = grid.horizon();
        let count = 1u64 << n;
        let times: Vec<f64> = (0..=count)
            .map(|k| horizon * k as f64 / count as f64)
            .collect();
        Self::from_times(grid, &times)
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn indices(&self) -> &[usize] {
        &self.idx
    }

    pub fn times(&self) -> Vec<f64> {
        self.idx.iter().map(|&i| self.grid.time(i)).collect()
    }

    pub fn len(&self) -> usize {
        self.idx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idx.is_empty()
    }

    pub fn mesh(&self) -> f64 {
        self.idx
            .windows(2)
            .map(|w| self.grid.time(w[1]) - self.grid.time(w[0]))
            .fold(0.0, f64::max)
    }

    pub fn contains_index(&self, i: usize) -> bool {
        self.idx.binary_search(&i).is_ok()
    }

    /// Position `k` of the interval `[t_k, t_{k+1})` holding grid index `i`;
    /// the horizon maps to the last point.
    pub fn interval_of(&self, i: usize) -> usize {
        self.idx.partition_point(|&p| p <= i) - 1
    }

    /// Position `k` with `t_k < t_i <= t_{k+1}`; `i` must be positive.
    pub fn straddling(&self, i: usize) -> usize {
        debug_assert!(i > 0);
        self.idx.partition_point(|&p| p < i) - 1
    }

    /// True when every point of `self` is also a point of `finer`.
    pub fn is_subset_of(&self, finer: &Partition) -> bool {
        self.idx.iter().all(|&i| finer.contains_index(i))
    }
}

/// Max gap of a partition.
pub fn mesh(p: &Partition) -> Result<f64> {
    if p.len() < 2 {
        return Err(Error::DegeneratePartition);
    }
    Ok(p.mesh())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionKind {
    Dyadic,
    Lebesgue,
    User,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSequence {
    levels: Vec<u32>,
    parts: Vec<Partition>,
    kind: PartitionKind,
}

impl PartitionSequence {
    pub fn new(kind: PartitionKind, levels: Vec<u32>, parts: Vec<Partition>) -> Result<Self> {
        if levels.is_empty() || levels.len() != parts.len() {
            return Err(Error::InvalidParameter(
                "a partition sequence needs one partition per level".into(),
            ));
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("levels must increase".into()));
        }
        let grid = parts[0].grid().clone();
        if parts.iter().any(|p| !Arc::ptr_eq(p.grid(), &grid) && **p.grid() != *grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { levels, parts, kind })
    }

    pub fn dyadic(grid: &Arc<TimeGrid>, n_min: u32, n_max: u32) -> Result<Self> {
        if n_min > n_max {
            return Err(Error::LevelRange(n_min, n_max));
        }
        let levels: Vec<u32> = (n_min..=n_max).collect();
        let parts = levels
            .iter()
            .map(|&n| Partition::dyadic(grid.clone(), n))
            .collect::<Result<Vec<_>>>()?;
        Self::new(PartitionKind::Dyadic, levels, parts)
    }

    pub fn lebesgue(path: &GridPath, n_min: u32, n_max: u32) -> Result<Self> {
        if n_min > n_max {
            return Err(Error::LevelRange(n_min, n_max));
        }
        let levels: Vec<u32> = (n_min..=n_max).collect();
        let parts = levels
            .iter()
            .map(|&n| lebesgue_partition(path, n))
            .collect::<Result<Vec<_>>>()?;
        Self::new(PartitionKind::Lebesgue, levels, parts)
    }

    pub fn kind(&self) -> PartitionKind {
        self.kind
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    pub fn partitions(&self) -> &[Partition] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        self.parts[0].grid()
    }

    pub fn top(&self) -> &Partition {
        self.parts.last().unwrap()
    }

    pub fn top_level(&self) -> u32 {
        *self.levels.last().unwrap()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &Partition)> {
        self.levels.iter().copied().zip(&self.parts)
    }

    pub fn meshes(&self) -> Vec<f64> {
        self.parts.iter().map(Partition::mesh).collect()
    }

    pub fn mesh_nonincreasing(&self) -> bool {
        self.meshes().windows(2).all(|w| w[1] <= w[0])
    }

    pub fn is_nested(&self) -> bool {
        self.parts.windows(2).all(|w| w[0].is_subset_of(&w[1]))
    }

    /// Keeps the levels in `lo..=hi`.
    pub fn restrict(&self, lo: u32, hi: u32) -> Result<Self> {
        let (levels, parts): (Vec<u32>, Vec<Partition>) = self
            .iter()
            .filter(|(n, _)| (lo..=hi).contains(n))
            .map(|(n, p)| (n, p.clone()))
            .unzip();
        if levels.is_empty() {
            return Err(Error::LevelRange(lo, hi));
        }
        Self::new(self.kind, levels, parts)
    }
}

/// Stopping-time partition: the next point is the first grid time where the
/// path leaves the band of radius `2^-(n+1)` around its value at the current
/// point, or the last grid time within `1/n` of it, whichever comes first.
pub fn lebesgue_partition(path: &GridPath, n: u32) -> Result<Partition> {
    if n == 0 {
        return Err(Error::ZeroLevel);
    }
    path.expect_scalar()?;
    let grid = path.grid();
    let radius = (-(n as f64) - 1.0).exp2();
    let cap = 1.0 / n as f64;
    let last = grid.last_index();
    let mut idx = vec![0usize];
    let mut k = 0usize;
    while k < last {
        let t_cap = grid.time(k) + cap;
        let cap_idx = if t_cap >= grid.horizon() {
            last
        } else {
            grid.index_at(t_cap)?
        };
        if cap_idx <= k {
            return Err(Error::IncompatibleGrid(format!(
                "grid step after t = {} exceeds the time cap 1/{n}",
                grid.time(k)
            )));
        }
        let anchor = path.x(k);
        let next = ((k + 1)..=cap_idx)
            .find(|&j| (path.x(j) - anchor).abs() > radius)
            .unwrap_or(cap_idx);
        idx.push(next);
        k = next;
    }
    Partition::from_indices(grid.clone(), idx)
}

/// Largest diameter of the path over grid times of a single half-open
/// partition interval `[t_i, t_{i+1})` intersected with `[0, t]`.
pub fn oscillation(path: &GridPath, p: &Partition, t: f64) -> Result<f64> {
    if !crate::path::same_grid(path.grid(), p.grid()) {
        return Err(Error::GridMismatch);
    }
    let end = path.grid().index_at(t)?;
    let d = path.dim();
    let mut worst = 0.0_f64;
    for w in p.indices().windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if lo > end {
            break;
        }
        let stop = (hi - 1).min(end);
        for c in 0..d {
            let (mut mn, mut mx) = (f64::INFINITY, f64::NEG_INFINITY);
            for i in lo..=stop {
                let v = path.value(i)[c];
                mn = mn.min(v);
                mx = mx.max(v);
            }
            worst = worst.max(mx - mn);
        }
    }
    Ok(worst)
}
