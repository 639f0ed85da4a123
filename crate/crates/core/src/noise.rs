//! Independent real Brownian motions on a dyadic grid, the complex Brownian
//! motions built from them, and their piecewise-linear interpolants.
//!
//! Paths are sampled with the Lévy midpoint construction. Each dyadic level
//! of each path draws from its own ChaCha stream keyed by `(k, alpha, level)`,
//! so deepening an ensemble never changes values that were already sampled
//! and the result does not depend on sampling order.

use std::io::{Read, Write};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{sign_class, SignClass};

/// A real noise index `(k, alpha)` with `alpha` in `{1, 2}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RealIndex {
    pub k: [i32; 3],
    pub alpha: u8,
}

impl RealIndex {
    pub fn new(k: [i32; 3], alpha: u8) -> Self {
        Self { k, alpha }
    }

    pub fn negated(&self) -> Self {
        Self {
            k: [-self.k[0], -self.k[1], -self.k[2]],
            alpha: self.alpha,
        }
    }
}

/// Largest supported dyadic depth.
pub const MAX_LEVEL: u32 = 24;

fn stream_key(index: RealIndex, level: u32) -> u64 {
    let c = |x: i32| ((x + (1 << 15)) as u64) & 0xffff;
    (c(index.k[0]) << 48) | (c(index.k[1]) << 32) | (c(index.k[2]) << 16) | ((index.alpha as u64) << 8) | level as u64
}

fn level_normals(seed: u64, index: RealIndex, level: u32, count: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_key(index, level));
    (0..count).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Lévy construction of one path with `2^level` intervals on `[0, horizon]`.
fn levy_path(seed: u64, index: RealIndex, horizon: f64, level: u32) -> Vec<f64> {
    let size = 1usize << level;
    let mut v = vec![0.0; size + 1];
    v[size] = horizon.sqrt() * level_normals(seed, index, 0, 1)[0];
    for j in 1..=level {
        let count = 1usize << (j - 1);
        let half = size >> j;
        let sd = (horizon / (1u64 << (j + 1)) as f64).sqrt();
        let z = level_normals(seed, index, j, count);
        for (i, zi) in z.iter().enumerate() {
            let mid = (2 * i + 1) * half;
            v[mid] = 0.5 * (v[mid - half] + v[mid + half]) + sd * zi;
        }
    }
    v
}

/// Independent standard Brownian paths, one per real index, on the dyadic
/// grid `t_i = horizon * i / 2^level`.
#[derive(Clone, Debug, PartialEq)]
pub struct BrownianEnsemble {
    horizon: f64,
    level: u32,
    seed: u64,
    indices: Vec<RealIndex>,
    values: Vec<Vec<f64>>,
}

impl BrownianEnsemble {
    /// Samples `B^{k,alpha}` for every `k` in `modes` and `alpha = 1, 2`.
    pub fn sample(modes: &[[i32; 3]], horizon: f64, level: u32, seed: u64) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
        }
        if level > MAX_LEVEL {
            return Err(Error::InvalidParameter(format!("level {level} exceeds {MAX_LEVEL}")));
        }
        let mut indices: Vec<RealIndex> = modes
            .iter()
            .flat_map(|&k| [RealIndex::new(k, 1), RealIndex::new(k, 2)])
            .collect();
        indices.sort();
        indices.dedup();
        let values = indices
            .par_iter()
            .map(|&ix| levy_path(seed, ix, horizon, level))
            .collect();
        Ok(Self {
            horizon,
            level,
            seed,
            indices,
            values,
        })
    }

    /// Same paths on a finer grid; existing grid values are unchanged.
    pub fn refine(&self, level: u32) -> Result<Self> {
        if level < self.level {
            return Err(Error::InvalidParameter(format!(
                "cannot refine level {} down to {level}",
                self.level
            )));
        }
        let modes: Vec<[i32; 3]> = self.indices.iter().map(|ix| ix.k).collect();
        Self::sample(&modes, self.horizon, level, self.seed)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of grid intervals.
    pub fn resolution(&self) -> usize {
        1 << self.level
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.resolution() as f64
    }

    pub fn indices(&self) -> &[RealIndex] {
        &self.indices
    }

    pub fn position(&self, index: RealIndex) -> Option<usize> {
        self.indices.binary_search(&index).ok()
    }

    pub fn path(&self, index: RealIndex) -> Option<&[f64]> {
        self.position(index).map(|i| self.values[i].as_slice())
    }

    pub fn paths(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn time(&self, i: usize) -> f64 {
        self.horizon * i as f64 / self.resolution() as f64
    }

    const MAGIC: &'static [u8; 8] = b"NSWZBENS";
    const VERSION: u32 = 1;

    /// Binary checkpoint: magic, version, horizon, level, index count, seed,
    /// the index table (`k` as three i32 and `alpha` as u32), then one
    /// little-endian f64 array per index in enumeration order.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(Self::MAGIC)?;
        w.write_all(&Self::VERSION.to_le_bytes())?;
        w.write_all(&self.horizon.to_le_bytes())?;
        w.write_all(&self.level.to_le_bytes())?;
        w.write_all(&(self.indices.len() as u32).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for ix in &self.indices {
            for c in ix.k {
                w.write_all(&c.to_le_bytes())?;
            }
            w.write_all(&(ix.alpha as u32).to_le_bytes())?;
        }
        for path in &self.values {
            for x in path {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(Error::Format("not an ensemble checkpoint".into()));
        }
        let version = read_u32(&mut r)?;
        if version != Self::VERSION {
            return Err(Error::Format(format!("unsupported ensemble version {version}")));
        }
        let horizon = read_f64(&mut r)?;
        let level = read_u32(&mut r)?;
        if level > MAX_LEVEL {
            return Err(Error::Format(format!("level {level} out of range")));
        }
        let count = read_u32(&mut r)? as usize;
        let seed = read_u64(&mut r)?;
        let mut indices = Vec::with_capacity(count);
        for _ in 0..count {
            let k = [read_i32(&mut r)?, read_i32(&mut r)?, read_i32(&mut r)?];
            let alpha = read_u32(&mut r)?;
            indices.push(RealIndex::new(k, alpha as u8));
        }
        let len = (1usize << level) + 1;
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            let mut path = Vec::with_capacity(len);
            for _ in 0..len {
                path.push(read_f64(&mut r)?);
            }
            values.push(path);
        }
        Ok(Self {
            horizon,
            level,
            seed,
            indices,
            values,
        })
    }
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_i32<R: Read>(r: &mut R) -> Result<i32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(i32::from_le_bytes(b))
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Complex Brownian motions `W^{k,alpha}`:
/// `B^{k,a} + i B^{-k,a}` for plus-class `k`, `B^{-k,a} - i B^{k,a}` otherwise.
#[derive(Clone, Debug)]
pub struct ComplexPaths {
    indices: Vec<RealIndex>,
    values: Vec<Vec<Complex64>>,
}

impl ComplexPaths {
    pub fn from_real(ensemble: &BrownianEnsemble) -> Result<Self> {
        let mut values = Vec::with_capacity(ensemble.indices().len());
        for &ix in ensemble.indices() {
            let own = ensemble.path(ix).expect("index from ensemble");
            let other = ensemble
                .path(ix.negated())
                .ok_or(Error::IncompleteEnsemble(ix.negated().k))?;
            let w = match sign_class(ix.k) {
                SignClass::Plus => own.iter().zip(other).map(|(&a, &b)| Complex64::new(a, b)).collect(),
                SignClass::Minus => other.iter().zip(own).map(|(&a, &b)| Complex64::new(a, -b)).collect(),
            };
            values.push(w);
        }
        Ok(Self {
            indices: ensemble.indices().to_vec(),
            values,
        })
    }

    pub fn indices(&self) -> &[RealIndex] {
        &self.indices
    }

    pub fn path(&self, index: RealIndex) -> Option<&[Complex64]> {
        self.indices
            .binary_search(&index)
            .ok()
            .map(|i| self.values[i].as_slice())
    }
}

/// Piecewise-linear interpolants of a family of real paths on the partition
/// `pi^n`: `n` uniform intervals snapped to the ensemble grid.
#[derive(Clone, Debug)]
pub struct PiecewiseLinearPaths {
    horizon: f64,
    /// Partition nodes as times.
    times: Vec<f64>,
    /// Partition nodes as ensemble grid indices (when derived from an ensemble).
    ticks: Vec<usize>,
    indices: Vec<RealIndex>,
    /// `node_values[index][node]`.
    node_values: Vec<Vec<f64>>,
}

impl PiecewiseLinearPaths {
    pub fn from_ensemble(ensemble: &BrownianEnsemble, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("partition needs at least one interval".into()));
        }
        let res = ensemble.resolution();
        if n > res {
            return Err(Error::RefineFirst { n, resolution: res });
        }
        let ticks: Vec<usize> = (0..=n)
            .map(|i| ((i as f64) * res as f64 / n as f64).round() as usize)
            .collect();
        let times = ticks.iter().map(|&t| ensemble.time(t)).collect();
        let node_values = ensemble
            .paths()
            .iter()
            .map(|p| ticks.iter().map(|&t| p[t]).collect())
            .collect();
        Ok(Self {
            horizon: ensemble.horizon(),
            times,
            ticks,
            indices: ensemble.indices().to_vec(),
            node_values,
        })
    }

    /// Builds a family directly from node times and values (one row per index).
    pub fn from_nodes(times: Vec<f64>, indices: Vec<RealIndex>, node_values: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::GridIncompatible("need at least two partition nodes".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::GridIncompatible("partition times must increase".into()));
        }
        if indices.len() != node_values.len() || node_values.iter().any(|v| v.len() != times.len()) {
            return Err(Error::GridIncompatible("node values do not match the partition".into()));
        }
        let mut order: Vec<usize> = (0..indices.len()).collect();
        order.sort_by_key(|&i| indices[i]);
        let indices: Vec<RealIndex> = order.iter().map(|&i| indices[i]).collect();
        let node_values = order.iter().map(|&i| node_values[i].clone()).collect();
        Ok(Self {
            horizon: *times.last().unwrap() - times[0],
            ticks: Vec::new(),
            times,
            indices,
            node_values,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn intervals(&self) -> usize {
        self.times.len() - 1
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn ticks(&self) -> &[usize] {
        &self.ticks
    }

    pub fn indices(&self) -> &[RealIndex] {
        &self.indices
    }

    pub fn position(&self, index: RealIndex) -> Option<usize> {
        self.indices.binary_search(&index).ok()
    }

    pub fn node_values(&self, row: usize) -> &[f64] {
        &self.node_values[row]
    }

    /// Mesh size: the longest partition interval.
    pub fn mesh(&self) -> f64 {
        self.times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Slope of row `row` on interval `seg`.
    pub fn slope(&self, row: usize, seg: usize) -> f64 {
        let v = &self.node_values[row];
        (v[seg + 1] - v[seg]) / (self.times[seg + 1] - self.times[seg])
    }

    /// Interval containing `t`; right endpoints belong to the earlier interval.
    pub fn segment_of(&self, t: f64) -> Result<usize> {
        let (t0, t1) = (self.times[0], *self.times.last().unwrap());
        if !(t >= t0 && t <= t1) {
            return Err(Error::TimeRange { t, horizon: t1 });
        }
        let pos = self.times.partition_point(|&x| x < t);
        Ok(pos.saturating_sub(1).min(self.intervals() - 1))
    }

    /// All slopes on the interval containing `t`, one per row.
    pub fn slopes_at(&self, t: f64) -> Result<Vec<f64>> {
        let seg = self.segment_of(t)?;
        Ok((0..self.indices.len()).map(|r| self.slope(r, seg)).collect())
    }

    pub fn value_at(&self, row: usize, t: f64) -> Result<f64> {
        let seg = self.segment_of(t)?;
        let v = &self.node_values[row];
        let (a, b) = (self.times[seg], self.times[seg + 1]);
        let w = (t - a) / (b - a);
        Ok(v[seg] * (1.0 - w) + v[seg + 1] * w)
    }
}
