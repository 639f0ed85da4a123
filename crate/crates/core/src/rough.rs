//! Rough-path lifts of piecewise-linear paths, two-index maps with Hölder
//! seminorms, and the remainder of the second-order expansion of a
//! trajectory driven by transport noise.
//!
//! Level-two convention: `W^{ij}_{st} = int_s^t (z^i_r - z^i_s) dz^j_r`, so
//! Chen's relation reads `W_{st} = W_{su} + W_{ut} + Z_{su} (x) Z_{ut}`.

use std::collections::BTreeMap;

use crate::dynamics::{NoiseModel, Trajectory};
use crate::error::{Error, Result};
use crate::lattice::NoiseCoefficients;
use crate::noise::{BrownianEnsemble, PiecewiseLinearPaths, RealIndex};
use crate::spectral::{SpectralCoeffs, SpectralOps};

const TIME_TOL: f64 = 1e-12;

/// First and second levels of a path that is linear between fine nodes,
/// evaluated on a grid of those nodes.
#[derive(Clone, Debug)]
pub struct RoughPathLift {
    grid: Vec<f64>,
    dim: usize,
    /// Path values at grid points, `values[point][component]`.
    values: Vec<Vec<f64>>,
    /// Increments of the linear pieces inside each grid interval.
    fine: Vec<Vec<Vec<f64>>>,
    /// Component labels, empty for unlabelled paths.
    labels: Vec<RealIndex>,
    alpha: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 1.0 / 3.0 && alpha <= 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha must lie in (1/3, 1/2], got {alpha}")))
    }
}

/// Position of each `grid` time in the increasing `nodes`.
fn locate(nodes: &[f64], grid: &[f64]) -> Result<Vec<usize>> {
    let scale = nodes.last().copied().unwrap_or(1.0).abs().max(1.0);
    grid.iter()
        .map(|&t| {
            let pos = nodes.partition_point(|&x| x < t - TIME_TOL * scale);
            match nodes.get(pos) {
                Some(&x) if (x - t).abs() <= TIME_TOL * scale => Ok(pos),
                _ => Err(Error::GridIncompatible(format!("grid time {t} is not a path node"))),
            }
        })
        .collect()
}

impl RoughPathLift {
    /// Lift of the path through `node_values[node][component]`, linear
    /// between nodes, evaluated at `grid`, which must be a subset of the nodes.
    pub fn from_nodes(node_times: &[f64], node_values: &[Vec<f64>], grid: &[f64], alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if node_times.len() != node_values.len() || node_times.len() < 2 {
            return Err(Error::GridIncompatible("node times and values do not match".into()));
        }
        if node_times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::GridIncompatible("node times must increase".into()));
        }
        if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::GridIncompatible("grid needs at least two increasing times".into()));
        }
        let dim = node_values[0].len();
        if node_values.iter().any(|v| v.len() != dim) {
            return Err(Error::GridIncompatible("ragged node values".into()));
        }
        let ticks = locate(node_times, grid)?;
        let fine = ticks
            .windows(2)
            .map(|w| {
                (w[0]..w[1])
                    .map(|j| (0..dim).map(|c| node_values[j + 1][c] - node_values[j][c]).collect())
                    .collect()
            })
            .collect();
        Ok(Self {
            grid: grid.to_vec(),
            dim,
            values: ticks.iter().map(|&j| node_values[j].clone()).collect(),
            fine,
            labels: Vec::new(),
            alpha,
        })
    }

    /// Canonical lift of a piecewise-linear family on a grid refining its
    /// partition. Components follow the order of `paths.indices()`.
    pub fn canonical(paths: &PiecewiseLinearPaths, grid: &[f64], alpha: f64) -> Result<Self> {
        locate(grid, paths.times()).map_err(|_| {
            Error::GridIncompatible("grid does not refine the partition of the paths".into())
        })?;
        let rows = paths.indices().len();
        let values: Vec<Vec<f64>> = grid
            .iter()
            .map(|&t| (0..rows).map(|r| paths.value_at(r, t)).collect::<Result<Vec<f64>>>())
            .collect::<Result<_>>()?;
        let mut lift = Self::from_nodes(grid, &values, grid, alpha)?;
        lift.labels = paths.indices().to_vec();
        Ok(lift)
    }

    /// Reference lift of the Brownian family: the canonical lift of its
    /// interpolation at the finest sampled level, evaluated on `grid`.
    pub fn stratonovich_reference(ensemble: &BrownianEnsemble, grid: &[f64], alpha: f64) -> Result<Self> {
        let res = ensemble.resolution();
        let times: Vec<f64> = (0..=res).map(|i| ensemble.time(i)).collect();
        let values: Vec<Vec<f64>> = (0..=res).map(|i| ensemble.paths().iter().map(|p| p[i]).collect()).collect();
        let mut lift = Self::from_nodes(&times, &values, grid, alpha)?;
        lift.labels = ensemble.indices().to_vec();
        Ok(lift)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn intervals(&self) -> usize {
        self.grid.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn labels(&self) -> &[RealIndex] {
        &self.labels
    }

    /// Linear pieces inside grid interval `i`.
    pub fn fine_increments(&self, i: usize) -> &[Vec<f64>] {
        &self.fine[i]
    }

    fn check_pair(&self, a: usize, b: usize) {
        assert!(a <= b && b < self.grid.len(), "grid pair ({a}, {b}) out of range");
    }

    /// `Z_{st}` between grid points `a <= b`.
    pub fn increment(&self, a: usize, b: usize) -> Vec<f64> {
        self.check_pair(a, b);
        self.values[b].iter().zip(&self.values[a]).map(|(y, x)| y - x).collect()
    }

    /// `W_{st}` between grid points `a <= b`, row-major `dim x dim`, summed
    /// in closed form over the linear pieces.
    pub fn level2(&self, a: usize, b: usize) -> Vec<f64> {
        self.check_pair(a, b);
        let d = self.dim;
        let mut w = vec![0.0; d * d];
        let mut z = vec![0.0; d];
        for piece in self.fine[a..b].iter().flatten() {
            for i in 0..d {
                let zi = z[i] + 0.5 * piece[i];
                if zi == 0.0 {
                    continue;
                }
                let row = &mut w[i * d..(i + 1) * d];
                for (r, p) in row.iter_mut().zip(piece) {
                    *r += zi * p;
                }
            }
            for (zi, p) in z.iter_mut().zip(piece) {
                *zi += p;
            }
        }
        w
    }

    /// `max |W_{ab} - W_{au} - W_{ub} - Z_{au} (x) Z_{ub}|` for `a <= u <= b`.
    pub fn chen_defect(&self, a: usize, u: usize, b: usize) -> f64 {
        let d = self.dim;
        let (wab, wau, wub) = (self.level2(a, b), self.level2(a, u), self.level2(u, b));
        let (zau, zub) = (self.increment(a, u), self.increment(u, b));
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let e = wab[i * d + j] - wau[i * d + j] - wub[i * d + j] - zau[i] * zub[j];
                worst = worst.max(e.abs());
            }
        }
        worst
    }

    /// `max |Sym(W_{ab}) - Z_{ab} (x) Z_{ab} / 2|`.
    pub fn symmetric_defect(&self, a: usize, b: usize) -> f64 {
        let d = self.dim;
        let w = self.level2(a, b);
        let z = self.increment(a, b);
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let e = 0.5 * (w[i * d + j] + w[j * d + i]) - 0.5 * z[i] * z[j];
                worst = worst.max(e.abs());
            }
        }
        worst
    }

    pub fn level1_map(&self, pairs: &[(usize, usize)]) -> TwoIndexMap<Vec<f64>> {
        TwoIndexMap::from_fn(&self.grid, pairs, TargetSpace::Euclidean, |a, b| self.increment(a, b))
    }

    pub fn level2_map(&self, pairs: &[(usize, usize)]) -> TwoIndexMap<Vec<f64>> {
        TwoIndexMap::from_fn(&self.grid, pairs, TargetSpace::Euclidean, |a, b| self.level2(a, b))
    }
}

/// Where the values of a two-index map live, fixing the norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TargetSpace {
    /// Absolute value or Euclidean (Frobenius) norm.
    Euclidean,
    /// `H^m` with weight `(1 + 4 pi^2 |k|^2)^m`.
    Sobolev(f64),
}

pub trait TargetNorm {
    fn target_norm(&self, space: TargetSpace) -> f64;
}

impl TargetNorm for f64 {
    fn target_norm(&self, _: TargetSpace) -> f64 {
        self.abs()
    }
}

impl TargetNorm for Vec<f64> {
    fn target_norm(&self, _: TargetSpace) -> f64 {
        self.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

impl TargetNorm for SpectralCoeffs {
    fn target_norm(&self, space: TargetSpace) -> f64 {
        match space {
            TargetSpace::Euclidean => self.sobolev_norm(0.0),
            TargetSpace::Sobolev(m) => self.sobolev_norm(m),
        }
    }
}

/// Values `g_{st}` on pairs of grid points `s <= t`.
#[derive(Clone, Debug)]
pub struct TwoIndexMap<V> {
    times: Vec<f64>,
    space: TargetSpace,
    entries: BTreeMap<(usize, usize), V>,
}

impl<V> TwoIndexMap<V> {
    pub fn new(times: &[f64], space: TargetSpace) -> Self {
        Self { times: times.to_vec(), space, entries: BTreeMap::new() }
    }

    pub fn from_fn(times: &[f64], pairs: &[(usize, usize)], space: TargetSpace, mut f: impl FnMut(usize, usize) -> V) -> Self {
        let mut map = Self::new(times, space);
        for &(a, b) in pairs {
            map.insert(a, b, f(a, b));
        }
        map
    }

    pub fn insert(&mut self, a: usize, b: usize, value: V) {
        assert!(a <= b && b < self.times.len(), "pair ({a}, {b}) outside the grid");
        self.entries.insert((a, b), value);
    }

    pub fn get(&self, a: usize, b: usize) -> Option<&V> {
        self.entries.get(&(a, b))
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn space(&self) -> TargetSpace {
        self.space
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), &V)> {
        self.entries.iter().map(|(k, v)| (*k, v))
    }
}

/// Pairs `(i 2^l, (i + 1) 2^l)` at every dyadic scale of `intervals`, which
/// must be a power of two.
pub fn dyadic_pairs(intervals: usize) -> Result<Vec<(usize, usize)>> {
    if intervals == 0 || !intervals.is_power_of_two() {
        return Err(Error::GridIncompatible(format!(
            "dyadic pairs need a power-of-two interval count, got {intervals}"
        )));
    }
    let mut out = Vec::new();
    let mut width = intervals;
    while width >= 1 {
        out.extend((0..intervals / width).map(|i| (i * width, (i + 1) * width)));
        width /= 2;
    }
    Ok(out)
}

/// Every pair `a < b` of a grid with `intervals` intervals.
pub fn all_pairs(intervals: usize) -> Vec<(usize, usize)> {
    (0..intervals).flat_map(|a| (a + 1..=intervals).map(move |b| (a, b))).collect()
}

/// `[g]_exponent = max ||g_{st}|| / (t - s)^exponent` over the stored pairs.
pub fn holder_seminorm<V: TargetNorm>(map: &TwoIndexMap<V>, exponent: f64) -> Result<f64> {
    if !(exponent > 0.0) {
        return Err(Error::InvalidParameter(format!("exponent must be positive, got {exponent}")));
    }
    let mut best: Option<f64> = None;
    for ((a, b), v) in map.iter() {
        let width = map.times[b] - map.times[a];
        if width <= 0.0 {
            continue;
        }
        let r = v.target_norm(map.space) / width.powf(exponent);
        best = Some(best.map_or(r, |x: f64| x.max(r)));
    }
    best.ok_or_else(|| Error::UndefinedSeminorm("the map has no pairs with s < t".into()))
}

/// Largest ratio `||g_{st}|| / (t - s)^exponent` at one pair width.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaleRatio {
    pub width: f64,
    pub ratio: f64,
}

/// Hölder ratios grouped by pair width in grid steps, coarsest first.
pub fn scale_profile<V: TargetNorm>(map: &TwoIndexMap<V>, exponent: f64) -> Result<Vec<ScaleRatio>> {
    holder_seminorm(map, exponent)?;
    let mut by_width: BTreeMap<usize, ScaleRatio> = BTreeMap::new();
    for ((a, b), v) in map.iter() {
        if b == a {
            continue;
        }
        let width = map.times[b] - map.times[a];
        let r = v.target_norm(map.space) / width.powf(exponent);
        let e = by_width.entry(b - a).or_insert(ScaleRatio { width, ratio: 0.0 });
        e.ratio = e.ratio.max(r);
    }
    Ok(by_width.into_values().rev().collect())
}

/// Path-seminorm proxy for the driver constant: `(c [Z]_alpha, c^2 [W]_{2 alpha})`
/// with `c = C_nu / ||theta||`.
pub fn driver_norm_proxy(
    lift: &RoughPathLift,
    theta: &NoiseCoefficients,
    c_nu: f64,
    pairs: &[(usize, usize)],
) -> Result<(f64, f64)> {
    let c = if theta.is_zero() { 0.0 } else { c_nu / theta.l2_norm() };
    let a = lift.alpha();
    let z = holder_seminorm(&lift.level1_map(pairs), a)?;
    let w = holder_seminorm(&lift.level2_map(pairs), 2.0 * a)?;
    Ok((c * z, c * c * w))
}

/// Order of the Sobolev space holding the remainder.
pub const REMAINDER_ORDER: f64 = -3.0;

/// The remainder `xi^nat_{st} = delta xi_{st} - mu_{st} - A^1_{st} xi_s - A^2_{st} xi_s`
/// in `H^{-3}` on the given pairs of saved times.
///
/// `A^1_{st}` is transport by the noise velocity of the increment `Z_{st}`;
/// `A^2_{st}` is accumulated piece by piece through
/// `A^2_{s,u+d} = A^2_{s,u} + A(d) (A^1_{s,u} + A(d) / 2)`, which is exact for
/// paths that are linear between fine nodes. The trajectory must carry its
/// drift integral and share the lift's grid.
pub fn remainder_map(
    traj: &Trajectory,
    lift: &RoughPathLift,
    model: &NoiseModel,
    pairs: &[(usize, usize)],
) -> Result<TwoIndexMap<SpectralCoeffs>> {
    if traj.times.len() != lift.grid.len()
        || traj.times.iter().zip(&lift.grid).any(|(a, b)| (a - b).abs() > TIME_TOL * b.abs().max(1.0))
    {
        return Err(Error::GridIncompatible("trajectory and lift have different grids".into()));
    }
    if traj.drift.len() != traj.states.len() {
        return Err(Error::GridIncompatible("trajectory carries no drift integral".into()));
    }
    let m = model.lattice().truncation();
    let mut columns: BTreeMap<RealIndex, usize> = BTreeMap::new();
    if !model.is_zero() {
        for ix in model.real_indices() {
            let c = lift.labels.binary_search(&ix).map_err(|_| Error::IncompleteEnsemble(ix.k))?;
            columns.insert(ix, c);
        }
    }
    let mut ops = SpectralOps::new(m);

    let mut by_start: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(a, b) in pairs {
        if a > b || b >= lift.grid.len() {
            return Err(Error::GridIncompatible(format!("pair ({a}, {b}) outside the grid")));
        }
        by_start.entry(a).or_default().push(b);
    }
    let mut out = TwoIndexMap::new(&lift.grid, TargetSpace::Sobolev(REMAINDER_ORDER));
    for (a, mut ends) in by_start {
        ends.sort_unstable();
        ends.dedup();
        let phi = traj.states[a].coeffs().clone();
        let mut a1 = SpectralCoeffs::zeros(m);
        let mut a2 = SpectralCoeffs::zeros(m);
        let mut at = a;
        for b in ends {
            while at < b {
                if !columns.is_empty() {
                    for d in lift.fine_increments(at) {
                        let v = model.velocity(|ix| columns.get(&ix).map(|&c| d[c]))?;
                        ops.set_transport_field(&v)?;
                        let w = ops.cached_transport(&phi)?;
                        let mut inner = a1.clone();
                        inner.axpy(0.5, &w);
                        a2.axpy(1.0, &ops.cached_transport(&inner)?);
                        a1.axpy(1.0, &w);
                    }
                }
                at += 1;
            }
            let mut r = traj.states[b].coeffs().sub(&phi);
            r.axpy(-1.0, &traj.drift[b].sub(&traj.drift[a]));
            r.axpy(-1.0, &a1);
            r.axpy(-1.0, &a2);
            out.insert(a, b, r);
        }
    }
    Ok(out)
}
