use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::vec3::{cconj, cinner, cnorm_sq, rdot, CVec3, CZERO3};

/// Fourier coefficients of a complex 3-vector field, stored densely over the
/// cube `[-M, M]^3` (row-major, `k_3` fastest). The origin slot is kept for
/// indexing convenience and is always zero.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralCoeffs {
    m: usize,
    data: Vec<CVec3>,
}

impl SpectralCoeffs {
    pub fn zeros(m: usize) -> Self {
        let side = 2 * m + 1;
        Self {
            m,
            data: vec![CZERO3; side * side * side],
        }
    }

    pub fn truncation(&self) -> usize {
        self.m
    }

    pub fn side(&self) -> usize {
        2 * self.m + 1
    }

    #[inline]
    pub fn in_range(&self, k: [i32; 3]) -> bool {
        let m = self.m as i32;
        k.iter().all(|&c| c.abs() <= m)
    }

    #[inline]
    pub fn slot(&self, k: [i32; 3]) -> usize {
        let side = self.side();
        let m = self.m as i32;
        ((k[0] + m) as usize * side + (k[1] + m) as usize) * side + (k[2] + m) as usize
    }

    #[inline]
    pub fn wavevector(&self, slot: usize) -> [i32; 3] {
        let side = self.side();
        let m = self.m as i32;
        let c = (slot % side) as i32 - m;
        let b = ((slot / side) % side) as i32 - m;
        let a = (slot / (side * side)) as i32 - m;
        [a, b, c]
    }

    pub fn origin_slot(&self) -> usize {
        self.data.len() / 2
    }

    /// Coefficient at `k`; zero outside the truncation.
    pub fn get(&self, k: [i32; 3]) -> CVec3 {
        if self.in_range(k) {
            self.data[self.slot(k)]
        } else {
            CZERO3
        }
    }

    /// Sets the coefficient at an in-range nonzero `k`.
    pub fn set(&mut self, k: [i32; 3], v: CVec3) {
        assert!(self.in_range(k) && k != [0, 0, 0], "k = {k:?} outside storage");
        let s = self.slot(k);
        self.data[s] = v;
    }

    pub fn as_slice(&self) -> &[CVec3] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [CVec3] {
        &mut self.data
    }

    /// Nonzero modes in lexicographic order together with their coefficients.
    pub fn iter_modes(&self) -> impl Iterator<Item = ([i32; 3], &CVec3)> + '_ {
        let origin = self.origin_slot();
        self.data
            .iter()
            .enumerate()
            .filter(move |(s, _)| *s != origin)
            .map(move |(s, v)| (self.wavevector(s), v))
    }

    pub fn axpy(&mut self, a: f64, x: &SpectralCoeffs) {
        assert_eq!(self.m, x.m, "truncation mismatch");
        for (y, x) in self.data.iter_mut().zip(&x.data) {
            for c in 0..3 {
                y[c] += x[c] * a;
            }
        }
    }

    pub fn scale(&mut self, a: f64) {
        for y in &mut self.data {
            for c in y.iter_mut() {
                *c *= a;
            }
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    pub fn sub(&self, other: &SpectralCoeffs) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// `sum_k a_k . conj(b_k)`, the complex L^2 inner product on the unit torus.
    pub fn inner(&self, other: &SpectralCoeffs) -> Complex64 {
        assert_eq!(self.m, other.m, "truncation mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| cinner(a, b))
            .sum()
    }

    /// Sobolev norm with weight `(1 + 4 pi^2 |k|^2)^order`.
    pub fn sobolev_norm(&self, order: f64) -> f64 {
        sobolev_norm(self, order)
    }

    /// Same field stored at a different truncation (zero padding or cut).
    pub fn retruncate(&self, m: usize) -> Self {
        let mut out = Self::zeros(m);
        for (k, v) in self.iter_modes() {
            if out.in_range(k) {
                let s = out.slot(k);
                out.data[s] = *v;
            }
        }
        out
    }

    /// Largest `|conj(c_k) - c_{-k}|` over all modes.
    pub fn reality_defect(&self) -> (f64, [i32; 3]) {
        let mut worst = (0.0, [0, 0, 0]);
        for (k, v) in self.iter_modes() {
            let w = self.get([-k[0], -k[1], -k[2]]);
            let c = cconj(v);
            let d = ((c[0] - w[0]).norm_sqr() + (c[1] - w[1]).norm_sqr() + (c[2] - w[2]).norm_sqr())
                .sqrt();
            if d > worst.0 {
                worst = (d, k);
            }
        }
        worst
    }

    /// Largest `|k . c_k| / |k|` over all modes.
    pub fn divergence_defect(&self) -> f64 {
        self.iter_modes()
            .map(|(k, v)| {
                let kf = kf(k);
                rdot(&kf, v).norm() / (kf[0] * kf[0] + kf[1] * kf[1] + kf[2] * kf[2]).sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Maximum coefficient magnitude, a scale for relative tolerances.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| cnorm_sq(v).sqrt()).fold(0.0, f64::max)
    }

    /// Averages `c_k` with `conj(c_{-k})` so the field is exactly real.
    pub fn symmetrize(&mut self) {
        let origin = self.origin_slot();
        for s in 0..self.data.len() {
            if s >= origin {
                break;
            }
            let k = self.wavevector(s);
            let t = self.slot([-k[0], -k[1], -k[2]]);
            let a = self.data[s];
            let b = cconj(&self.data[t]);
            let avg = [
                (a[0] + b[0]) * 0.5,
                (a[1] + b[1]) * 0.5,
                (a[2] + b[2]) * 0.5,
            ];
            self.data[s] = avg;
            self.data[t] = cconj(&avg);
        }
        self.data[origin] = CZERO3;
    }
}

/// Wave vectors of every storage slot in order, origin included.
pub(crate) fn kgrid(m: usize) -> impl Iterator<Item = [f64; 3]> {
    let m = m as i32;
    (-m..=m).flat_map(move |a| (-m..=m).flat_map(move |b| (-m..=m).map(move |c| [a as f64, b as f64, c as f64])))
}

#[inline]
pub(crate) fn kf(k: [i32; 3]) -> [f64; 3] {
    [k[0] as f64, k[1] as f64, k[2] as f64]
}

/// `(1 + 4 pi^2 |k|^2)`, the symbol of `I - Delta` on the unit torus.
#[inline]
pub fn bessel_weight(k: [i32; 3]) -> f64 {
    let n2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
    1.0 + 4.0 * PI * PI * n2
}

pub fn sobolev_norm(f: &SpectralCoeffs, order: f64) -> f64 {
    if order == 0.0 {
        return f.data.iter().map(cnorm_sq).sum::<f64>().sqrt();
    }
    f.iter_modes()
        .map(|(k, v)| bessel_weight(k).powf(order) * cnorm_sq(v))
        .sum::<f64>()
        .sqrt()
}

/// A real, divergence-free, zero-mean vector field given by its truncated
/// Fourier coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField(SpectralCoeffs);

/// Absolute tolerance, relative to the largest coefficient, used when
/// validating raw coefficients.
pub const FIELD_TOLERANCE: f64 = 1e-10;

impl SpectralField {
    pub fn zeros(m: usize) -> Self {
        Self(SpectralCoeffs::zeros(m))
    }

    /// Validates reality and the divergence-free condition.
    pub fn from_coeffs(c: SpectralCoeffs) -> Result<Self> {
        let scale = c.max_abs().max(f64::MIN_POSITIVE);
        let (defect, k) = c.reality_defect();
        if defect > FIELD_TOLERANCE * scale {
            return Err(Error::Symmetry { k, defect });
        }
        let div = c.divergence_defect();
        if div > FIELD_TOLERANCE * scale {
            return Err(Error::InvalidParameter(format!(
                "field is not divergence free (defect {div:e})"
            )));
        }
        if cnorm_sq(&c.data[c.origin_slot()]) != 0.0 {
            return Err(Error::InvalidParameter("field has a nonzero mean".into()));
        }
        Ok(Self(c))
    }

    pub(crate) fn from_coeffs_unchecked(c: SpectralCoeffs) -> Self {
        Self(c)
    }

    pub fn coeffs(&self) -> &SpectralCoeffs {
        &self.0
    }

    pub fn into_coeffs(self) -> SpectralCoeffs {
        self.0
    }

    pub fn truncation(&self) -> usize {
        self.0.m
    }

    /// `||xi||_H`, the L^2 norm.
    pub fn norm_h(&self) -> f64 {
        sobolev_norm(&self.0, 0.0)
    }

    /// `||grad xi||_H^2 = sum 4 pi^2 |k|^2 |c_k|^2`.
    pub fn gradient_norm_sq(&self) -> f64 {
        self.0
            .iter_modes()
            .map(|(k, v)| (bessel_weight(k) - 1.0) * cnorm_sq(v))
            .sum()
    }

    pub fn sobolev_norm(&self, order: f64) -> f64 {
        sobolev_norm(&self.0, order)
    }

    /// Real L^2 inner product.
    pub fn inner(&self, other: &SpectralField) -> f64 {
        self.0.inner(&other.0).re
    }
}

impl AsRef<SpectralCoeffs> for SpectralField {
    fn as_ref(&self) -> &SpectralCoeffs {
        &self.0
    }
}

impl AsRef<SpectralCoeffs> for SpectralCoeffs {
    fn as_ref(&self) -> &SpectralCoeffs {
        self
    }
}
