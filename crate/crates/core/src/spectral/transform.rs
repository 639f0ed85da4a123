//! Pruned 3D FFTs between the truncated coefficient cube and a uniform
//! physical grid on the unit torus.
//!
//! Only lines that touch the cube `[-M, M]^3` are transformed along the first
//! two axes; the last axis is transformed in full, one plane of constant first
//! coordinate at a time, so that pointwise work can be fused with it. Two real
//! fields are packed into one complex transform.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use transpose::transpose;

use crate::error::{Error, Result};

const CZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

pub struct Transformer {
    m: usize,
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Full grid, `[x][y][z]`.
    buf: Vec<Complex64>,
    /// Cube in slot order `[a][b][c]`.
    cube: Vec<Complex64>,
    /// Cube with the first axis last: `[b][c][a]`.
    cube_t: Vec<Complex64>,
    /// Lines along the first axis: `[b][c][x]`.
    stage_a: Vec<Complex64>,
    /// `[c][x][b]`.
    stage_a_t: Vec<Complex64>,
    /// Lines along the second axis: `[c][x][y]`.
    stage_b: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for Transformer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Transformer")
            .field("m", &self.m)
            .field("n", &self.n)
            .finish()
    }
}

impl Clone for Transformer {
    fn clone(&self) -> Self {
        Self::with_grid(self.m, self.n).expect("grid already validated")
    }
}

/// Smallest power of two that is at least `3M`.
pub fn default_grid_size(m: usize) -> usize {
    (3 * m).next_power_of_two()
}

impl Transformer {
    pub fn new(m: usize) -> Self {
        Self::with_grid(m, default_grid_size(m)).expect("default grid satisfies the 2/3 rule")
    }

    /// Products of two fields truncated at `M` are alias free on the modes
    /// `|k|_inf <= M` only when `n > 3M`.
    pub fn with_grid(m: usize, n: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidTruncation(m));
        }
        if n <= 3 * m {
            return Err(Error::Configuration(format!(
                "physical grid {n} too small for a dealiased product at truncation {m}; need n > {}",
                3 * m
            )));
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        let side = 2 * m + 1;
        Ok(Self {
            m,
            n,
            fwd,
            inv,
            buf: vec![CZERO; n * n * n],
            cube: vec![CZERO; side * side * side],
            cube_t: vec![CZERO; side * side * side],
            stage_a: vec![CZERO; side * side * n],
            stage_a_t: vec![CZERO; side * side * n],
            stage_b: vec![CZERO; side * n * n],
            scratch: vec![CZERO; scratch_len],
        })
    }

    pub fn truncation(&self) -> usize {
        self.m
    }

    pub fn grid_size(&self) -> usize {
        self.n
    }

    pub fn grid_len(&self) -> usize {
        self.n * self.n * self.n
    }

    fn side(&self) -> usize {
        2 * self.m + 1
    }

    /// Rows of `side` cube coordinates `-M..=M` to zero-padded lines of `n`.
    fn pad(m: usize, n: usize, src: &[Complex64], dst: &mut [Complex64]) {
        let side = 2 * m + 1;
        for (s, d) in src.chunks_exact(side).zip(dst.chunks_exact_mut(n)) {
            d[..=m].copy_from_slice(&s[m..]);
            d[m + 1..n - m].fill(CZERO);
            d[n - m..].copy_from_slice(&s[..m]);
        }
    }

    /// Inverse of [`Self::pad`] on the retained coordinates.
    fn unpad(m: usize, n: usize, src: &[Complex64], dst: &mut [Complex64]) {
        let side = 2 * m + 1;
        for (s, d) in src.chunks_exact(n).zip(dst.chunks_exact_mut(side)) {
            d[m..].copy_from_slice(&s[..=m]);
            d[..m].copy_from_slice(&s[n - m..]);
        }
    }

    /// Grid index of cube coordinate `c`, i.e. of the wavenumber `c - M`.
    fn wrap(&self, c: usize) -> usize {
        (c as i64 - self.m as i64).rem_euclid(self.n as i64) as usize
    }

    /// Length of the partial transforms used by [`Self::inverse_slab`] and
    /// [`Self::forward_slab`].
    pub(crate) fn partial_len(&self) -> usize {
        self.side() * self.n * self.n
    }

    /// Inverse transforms along the first two axes: `partial[c][x][y]`.
    fn inverse_partial_with(&mut self, f: impl Fn(usize) -> Complex64, partial: &mut [Complex64]) {
        let (m, n, side) = (self.m, self.n, self.side());
        for (s, c) in self.cube.iter_mut().enumerate() {
            *c = f(s);
        }
        transpose(&self.cube, &mut self.cube_t, side * side, side);
        Self::pad(m, n, &self.cube_t, &mut self.stage_a);
        self.inv.process_with_scratch(&mut self.stage_a, &mut self.scratch);
        transpose(&self.stage_a, &mut self.stage_a_t, side * n, side);
        Self::pad(m, n, &self.stage_a_t, partial);
        self.inv.process_with_scratch(partial, &mut self.scratch);
    }

    /// Partial inverse of `a + i b`; see [`Self::inverse_packed`].
    pub(crate) fn inverse_packed_partial(&mut self, a: &[Complex64], b: Option<&[Complex64]>, partial: &mut [Complex64]) {
        match b {
            Some(b) => self.inverse_partial_with(|s| Complex64::new(a[s].re - b[s].im, a[s].im + b[s].re), partial),
            None => self.inverse_partial_with(|s| a[s], partial),
        }
    }

    /// Finishes an inverse transform on the plane `x`: `slab[y][z]`.
    pub(crate) fn inverse_slab(&mut self, partial: &[Complex64], x: usize, slab: &mut [Complex64]) {
        let n = self.n;
        slab.fill(CZERO);
        for c in 0..self.side() {
            let z = self.wrap(c);
            let row = &partial[(c * n + x) * n..(c * n + x + 1) * n];
            for (y, v) in row.iter().enumerate() {
                slab[y * n + z] = *v;
            }
        }
        self.inv.process_with_scratch(slab, &mut self.scratch);
    }

    /// Starts a forward transform on the plane `x`; `slab` is overwritten.
    pub(crate) fn forward_slab(&mut self, slab: &mut [Complex64], x: usize, partial: &mut [Complex64]) {
        let n = self.n;
        self.fwd.process_with_scratch(slab, &mut self.scratch);
        for c in 0..self.side() {
            let z = self.wrap(c);
            let row = &mut partial[(c * n + x) * n..(c * n + x + 1) * n];
            for (y, v) in row.iter_mut().enumerate() {
                *v = slab[y * n + z];
            }
        }
    }

    /// Forward transforms along the remaining axes into `cube`; `partial` is
    /// overwritten.
    fn forward_partial(&mut self, partial: &mut [Complex64]) {
        let (m, n, side) = (self.m, self.n, self.side());
        self.fwd.process_with_scratch(partial, &mut self.scratch);
        Self::unpad(m, n, partial, &mut self.stage_a_t);
        transpose(&self.stage_a_t, &mut self.stage_a, side, side * n);
        self.fwd.process_with_scratch(&mut self.stage_a, &mut self.scratch);
        Self::unpad(m, n, &self.stage_a, &mut self.cube_t);
        transpose(&self.cube_t, &mut self.cube, side, side * side);
    }

    /// Completes [`Self::forward_slab`] over all planes and unpacks as
    /// [`Self::forward_packed`] does.
    pub(crate) fn forward_packed_partial(&mut self, partial: &mut [Complex64], a: &mut [Complex64], b: Option<&mut [Complex64]>) {
        self.forward_partial(partial);
        self.unpack(a, b);
    }

    /// Cube spectrum to grid values in `out`.
    fn inverse_into(&mut self, f: impl Fn(usize) -> Complex64, out: &mut [Complex64]) {
        let len = self.n * self.n;
        let mut partial = std::mem::take(&mut self.stage_b);
        self.inverse_partial_with(f, &mut partial);
        for (x, slab) in out.chunks_exact_mut(len).enumerate() {
            self.inverse_slab(&partial, x, slab);
        }
        self.stage_b = partial;
    }

    fn inverse(&mut self, f: impl Fn(usize) -> Complex64) {
        let mut buf = std::mem::take(&mut self.buf);
        self.inverse_into(f, &mut buf);
        self.buf = buf;
    }

    /// Grid values of `a + i b` for cube spectra `a` and `b` (zero if absent).
    /// For Hermitian spectra the real and imaginary parts are the two real fields.
    pub fn inverse_packed(&mut self, a: &[Complex64], b: Option<&[Complex64]>, out: &mut [Complex64]) {
        match b {
            Some(b) => self.inverse_into(|s| Complex64::new(a[s].re - b[s].im, a[s].im + b[s].re), out),
            None => self.inverse_into(|s| a[s], out),
        }
    }

    /// Inverse of [`Self::inverse_packed`] for real fields packed as
    /// `re = a`, `im = b`; `grid` is used as workspace and overwritten.
    pub fn forward_packed(&mut self, grid: &mut [Complex64], a: &mut [Complex64], b: Option<&mut [Complex64]>) {
        self.forward_from(grid);
        self.unpack(a, b);
    }

    fn unpack(&self, a: &mut [Complex64], b: Option<&mut [Complex64]>) {
        let h = 0.5 / self.grid_len() as f64;
        match b {
            Some(b) => self.gather(|s, z, zn| {
                a[s] = Complex64::new((z.re + zn.re) * h, (z.im - zn.im) * h);
                b[s] = Complex64::new((z.im + zn.im) * h, (zn.re - z.re) * h);
            }),
            None => self.gather(|s, z, zn| {
                a[s] = Complex64::new((z.re + zn.re) * h, (z.im - zn.im) * h);
            }),
        }
    }

    fn forward(&mut self) {
        let mut buf = std::mem::take(&mut self.buf);
        self.forward_from(&mut buf);
        self.buf = buf;
    }

    /// Grid values in `grid` to the unnormalised cube spectrum in `cube`.
    fn forward_from(&mut self, grid: &mut [Complex64]) {
        let len = self.n * self.n;
        let mut partial = std::mem::take(&mut self.stage_b);
        for (x, slab) in grid.chunks_exact_mut(len).enumerate() {
            self.forward_slab(slab, x, &mut partial);
        }
        self.forward_partial(&mut partial);
        self.stage_b = partial;
    }

    /// Visits each cube slot with its coefficient and the one at `-k`.
    fn gather(&self, mut f: impl FnMut(usize, Complex64, Complex64)) {
        let last = self.cube.len() - 1;
        for (s, z) in self.cube.iter().enumerate() {
            f(s, *z, self.cube[last - s]);
        }
    }

    /// Samples two real fields given by Hermitian cube spectra.
    pub fn to_physical2(&mut self, a: &[Complex64], b: &[Complex64], out_a: &mut [f64], out_b: &mut [f64]) {
        debug_assert_eq!(a.len(), self.side().pow(3));
        self.inverse(|s| Complex64::new(a[s].re - b[s].im, a[s].im + b[s].re));
        for ((z, pa), pb) in self.buf.iter().zip(out_a.iter_mut()).zip(out_b.iter_mut()) {
            *pa = z.re;
            *pb = z.im;
        }
    }

    pub fn to_physical1(&mut self, a: &[Complex64], out: &mut [f64]) {
        self.inverse(|s| a[s]);
        for (z, p) in self.buf.iter().zip(out.iter_mut()) {
            *p = z.re;
        }
    }

    /// Samples a general complex field on the grid.
    pub fn to_physical_complex(&mut self, a: &[Complex64]) -> Vec<Complex64> {
        self.inverse(|s| a[s]);
        self.buf.clone()
    }

    /// Truncated Fourier coefficients of two real grid functions.
    pub fn to_spectral2(&mut self, fa: &[f64], fb: &[f64], a: &mut [Complex64], b: &mut [Complex64]) {
        for ((z, &x), &y) in self.buf.iter_mut().zip(fa).zip(fb) {
            *z = Complex64::new(x, y);
        }
        self.forward();
        let h = 0.5 / self.grid_len() as f64;
        self.gather(|s, z, zn| {
            // a = (z + conj z_-k) / 2, b = (z - conj z_-k) / (2i)
            a[s] = Complex64::new((z.re + zn.re) * h, (z.im - zn.im) * h);
            b[s] = Complex64::new((z.im + zn.im) * h, (zn.re - z.re) * h);
        });
    }

    pub fn to_spectral1(&mut self, fa: &[f64], a: &mut [Complex64]) {
        for (z, &x) in self.buf.iter_mut().zip(fa) {
            *z = Complex64::new(x, 0.0);
        }
        self.forward();
        let norm = 1.0 / self.grid_len() as f64;
        self.gather(|s, z, _| a[s] = z * norm);
    }

    /// Truncated coefficients of a general complex grid function.
    pub fn to_spectral_complex(&mut self, f: &[Complex64]) -> Vec<Complex64> {
        self.buf.copy_from_slice(f);
        self.forward();
        let norm = 1.0 / self.grid_len() as f64;
        let mut out = vec![CZERO; self.side().pow(3)];
        self.gather(|s, z, _| out[s] = z * norm);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_hermitian(m: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        let side = 2 * m + 1;
        let len = side * side * side;
        let mut a: Vec<Complex64> = (0..len)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        for s in 0..len {
            let t = len - 1 - s;
            if s < t {
                a[t] = a[s].conj();
            } else if s == t {
                a[s] = Complex64::new(a[s].re, 0.0);
            }
        }
        a
    }

    #[test]
    fn grid_rule() {
        assert_eq!(default_grid_size(1), 4);
        assert_eq!(default_grid_size(8), 32);
        assert!(Transformer::with_grid(4, 12).is_err());
        assert!(Transformer::with_grid(4, 13).is_ok());
    }

    #[test]
    fn matches_direct_synthesis() {
        let m = 2;
        let mut t = Transformer::new(m);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_hermitian(m, &mut rng);
        let n = t.grid_size();
        let mut phys = vec![0.0; t.grid_len()];
        t.to_physical1(&a, &mut phys);
        let side = 2 * m + 1;
        for &(x, y, z) in &[(0usize, 0usize, 0usize), (1, 2, 3), (5, 7, 4)] {
            let mut acc = Complex64::new(0.0, 0.0);
            for s in 0..side.pow(3) {
                let k = [
                    (s / (side * side)) as f64 - m as f64,
                    ((s / side) % side) as f64 - m as f64,
                    (s % side) as f64 - m as f64,
                ];
                let ph = 2.0 * PI * (k[0] * x as f64 + k[1] * y as f64 + k[2] * z as f64) / n as f64;
                acc += a[s] * Complex64::new(ph.cos(), ph.sin());
            }
            assert!(acc.im.abs() < 1e-12);
            assert!((acc.re - phys[(x * n + y) * n + z]).abs() < 1e-12);
        }
    }

    #[test]
    fn packed_roundtrip() {
        let m = 3;
        let mut t = Transformer::new(m);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_hermitian(m, &mut rng);
        let b = random_hermitian(m, &mut rng);
        let mut fa = vec![0.0; t.grid_len()];
        let mut fb = vec![0.0; t.grid_len()];
        t.to_physical2(&a, &b, &mut fa, &mut fb);
        let mut a2 = vec![CZERO; a.len()];
        let mut b2 = vec![CZERO; b.len()];
        t.to_spectral2(&fa, &fb, &mut a2, &mut b2);
        for s in 0..a.len() {
            assert!((a[s] - a2[s]).norm() < 1e-13);
            assert!((b[s] - b2[s]).norm() < 1e-13);
        }
        let mut a3 = vec![CZERO; a.len()];
        t.to_spectral1(&fb, &mut a3);
        for s in 0..a.len() {
            assert!((b[s] - a3[s]).norm() < 1e-13);
        }
    }
}
