//! Leray projection, Biot-Savart inversion, the Lie derivative, transport by a
//! divergence-free field and the trilinear form.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::field::{kf, kgrid, SpectralCoeffs, SpectralField};
use super::transform::Transformer;
use crate::error::{Error, Result};
use crate::lattice::SigmaAction;
use crate::vec3::{rcross, rdot, CVec3, CZERO3};

const CZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const TWO_PI: f64 = 2.0 * PI;

#[inline]
fn mul_i(z: Complex64) -> Complex64 {
    Complex64::new(-z.im, z.re)
}

/// Removes the component parallel to `k` from every coefficient.
pub fn project_in_place(f: &mut SpectralCoeffs) {
    let m = f.truncation();
    for (v, k) in f.as_mut_slice().iter_mut().zip(kgrid(m)) {
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        if k2 == 0.0 {
            *v = CZERO3;
            continue;
        }
        let p = rdot(&k, v) / k2;
        for c in 0..3 {
            v[c] -= p * k[c];
        }
    }
}

/// Leray projection of Hermitian raw coefficients onto `H`.
pub fn leray_project(f: &SpectralCoeffs) -> Result<SpectralField> {
    let scale = f.max_abs().max(f64::MIN_POSITIVE);
    let (defect, k) = f.reality_defect();
    if defect > super::FIELD_TOLERANCE * scale {
        return Err(Error::Symmetry { k, defect });
    }
    let mut out = f.clone();
    project_in_place(&mut out);
    Ok(SpectralField::from_coeffs_unchecked(out))
}

/// Velocity `u` with `curl u = xi`: `u_k = i (k x xi_k) / (2 pi |k|^2)`.
pub fn biot_savart(xi: &SpectralField) -> SpectralField {
    let src = xi.coeffs();
    let mut out = SpectralCoeffs::zeros(src.truncation());
    for ((o, v), k) in out.as_mut_slice().iter_mut().zip(src.as_slice()).zip(kgrid(src.truncation())) {
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        if k2 == 0.0 {
            continue;
        }
        let c = rcross(&k, v);
        let f = 1.0 / (TWO_PI * k2);
        *o = [mul_i(c[0]) * f, mul_i(c[1]) * f, mul_i(c[2]) * f];
    }
    SpectralField::from_coeffs_unchecked(out)
}

/// `curl f`: `2 pi i k x f_k`.
pub fn curl(f: &SpectralCoeffs) -> SpectralCoeffs {
    let mut out = SpectralCoeffs::zeros(f.truncation());
    for ((o, v), k) in out.as_mut_slice().iter_mut().zip(f.as_slice()).zip(kgrid(f.truncation())) {
        let c = rcross(&k, v);
        *o = [mul_i(c[0]) * TWO_PI, mul_i(c[1]) * TWO_PI, mul_i(c[2]) * TWO_PI];
    }
    out
}

/// `Pi (sigma_{k,alpha} . grad xi)` by exact single-mode convolution: the
/// coefficient at `l + k` is `Pi_{l+k}[(a . 2 pi i l) xi_l]`. Modes pushed
/// outside the truncation are dropped.
pub fn transport_apply(action: &SigmaAction, xi: &SpectralCoeffs) -> SpectralCoeffs {
    let mut out = SpectralCoeffs::zeros(xi.truncation());
    for (l, v) in xi.iter_modes() {
        let target = [l[0] + action.shift[0], l[1] + action.shift[1], l[2] + action.shift[2]];
        if target == [0, 0, 0] || !out.in_range(target) {
            continue;
        }
        let lf = kf(l);
        let g = Complex64::new(0.0, TWO_PI * crate::vec3::dot(&action.amplitude, &lf));
        let s = out.slot(target);
        let o = &mut out.as_mut_slice()[s];
        for c in 0..3 {
            o[c] += v[c] * g;
        }
    }
    project_in_place(&mut out);
    out
}

fn component(f: &SpectralCoeffs, c: usize) -> Vec<Complex64> {
    f.as_slice().iter().map(|v| v[c]).collect()
}

fn check_truncation(tr: &Transformer, fields: &[&SpectralCoeffs]) -> Result<()> {
    for f in fields {
        if f.truncation() != tr.truncation() {
            return Err(Error::Configuration(format!(
                "field truncation {} does not match workspace truncation {}",
                f.truncation(),
                tr.truncation()
            )));
        }
    }
    Ok(())
}

// Packed inputs, two real fields per complex transform: (xi0, xi1),
// (xi2, u0), (u1, u2). The transport field is kept on the grid as (v0, v1),
// (v2, 0).
//
// Packed outputs: (c0, c1), (c2, T00), (T01, T02), (T10, T11), (T12, T20),
// (T21, T22) with c = xi x u and T_ij = v_i xi_j. After the forward
// transforms c_i sits in spec[i] and T_ij in spec[3 + 3i + j].
const FLUX: usize = 3;

/// Workspace for pseudo-spectral products at one truncation.
///
/// Inputs are transformed along the first two axes only; the last inverse
/// stage, the pointwise products and the first forward stage run one grid
/// plane at a time.
#[derive(Debug, Clone)]
pub struct SpectralOps {
    tr: Transformer,
    partial_in: Vec<Vec<Complex64>>,
    partial_out: Vec<Vec<Complex64>>,
    slab_in: Vec<Vec<Complex64>>,
    slab_out: Vec<Vec<Complex64>>,
    v_grid: Vec<Vec<Complex64>>,
    spec: Vec<Vec<Complex64>>,
    cached_v: bool,
}

impl SpectralOps {
    pub fn new(m: usize) -> Self {
        Self::with_transformer(Transformer::new(m))
    }

    pub fn with_grid(m: usize, n: usize) -> Result<Self> {
        Ok(Self::with_transformer(Transformer::with_grid(m, n)?))
    }

    fn with_transformer(tr: Transformer) -> Self {
        let side = 2 * tr.truncation() + 1;
        let n = tr.grid_size();
        let buffers = |count: usize, len: usize| (0..count).map(|_| vec![CZERO; len]).collect();
        Self {
            partial_in: buffers(3, tr.partial_len()),
            partial_out: buffers(6, tr.partial_len()),
            slab_in: buffers(3, n * n),
            slab_out: buffers(6, n * n),
            v_grid: buffers(2, tr.grid_len()),
            spec: buffers(12, side * side * side),
            cached_v: false,
            tr,
        }
    }

    pub fn truncation(&self) -> usize {
        self.tr.truncation()
    }

    pub fn transformer(&mut self) -> &mut Transformer {
        &mut self.tr
    }

    /// Partial inverse transforms of `xi` and, when given, `u`.
    fn load(&mut self, xi: &SpectralCoeffs, u: Option<&SpectralCoeffs>) {
        let x: Vec<Vec<Complex64>> = (0..3).map(|i| component(xi, i)).collect();
        let [p0, p1, p2] = &mut self.partial_in[..] else { unreachable!() };
        self.tr.inverse_packed_partial(&x[0], Some(&x[1]), p0);
        match u {
            Some(u) => {
                let w: Vec<Vec<Complex64>> = (0..3).map(|i| component(u, i)).collect();
                self.tr.inverse_packed_partial(&x[2], Some(&w[0]), p1);
                self.tr.inverse_packed_partial(&w[1], Some(&w[2]), p2);
            }
            None => self.tr.inverse_packed_partial(&x[2], None, p1),
        }
    }

    /// Pointwise products plane by plane, then the remaining forward
    /// transforms into `spec`. With `lie` only outputs 0 and 1 are formed, the
    /// second carrying `c2` alone; with `flux` only outputs 1 to 5.
    fn products(&mut self, lie: bool, flux: bool) {
        let inputs = if lie { 3 } else { 2 };
        let outputs = match (lie, flux) {
            (true, true) => 0..6,
            (true, false) => 0..2,
            _ => 1..6,
        };
        let n = self.tr.grid_size();
        let plane = n * n;
        let Self {
            tr,
            partial_in,
            partial_out,
            slab_in,
            slab_out,
            v_grid,
            spec,
            ..
        } = self;
        for x in 0..n {
            for (p, slab) in partial_in.iter().zip(slab_in.iter_mut()).take(inputs) {
                tr.inverse_slab(p, x, slab);
            }
            let [a, b, c] = &slab_in[..] else { unreachable!() };
            let (va, vb) = (&v_grid[0][x * plane..(x + 1) * plane], &v_grid[1][x * plane..(x + 1) * plane]);
            let [o0, o1, o2, o3, o4, o5] = &mut slab_out[..] else { unreachable!() };
            let (a, b, c) = (&a[..plane], &b[..plane], &c[..plane]);
            let (o0, o1, o2, o3, o4, o5) = (
                &mut o0[..plane],
                &mut o1[..plane],
                &mut o2[..plane],
                &mut o3[..plane],
                &mut o4[..plane],
                &mut o5[..plane],
            );
            for p in 0..plane {
                let x = [a[p].re, a[p].im, b[p].re];
                let mut c2 = 0.0;
                if lie {
                    let u = [b[p].im, c[p].re, c[p].im];
                    o0[p] = Complex64::new(x[1] * u[2] - x[2] * u[1], x[2] * u[0] - x[0] * u[2]);
                    c2 = x[0] * u[1] - x[1] * u[0];
                }
                if flux {
                    let v = [va[p].re, va[p].im, vb[p].re];
                    o1[p] = Complex64::new(c2, v[0] * x[0]);
                    o2[p] = Complex64::new(v[0] * x[1], v[0] * x[2]);
                    o3[p] = Complex64::new(v[1] * x[0], v[1] * x[1]);
                    o4[p] = Complex64::new(v[1] * x[2], v[2] * x[0]);
                    o5[p] = Complex64::new(v[2] * x[1], v[2] * x[2]);
                } else {
                    o1[p] = Complex64::new(c2, 0.0);
                }
            }
            for j in outputs.clone() {
                tr.forward_slab(&mut slab_out[j], x, &mut partial_out[j]);
            }
        }
        let last = outputs.end - 1;
        for j in outputs {
            let (lo, hi) = spec.split_at_mut(2 * j + 1);
            let b = if j == last && !flux { None } else { Some(&mut hi[0][..]) };
            tr.forward_packed_partial(&mut partial_out[j], &mut lo[2 * j], b);
        }
    }

    /// `curl c` with `c_i` in `spec[i]`.
    fn curl_of_spec(&self) -> SpectralCoeffs {
        let m = self.truncation();
        let sp = &self.spec;
        let mut out = SpectralCoeffs::zeros(m);
        for (s, (o, k)) in out.as_mut_slice().iter_mut().zip(kgrid(m)).enumerate() {
            let w: CVec3 = [sp[0][s], sp[1][s], sp[2][s]];
            let c = rcross(&k, &w);
            *o = [mul_i(c[0]) * TWO_PI, mul_i(c[1]) * TWO_PI, mul_i(c[2]) * TWO_PI];
        }
        out
    }

    /// `Pi(d_i T_ij)` with `T_ij` in `spec[FLUX + 3i + j]`.
    fn divergence_of_flux(&self) -> SpectralCoeffs {
        let m = self.truncation();
        let sp = &self.spec[FLUX..];
        let mut out = SpectralCoeffs::zeros(m);
        for (s, (o, k)) in out.as_mut_slice().iter_mut().zip(kgrid(m)).enumerate() {
            for j in 0..3 {
                let d = sp[j][s] * k[0] + sp[3 + j][s] * k[1] + sp[6 + j][s] * k[2];
                o[j] = mul_i(d) * TWO_PI;
            }
        }
        project_in_place(&mut out);
        out
    }

    /// `L_u xi = u . grad xi - xi . grad u`, computed as `curl(xi x u)`, which
    /// agrees with the advective form for divergence-free `u` and `xi`. The
    /// product is formed on the grid; the result is truncated at `M`.
    pub fn lie_derivative(&mut self, u: &SpectralField, xi: &SpectralField) -> Result<SpectralCoeffs> {
        check_truncation(&self.tr, &[u.coeffs(), xi.coeffs()])?;
        self.load(xi.coeffs(), Some(u.coeffs()));
        self.products(true, false);
        Ok(self.curl_of_spec())
    }

    /// `Pi(v . grad xi)` for a divergence-free `v`, via the flux form
    /// `d_i (v_i xi_j)`, truncated at `M`. Replaces any cached transport field.
    pub fn transport(&mut self, v: &SpectralField, xi: &SpectralCoeffs) -> Result<SpectralCoeffs> {
        check_truncation(&self.tr, &[v.coeffs(), xi])?;
        self.set_transport_field(v)?;
        self.cached_transport(xi)
    }

    /// Keeps `v` on the grid for subsequent cached-transport calls.
    pub fn set_transport_field(&mut self, v: &SpectralField) -> Result<()> {
        check_truncation(&self.tr, &[v.coeffs()])?;
        let c: Vec<Vec<Complex64>> = (0..3).map(|i| component(v.coeffs(), i)).collect();
        let [v01, v2] = &mut self.v_grid[..] else { unreachable!() };
        self.tr.inverse_packed(&c[0], Some(&c[1]), v01);
        self.tr.inverse_packed(&c[2], None, v2);
        self.cached_v = true;
        Ok(())
    }

    /// Largest pointwise speed of the cached transport field.
    pub fn cached_transport_sup(&self) -> Option<f64> {
        if !self.cached_v {
            return None;
        }
        let (a, b) = (&self.v_grid[0], &self.v_grid[1]);
        Some(
            a.iter()
                .zip(b)
                .map(|(p, q)| (p.norm_sqr() + q.re * q.re).sqrt())
                .fold(0.0, f64::max),
        )
    }

    fn require_cache(&self) -> Result<()> {
        if self.cached_v {
            Ok(())
        } else {
            Err(Error::Configuration("no transport field has been set".into()))
        }
    }

    /// `Pi(v . grad xi)` with the cached transport field.
    pub fn cached_transport(&mut self, xi: &SpectralCoeffs) -> Result<SpectralCoeffs> {
        self.require_cache()?;
        check_truncation(&self.tr, &[xi])?;
        self.load(xi, None);
        self.products(false, true);
        Ok(self.divergence_of_flux())
    }

    /// `(L_u xi, Pi(v . grad xi))` with the cached transport field.
    pub fn lie_and_cached_transport(
        &mut self,
        u: &SpectralField,
        xi: &SpectralField,
    ) -> Result<(SpectralCoeffs, SpectralCoeffs)> {
        self.require_cache()?;
        check_truncation(&self.tr, &[u.coeffs(), xi.coeffs()])?;
        self.load(xi.coeffs(), Some(u.coeffs()));
        self.products(true, true);
        Ok((self.curl_of_spec(), self.divergence_of_flux()))
    }

    /// Both pieces of the vorticity right-hand side sharing one set of
    /// transforms: returns `(L_u xi, Pi(v . grad xi))`.
    pub fn lie_and_transport(
        &mut self,
        u: &SpectralField,
        xi: &SpectralField,
        v: Option<&SpectralField>,
    ) -> Result<(SpectralCoeffs, Option<SpectralCoeffs>)> {
        check_truncation(&self.tr, &[u.coeffs(), xi.coeffs()])?;
        match v {
            None => Ok((self.lie_derivative(u, xi)?, None)),
            Some(v) => {
                self.set_transport_field(v)?;
                let (lie, noise) = self.lie_and_cached_transport(u, xi)?;
                Ok((lie, Some(noise)))
            }
        }
    }

    /// Real grid values of each listed spectrum.
    fn physical(&mut self, comps: &[Vec<Complex64>]) -> Vec<Vec<f64>> {
        let mut g = vec![CZERO; self.tr.grid_len()];
        let mut out = Vec::with_capacity(comps.len());
        for pair in comps.chunks(2) {
            self.tr.inverse_packed(&pair[0], pair.get(1).map(|b| &b[..]), &mut g);
            out.push(g.iter().map(|z| z.re).collect());
            if pair.len() == 2 {
                out.push(g.iter().map(|z| z.im).collect());
            }
        }
        out
    }

    /// `b(u, v, w) = int ((u . grad) v) . w dx`, evaluated with Parseval after
    /// forming `(u . grad) v` on the grid.
    pub fn trilinear_b(&mut self, u: &SpectralCoeffs, v: &SpectralCoeffs, w: &SpectralCoeffs) -> Result<f64> {
        check_truncation(&self.tr, &[u, v, w])?;
        let m = self.truncation();
        let mut comps: Vec<Vec<Complex64>> = (0..3).map(|i| component(u, i)).collect();
        // d_i v_j at 3 + 3i + j.
        for i in 0..3 {
            for j in 0..3 {
                comps.push(
                    v.as_slice()
                        .iter()
                        .zip(kgrid(m))
                        .map(|(x, k)| mul_i(x[j]) * (TWO_PI * k[i]))
                        .collect(),
                );
            }
        }
        let g = self.physical(&comps);
        let adv = |j: usize, p: usize| g[0][p] * g[3 + j][p] + g[1][p] * g[6 + j][p] + g[2][p] * g[9 + j][p];
        let size = comps[0].len();
        let mut out = [vec![CZERO; size], vec![CZERO; size], vec![CZERO; size]];
        let mut grid: Vec<Complex64> = (0..self.tr.grid_len()).map(|p| Complex64::new(adv(0, p), adv(1, p))).collect();
        let (o0, rest) = out.split_at_mut(1);
        self.tr.forward_packed(&mut grid, &mut o0[0], Some(&mut rest[0]));
        let mut grid: Vec<Complex64> = (0..self.tr.grid_len()).map(|p| Complex64::new(adv(2, p), 0.0)).collect();
        self.tr.forward_packed(&mut grid, &mut rest[1], None);
        let mut acc = 0.0;
        for (s, wv) in w.as_slice().iter().enumerate() {
            for j in 0..3 {
                acc += (out[j][s] * wv[j].conj()).re;
            }
        }
        Ok(acc)
    }

    /// Samples a real field on the physical grid; one array per component.
    pub fn to_physical(&mut self, f: &SpectralCoeffs) -> [Vec<f64>; 3] {
        let comps: Vec<Vec<Complex64>> = (0..3).map(|i| component(f, i)).collect();
        let mut g = self.physical(&comps).into_iter();
        [g.next().unwrap(), g.next().unwrap(), g.next().unwrap()]
    }

    /// Largest pointwise magnitude of a real field on the grid.
    pub fn sup_norm(&mut self, f: &SpectralCoeffs) -> f64 {
        let [a, b, c] = self.to_physical(f);
        a.iter()
            .zip(&b)
            .zip(&c)
            .map(|((x, y), z)| (x * x + y * y + z * z).sqrt())
            .fold(0.0, f64::max)
    }
}
