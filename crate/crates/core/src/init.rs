//! Initial vorticity fields.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::lattice::{frame_for, sign_class, SignClass};
use crate::spectral::{curl, SpectralCoeffs, SpectralField};
use crate::vec3::{cconj, CVec3};

fn check_mode(m: usize, k: [i32; 3]) -> Result<()> {
    let inside = k != [0, 0, 0] && k.iter().all(|c| c.unsigned_abs() as usize <= m);
    if inside {
        Ok(())
    } else {
        Err(Error::UnknownMode(k))
    }
}

fn rescaled(c: SpectralCoeffs, norm: f64) -> SpectralField {
    let current = c.sobolev_norm(0.0);
    let c = if current > 0.0 { c.scaled(norm / current) } else { c };
    SpectralField::from_coeffs_unchecked(c)
}

/// `amplitude * (a_{k,alpha} e^{2 pi i k.x} + c.c.)`, a real field with
/// two nonzero coefficients.
pub fn single_mode(m: usize, k: [i32; 3], alpha: usize, amplitude: Complex64) -> Result<SpectralField> {
    check_mode(m, k)?;
    if !(1..=2).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("alpha must be 1 or 2, got {alpha}")));
    }
    let a = frame_for(k)[alpha - 1];
    let v: CVec3 = [amplitude * a[0], amplitude * a[1], amplitude * a[2]];
    let mut c = SpectralCoeffs::zeros(m);
    c.set(k, v);
    c.set([-k[0], -k[1], -k[2]], cconj(&v));
    Ok(SpectralField::from_coeffs_unchecked(c))
}

/// Smooth two-mode field, `(1,0,0)` and `(0,1,1)`, with H-norm `norm`.
pub fn two_mode(m: usize, norm: f64) -> Result<SpectralField> {
    let a = single_mode(m, [1, 0, 0], 1, Complex64::new(1.0, 0.0))?;
    let b = single_mode(m, [0, 1, 1], 2, Complex64::new(0.3, 0.8))?;
    let mut c = a.into_coeffs();
    c.axpy(1.0, b.coeffs());
    Ok(rescaled(c, norm))
}

/// Vorticity of the Taylor-Green velocity
/// `(sin x cos y cos z, -cos x sin y cos z, 0)` with `x -> 2 pi x`,
/// rescaled to H-norm `norm`.
pub fn taylor_green(m: usize, norm: f64) -> Result<SpectralField> {
    if m == 0 {
        return Err(Error::InvalidTruncation(0));
    }
    let mut u = SpectralCoeffs::zeros(m);
    for s1 in [-1i32, 1] {
        for s2 in [-1i32, 1] {
            for s3 in [-1i32, 1] {
                let v = [
                    Complex64::new(0.0, -(s1 as f64) / 8.0),
                    Complex64::new(0.0, s2 as f64 / 8.0),
                    Complex64::new(0.0, 0.0),
                ];
                u.set([s1, s2, s3], v);
            }
        }
    }
    Ok(rescaled(curl(&u), norm))
}

/// Random divergence-free field: independent complex Gaussian coefficients
/// in `k^perp` with amplitude `|k|^{-slope}`, rescaled to H-norm `norm`.
pub fn random_field(m: usize, slope: f64, norm: f64, seed: u64) -> Result<SpectralField> {
    if m == 0 {
        return Err(Error::InvalidTruncation(0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = SpectralCoeffs::zeros(m);
    let origin = c.origin_slot();
    for s in origin + 1..c.as_slice().len() {
        let k = c.wavevector(s);
        debug_assert_eq!(sign_class(k), SignClass::Plus);
        let [a1, a2] = frame_for(k);
        let amp = ((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64).powf(-slope / 2.0);
        let mut z = [0.0; 4];
        for x in &mut z {
            *x = StandardNormal.sample(&mut rng);
        }
        let (p, q) = (Complex64::new(z[0], z[1]) * amp, Complex64::new(z[2], z[3]) * amp);
        let v: CVec3 = [
            p * a1[0] + q * a2[0],
            p * a1[1] + q * a2[1],
            p * a1[2] + q * a2[2],
        ];
        c.set(k, v);
        c.set([-k[0], -k[1], -k[2]], cconj(&v));
    }
    Ok(rescaled(c, norm))
}

/// Random field with spectral slope `11/6` (vorticity of a Kolmogorov-like
/// velocity spectrum), the default random initial condition.
pub const DEFAULT_SLOPE: f64 = 11.0 / 6.0;

/// Point value at `x` in the unit torus by direct summation over all modes.
pub fn evaluate(field: &SpectralCoeffs, x: [f64; 3]) -> [Complex64; 3] {
    let mut out = [Complex64::new(0.0, 0.0); 3];
    for (k, v) in field.iter_modes() {
        let phase = 2.0 * PI * (k[0] as f64 * x[0] + k[1] as f64 * x[1] + k[2] as f64 * x[2]);
        let e = Complex64::from_polar(1.0, phase);
        for c in 0..3 {
            out[c] += v[c] * e;
        }
    }
    out
}
