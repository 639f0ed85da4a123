use std::f64::consts::PI;

use num_complex::Complex64;
use nswz_core::dynamics::NoiseModel;
use nswz_core::init::{random_field, single_mode, DEFAULT_SLOPE};
use nswz_core::lattice::Lattice;
use nswz_core::noise::RealIndex;
use nswz_core::spectral::{
    biot_savart, curl, leray_project, project_in_place, sobolev_norm, transport_apply, SpectralCoeffs, SpectralField, SpectralOps,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `(a . grad) b` by direct convolution over all mode pairs, truncated.
fn convolve_advect(a: &SpectralCoeffs, b: &SpectralCoeffs) -> SpectralCoeffs {
    let mut out = SpectralCoeffs::zeros(a.truncation());
    for (p, ap) in a.iter_modes() {
        for (q, bq) in b.iter_modes() {
            let k = [p[0] + q[0], p[1] + q[1], p[2] + q[2]];
            if !out.in_range(k) || k == [0, 0, 0] {
                continue;
            }
            let g = (ap[0] * q[0] as f64 + ap[1] * q[1] as f64 + ap[2] * q[2] as f64) * I * (2.0 * PI);
            let mut v = out.get(k);
            for c in 0..3 {
                v[c] += g * bq[c];
            }
            out.set(k, v);
        }
    }
    out
}

fn max_diff(a: &SpectralCoeffs, b: &SpectralCoeffs) -> f64 {
    a.sub(b).max_abs()
}

fn noise_velocity(m: usize, shell: usize, seed: u64) -> SpectralField {
    let model = NoiseModel::new(m, shell, 1.0, 10.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<(RealIndex, f64)> = model.real_indices().into_iter().map(|i| (i, rng.random_range(-1.0..1.0))).collect();
    model
        .velocity(|ix| values.iter().find(|(j, _)| *j == ix).map(|(_, v)| *v))
        .unwrap()
}

#[test]
fn leray_examples() {
    let mut f = SpectralCoeffs::zeros(1);
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    f.set([0, 0, 1], [one, zero, zero]);
    f.set([0, 0, -1], [one, zero, zero]);
    f.set([1, 0, 0], [one, one, zero]);
    f.set([-1, 0, 0], [one, one, zero]);
    f.set([0, 1, 0], [zero, one, zero]);
    f.set([0, -1, 0], [zero, one, zero]);
    let p = leray_project(&f).unwrap();
    assert_eq!(p.coeffs().get([0, 0, 1]), [one, zero, zero]);
    assert_eq!(p.coeffs().get([1, 0, 0]), [zero, one, zero]);
    assert_eq!(p.coeffs().get([0, 1, 0]), [zero; 3]);
}

#[test]
fn leray_rejects_broken_symmetry() {
    let mut f = SpectralCoeffs::zeros(1);
    f.set([1, 0, 0], [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
    assert!(leray_project(&f).is_err());
}

#[test]
fn leray_is_an_orthogonal_projection() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut f = SpectralCoeffs::zeros(3);
    let slots: Vec<[i32; 3]> = f.iter_modes().map(|(k, _)| k).collect();
    for k in slots {
        if f.get(k) != [Complex64::new(0.0, 0.0); 3] {
            continue;
        }
        let v: [Complex64; 3] = std::array::from_fn(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        f.set(k, v);
        f.set([-k[0], -k[1], -k[2]], v.map(|z| z.conj()));
    }
    let p = leray_project(&f).unwrap();
    let pp = leray_project(p.coeffs()).unwrap();
    assert!(max_diff(p.coeffs(), pp.coeffs()) < 1e-15);
    assert!(p.norm_h() <= f.sobolev_norm(0.0));
    assert!(p.coeffs().divergence_defect() < 1e-14);
}

#[test]
fn biot_savart_single_mode() {
    let mut c = SpectralCoeffs::zeros(1);
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    c.set([0, 0, 1], [one, zero, zero]);
    c.set([0, 0, -1], [one, zero, zero]);
    let u = biot_savart(&SpectralField::from_coeffs(c).unwrap());
    let got = u.coeffs().get([0, 0, 1]);
    assert!((got[1] - I / (2.0 * PI)).norm() < 1e-15);
    assert!(got[0].norm() < 1e-15 && got[2].norm() < 1e-15);
}

#[test]
fn biot_savart_round_trip() {
    let xi = random_field(6, DEFAULT_SLOPE, 3.0, 11).unwrap();
    let u = biot_savart(&xi);
    assert!(u.coeffs().divergence_defect() < 1e-14);
    let back = curl(u.coeffs());
    assert!(max_diff(&back, xi.coeffs()) <= 1e-12 * xi.coeffs().max_abs());
    assert_eq!(biot_savart(&SpectralField::zeros(4)).norm_h(), 0.0);
}

#[test]
fn lie_derivative_matches_convolution() {
    let mut ops = SpectralOps::new(2);
    for seed in 0..4 {
        let xi = random_field(2, 1.0, 1.0, seed).unwrap();
        let u = biot_savart(&random_field(2, 0.5, 2.0, 100 + seed).unwrap());
        let got = ops.lie_derivative(&u, &xi).unwrap();
        let mut want = convolve_advect(u.coeffs(), xi.coeffs());
        want.axpy(-1.0, &convolve_advect(xi.coeffs(), u.coeffs()));
        assert!(max_diff(&got, &want) < 1e-10, "seed {seed}: {}", max_diff(&got, &want));
    }
}

#[test]
fn lie_derivative_of_own_curl() {
    let u = single_mode(2, [1, 1, 0], 1, Complex64::new(0.4, -0.2)).unwrap();
    let xi = SpectralField::from_coeffs(curl(u.coeffs())).unwrap();
    let mut ops = SpectralOps::new(2);
    let got = ops.lie_derivative(&u, &xi).unwrap();
    let mut want = convolve_advect(u.coeffs(), xi.coeffs());
    want.axpy(-1.0, &convolve_advect(xi.coeffs(), u.coeffs()));
    assert!(max_diff(&got, &want) < 1e-10);
}

#[test]
fn lie_derivative_vanishes_on_zero() {
    let mut ops = SpectralOps::new(3);
    let xi = random_field(3, 1.0, 1.0, 2).unwrap();
    let zero = SpectralField::zeros(3);
    // Packed transforms leak rounding noise between paired fields.
    assert!(ops.lie_derivative(&zero, &xi).unwrap().max_abs() < 1e-14);
    assert!(ops.lie_derivative(&xi, &zero).unwrap().max_abs() < 1e-14);
}

#[test]
fn lie_derivative_rejects_mismatched_truncation() {
    let mut ops = SpectralOps::new(3);
    let a = random_field(3, 1.0, 1.0, 2).unwrap();
    let b = random_field(2, 1.0, 1.0, 2).unwrap();
    assert!(ops.lie_derivative(&a, &b).is_err());
}

#[test]
fn advection_is_skew() {
    let mut ops = SpectralOps::new(5);
    let xi = random_field(5, DEFAULT_SLOPE, 1.0, 8).unwrap();
    let u = biot_savart(&random_field(5, DEFAULT_SLOPE, 1.0, 9).unwrap());
    let b = ops.trilinear_b(u.coeffs(), xi.coeffs(), xi.coeffs()).unwrap();
    assert!(b.abs() < 1e-12 * xi.norm_h().powi(2) * u.sobolev_norm(1.0));
}

#[test]
fn transport_apply_matches_convolution() {
    let lattice = Lattice::new(2).unwrap();
    let xi = random_field(2, 1.0, 1.0, 21).unwrap();
    for mode in lattice.modes() {
        for alpha in 1..=2 {
            let action = lattice.sigma_action(mode.k, alpha).unwrap();
            let mut sigma = SpectralCoeffs::zeros(2);
            let a = action.amplitude.map(|x| Complex64::new(x, 0.0));
            sigma.set(mode.k, a);
            let mut want = convolve_advect(&sigma, xi.coeffs());
            project_in_place(&mut want);
            let got = transport_apply(&action, xi.coeffs());
            assert!(max_diff(&got, &want) < 1e-10, "k={:?}", mode.k);
        }
    }
}

#[test]
fn single_mode_transport_support() {
    let lattice = Lattice::new(3).unwrap();
    let xi = single_mode(3, [0, 1, 0], 1, Complex64::new(1.0, 0.0)).unwrap();
    let action = lattice.sigma_action([1, 0, 1], 2).unwrap();
    let out = transport_apply(&action, xi.coeffs());
    let support: Vec<[i32; 3]> = out
        .iter_modes()
        .filter(|(_, v)| v.iter().any(|z| z.norm() > 0.0))
        .map(|(k, _)| k)
        .collect();
    assert!(support.iter().all(|k| *k == [1, 1, 1] || *k == [1, -1, 1]), "{support:?}");
}

#[test]
fn pseudo_spectral_transport_matches_convolution() {
    let mut ops = SpectralOps::new(2);
    let v = noise_velocity(2, 1, 4);
    for seed in 0..3 {
        let xi = random_field(2, 1.0, 1.0, 40 + seed).unwrap();
        let got = ops.transport(&v, xi.coeffs()).unwrap();
        let mut want = convolve_advect(v.coeffs(), xi.coeffs());
        project_in_place(&mut want);
        assert!(max_diff(&got, &want) < 1e-10);
    }
}

#[test]
fn transport_is_sum_of_single_modes() {
    // Coefficients of v on each sigma_{k,alpha}: v_k . a_{k,alpha}.
    let lattice = Lattice::new(2).unwrap();
    let v = noise_velocity(2, 1, 5);
    let xi = random_field(2, 1.0, 1.0, 6).unwrap();
    let mut want = SpectralCoeffs::zeros(2);
    for mode in lattice.modes() {
        let c = v.coeffs().get(mode.k);
        for alpha in 1..=2 {
            let action = lattice.sigma_action(mode.k, alpha).unwrap();
            let w = c[0] * action.amplitude[0] + c[1] * action.amplitude[1] + c[2] * action.amplitude[2];
            if w.norm() == 0.0 {
                continue;
            }
            let t = transport_apply(&action, xi.coeffs());
            for (o, x) in want.as_mut_slice().iter_mut().zip(t.as_slice()) {
                for d in 0..3 {
                    o[d] += w * x[d];
                }
            }
        }
    }
    let mut ops = SpectralOps::new(2);
    let got = ops.transport(&v, xi.coeffs()).unwrap();
    assert!(max_diff(&got, &want) < 1e-10);
}

#[test]
fn transport_is_enstrophy_neutral() {
    let mut ops = SpectralOps::new(6);
    let v = noise_velocity(6, 2, 9);
    for seed in 0..5 {
        let xi = random_field(6, DEFAULT_SLOPE, 1.0, seed).unwrap();
        let t = ops.transport(&v, xi.coeffs()).unwrap();
        let budget = t.inner(xi.coeffs()).re;
        assert!(budget.abs() <= 1e-11 * xi.norm_h().powi(2) * v.norm_h());
    }
}

#[test]
fn cached_transport_matches_direct() {
    let mut ops = SpectralOps::new(4);
    let v = noise_velocity(4, 1, 2);
    let xi = random_field(4, 1.0, 1.0, 3).unwrap();
    let u = biot_savart(&xi);
    let direct = ops.transport(&v, xi.coeffs()).unwrap();
    let lie = ops.lie_derivative(&u, &xi).unwrap();
    let (lie2, cached) = ops.lie_and_cached_transport(&u, &xi).unwrap();
    assert!(max_diff(&direct, &cached) < 1e-13);
    assert!(max_diff(&lie, &lie2) < 1e-13);
    assert!(ops.cached_transport_sup().unwrap() > 0.0);
    assert!(SpectralOps::new(2).cached_transport(&xi.coeffs().retruncate(2)).is_err());
}

#[test]
fn trilinear_identities() {
    let mut ops = SpectralOps::new(4);
    let u = biot_savart(&random_field(4, 1.0, 1.0, 1).unwrap());
    let v = random_field(4, 1.0, 1.0, 2).unwrap();
    let w = random_field(4, 1.0, 1.0, 3).unwrap();
    let scale = u.sobolev_norm(1.0) * v.sobolev_norm(1.0) * w.sobolev_norm(1.0);
    let bvw = ops.trilinear_b(u.coeffs(), v.coeffs(), w.coeffs()).unwrap();
    let bwv = ops.trilinear_b(u.coeffs(), w.coeffs(), v.coeffs()).unwrap();
    assert!((bvw + bwv).abs() <= 1e-12 * scale);
    assert!(ops.trilinear_b(u.coeffs(), v.coeffs(), v.coeffs()).unwrap().abs() <= 1e-12 * scale);
    let zero = SpectralCoeffs::zeros(4);
    assert!(ops.trilinear_b(&zero, v.coeffs(), w.coeffs()).unwrap().abs() <= 1e-14 * scale);
}

#[test]
fn trilinear_matches_convolution() {
    let mut ops = SpectralOps::new(2);
    let u = biot_savart(&random_field(2, 1.0, 1.0, 5).unwrap());
    let v = random_field(2, 1.0, 1.0, 6).unwrap();
    let w = random_field(2, 1.0, 1.0, 7).unwrap();
    let adv = convolve_advect(u.coeffs(), v.coeffs());
    let want = adv.inner(w.coeffs()).re;
    let got = ops.trilinear_b(u.coeffs(), v.coeffs(), w.coeffs()).unwrap();
    assert!((got - want).abs() < 1e-10);
}

#[test]
fn trilinear_continuity_bound() {
    // |b| <= |u|_inf |grad v|_0 |w|_0 and |u|_inf <= sum |u_k| <= C |u|_1
    // with C^2 = sum (1 + 4 pi^2 |k|^2)^{-1} over the truncated lattice.
    let m = 4;
    let mut ops = SpectralOps::new(m);
    let mut ratios = Vec::new();
    for seed in 0..20 {
        let u = biot_savart(&random_field(m, 1.0, 1.0, seed).unwrap());
        let v = random_field(m, 1.0, 1.0, 100 + seed).unwrap();
        let w = random_field(m, 1.0, 1.0, 200 + seed).unwrap();
        let b = ops.trilinear_b(u.coeffs(), v.coeffs(), w.coeffs()).unwrap();
        ratios.push(b.abs() / (u.sobolev_norm(1.0) * v.sobolev_norm(2.0) * w.sobolev_norm(0.0)));
    }
    let lattice_sum: f64 = Lattice::new(m)
        .unwrap()
        .modes()
        .iter()
        .map(|k| 1.0 / (1.0 + 4.0 * PI * PI * k.norm_sq() as f64))
        .sum::<f64>()
        .sqrt();
    let worst = ratios.iter().cloned().fold(0.0, f64::max);
    assert!(worst <= lattice_sum, "max ratio {worst} vs {lattice_sum}");
    assert!(worst > 0.0);
}

#[test]
fn sobolev_norm_examples() {
    let mut c = SpectralCoeffs::zeros(2);
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    c.set([1, 0, 0], [zero, one, zero]);
    assert!((sobolev_norm(&c, 1.0) - (1.0 + 4.0 * PI * PI).sqrt()).abs() < 1e-14);
    assert!((sobolev_norm(&c, 0.0) - 1.0).abs() < 1e-15);
    let xi = random_field(4, DEFAULT_SLOPE, 2.0, 1).unwrap();
    assert!(xi.sobolev_norm(-0.5) <= xi.norm_h());
}
