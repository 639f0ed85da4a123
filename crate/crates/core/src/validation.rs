//! Quick invariant suite run by `nswz validate`.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::{simulate, Driver, Mode, NoiseModel, SolverConfig};
use crate::error::Result;
use crate::init::{random_field, single_mode, DEFAULT_SLOPE};
use crate::lattice::{sign_class, Lattice, SignClass};
use crate::noise::{BrownianEnsemble, ComplexPaths, PiecewiseLinearPaths, RealIndex};
use crate::rough::RoughPathLift;
use crate::spectral::{biot_savart, curl, transport_apply, SpectralField, SpectralOps, Transformer};
use crate::vec3::{cross, dot};

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub seconds: f64,
}

fn check(name: &str, tolerance: f64, f: impl FnOnce() -> Result<f64>) -> Result<Check> {
    let start = Instant::now();
    let value = f()?;
    Ok(Check {
        name: name.into(),
        value,
        tolerance,
        passed: value <= tolerance,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Transport field of random slopes on the full noise support.
pub fn random_noise_velocity(model: &NoiseModel, seed: u64) -> Result<SpectralField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slopes: Vec<_> = model
        .real_indices()
        .into_iter()
        .map(|ix| (ix, rng.random_range(-1.0..1.0)))
        .collect();
    model.velocity(|ix| slopes.iter().find(|(j, _)| *j == ix).map(|p| p.1))
}

fn neutrality() -> Result<f64> {
    let model = NoiseModel::new(8, 2, 1.0, 10.0)?;
    let mut ops = SpectralOps::new(8);
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let v = random_noise_velocity(&model, seed)?;
        let xi = random_field(8, DEFAULT_SLOPE, 1.0, 100 + seed)?;
        let b = ops.transport(&v, xi.coeffs())?.inner(xi.coeffs()).re;
        worst = worst.max(b.abs() / (xi.norm_h().powi(2) * v.norm_h()));
    }
    Ok(worst)
}

fn frames() -> Result<f64> {
    let lattice = Lattice::new(4)?;
    let mut worst: f64 = 0.0;
    for mode in lattice.modes() {
        let [a1, a2] = mode.frame;
        let norm = mode.norm();
        let khat = mode.k.map(|c| c as f64 / norm);
        for (x, y, want) in [(a1, a1, 1.0), (a2, a2, 1.0), (a1, a2, 0.0), (a1, khat, 0.0), (a2, khat, 0.0)] {
            worst = worst.max((dot(&x, &y) - want).abs());
        }
        if mode.sign == SignClass::Plus {
            let c = cross(&a1, &a2);
            worst = worst.max((0..3).map(|i| (c[i] - khat[i]).abs()).fold(0.0, f64::max));
        }
    }
    Ok(worst)
}

fn reality() -> Result<f64> {
    let xi = random_field(4, 1.0, 1.0, 5)?;
    let mut tr = Transformer::new(4);
    let scale = xi.coeffs().max_abs();
    let mut worst: f64 = 0.0;
    for c in 0..3 {
        let comp: Vec<Complex64> = xi.coeffs().as_slice().iter().map(|v| v[c]).collect();
        let grid = tr.to_physical_complex(&comp);
        worst = worst.max(grid.iter().map(|z| z.im.abs()).fold(0.0, f64::max));
    }
    Ok(worst / scale)
}

fn covariation() -> Result<f64> {
    // Largest |mean - expected| / standard error over the pair statistics.
    let samples = 2000;
    let horizon = 0.5;
    let k = [1, 2, 0];
    let modes = [k, [-1, -2, 0]];
    let ix = RealIndex::new(k, 1);
    let stats: Vec<[Complex64; 2]> = (0..samples)
        .map(|s| {
            let e = BrownianEnsemble::sample(&modes, horizon, 6, s as u64)?;
            let w = ComplexPaths::from_real(&e)?;
            let a = w.path(ix).unwrap();
            let b = w.path(ix.negated()).unwrap();
            let (mut ab, mut aa) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
            for i in 1..a.len() {
                let (da, db) = (a[i] - a[i - 1], b[i] - b[i - 1]);
                ab += da * db;
                aa += da * da;
            }
            Ok([ab, aa])
        })
        .collect::<Result<_>>()?;
    let z = |vals: Vec<f64>, want: f64| {
        let n = vals.len() as f64;
        let m = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m - want).abs() / (var / n).sqrt()
    };
    Ok([
        z(stats.iter().map(|s| s[0].re).collect(), 2.0 * horizon),
        z(stats.iter().map(|s| s[0].im).collect(), 0.0),
        z(stats.iter().map(|s| s[1].re).collect(), 0.0),
        z(stats.iter().map(|s| s[1].im).collect(), 0.0),
    ]
    .into_iter()
    .fold(0.0, f64::max))
}

fn chen() -> Result<f64> {
    let modes: Vec<[i32; 3]> = vec![[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 0]];
    let e = BrownianEnsemble::sample(&modes, 1.0, 9, 3)?;
    let p = PiecewiseLinearPaths::from_ensemble(&e, 64)?;
    let grid: Vec<f64> = (0..=512).map(|i| i as f64 / 512.0).collect();
    let lift = RoughPathLift::canonical(&p, &grid, 0.4)?;
    let mut worst: f64 = 0.0;
    for (a, u, b) in [(0, 100, 512), (3, 7, 11), (64, 65, 400), (0, 256, 512)] {
        worst = worst.max(lift.chen_defect(a, u, b));
        worst = worst.max(lift.symmetric_defect(a, b));
    }
    Ok(worst)
}

fn biot_savart_round_trip() -> Result<f64> {
    let xi = random_field(6, 1.0, 1.0, 8)?;
    Ok(curl(biot_savart(&xi).coeffs()).sub(xi.coeffs()).max_abs())
}

fn transport_consistency() -> Result<f64> {
    // Pseudo-spectral transport by one sigma against the exact convolution.
    let lattice = Lattice::new(4)?;
    let xi = random_field(4, 1.0, 1.0, 2)?;
    let k = match sign_class([1, -1, 0]) {
        SignClass::Plus => [1, -1, 0],
        SignClass::Minus => [-1, 1, 0],
    };
    let nk = [-k[0], -k[1], -k[2]];
    let model = NoiseModel::new(4, 1, 1.0, 1.0)?;
    let scale = model.amplitude() * model.theta().value(lattice.index_of(k).unwrap());
    // Unit slope on (k, 1) gives v = scale * (sigma_{k,1} + sigma_{-k,1}).
    let v = model.velocity(|ix| Some(if ix == RealIndex::new(k, 1) { 1.0 } else { 0.0 }))?;
    let mut ops = SpectralOps::new(4);
    let fft = ops.transport(&v, xi.coeffs())?;
    let mut both = transport_apply(&lattice.sigma_action(k, 1)?, xi.coeffs());
    let conj = transport_apply(&lattice.sigma_action(nk, 1)?, xi.coeffs());
    both.axpy(1.0, &conj);
    let expected = both.scaled(scale);
    Ok(fft.sub(&expected).max_abs() / expected.max_abs().max(f64::MIN_POSITIVE))
}

fn heat_decay() -> Result<f64> {
    let cfg = SolverConfig {
        m: 4,
        nonlinear: false,
        noise: false,
        cfl: None,
        dt: 0.25 / 64.0,
        saves: 8,
        ..Default::default()
    };
    let xi0 = single_mode(4, [1, 2, 0], 1, Complex64::new(0.7, 0.2))?;
    let traj = simulate(&cfg, Mode::Deterministic, Driver::None, &xi0)?;
    let lambda = 4.0 * PI * PI * 5.0;
    Ok(traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(t, s)| s.coeffs().sub(&xi0.coeffs().scaled((-lambda * t).exp())).max_abs())
        .fold(0.0, f64::max)
        / xi0.coeffs().max_abs())
}

fn replay() -> Result<f64> {
    let cfg = SolverConfig {
        m: 4,
        shell: 1,
        n: 8,
        dt: 0.25 / 64.0,
        saves: 8,
        ..Default::default()
    };
    let run = || -> Result<Vec<f64>> {
        let model = NoiseModel::from_config(&cfg)?;
        let e = BrownianEnsemble::sample(&model.support_vectors(), cfg.horizon, 3, 11)?;
        let p = PiecewiseLinearPaths::from_ensemble(&e, 8)?;
        let xi0 = random_field(4, DEFAULT_SLOPE, 1.0, 4)?;
        let t = simulate(&cfg, Mode::WongZakai, Driver::PiecewiseLinear(&p), &xi0)?;
        Ok(t.steps.iter().map(|s| s.enstrophy).collect())
    };
    let (a, b) = (run()?, run()?);
    let same = a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits());
    Ok(if same { 0.0 } else { 1.0 })
}

/// Runs every check; an error inside a check is reported as a failure.
pub fn run_suite() -> Vec<Check> {
    type Job = (&'static str, f64, fn() -> Result<f64>);
    let jobs: [Job; 9] = [
        ("enstrophy_neutrality", 1e-11, neutrality),
        ("frame_orthonormality", 1e-12, frames),
        ("reality_round_trip", 1e-12, reality),
        ("covariation_z_score", 5.0, covariation),
        ("chen_relation", 1e-10, chen),
        ("biot_savart_round_trip", 1e-12, biot_savart_round_trip),
        ("transport_vs_convolution", 1e-10, transport_consistency),
        ("heat_decay", 1e-8, heat_decay),
        ("replay_bit_identical", 0.0, replay),
    ];
    jobs.into_iter()
        .map(|(name, tol, f)| {
            check(name, tol, f).unwrap_or_else(|e| Check {
                name: format!("{name}: {e}"),
                value: f64::NAN,
                tolerance: tol,
                passed: false,
                seconds: 0.0,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    #[test]
    fn suite_passes() {
        for c in super::run_suite() {
            assert!(c.passed, "{c:?}");
        }
    }
}
