use nswz_core::dynamics::cutoff_factor;
use nswz_core::experiments::{quantile, wilson_interval};
use nswz_core::init::random_field;
use nswz_core::rough::RoughPathLift;
use nswz_core::spectral::{project_in_place, SpectralCoeffs};
use proptest::prelude::*;

fn raw_field(m: usize, values: &[f64]) -> SpectralCoeffs {
    let mut f = SpectralCoeffs::zeros(m);
    for (v, x) in f.as_mut_slice().iter_mut().zip(values.chunks(6)) {
        for c in 0..3 {
            v[c] = num_complex::Complex64::new(x[2 * c], x[2 * c + 1]);
        }
    }
    f
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_is_idempotent_and_divergence_free(values in prop::collection::vec(-1.0f64..1.0, 6 * 125)) {
        let mut f = raw_field(2, &values);
        project_in_place(&mut f);
        prop_assert!(f.divergence_defect() < 1e-14);
        let mut g = f.clone();
        project_in_place(&mut g);
        prop_assert!(g.sub(&f).max_abs() < 1e-15);
    }

    #[test]
    fn random_fields_have_requested_norm(seed in any::<u64>(), norm in 0.1f64..10.0) {
        let xi = random_field(3, 11.0 / 6.0, norm, seed).unwrap();
        prop_assert!((xi.norm_h() - norm).abs() < 1e-12 * norm);
        prop_assert!(xi.coeffs().divergence_defect() < 1e-12 * norm);
    }

    #[test]
    fn chen_holds_on_random_paths(
        steps in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 16),
        a in 0usize..8, u in 0usize..8, b in 0usize..8,
    ) {
        let mut nodes = vec![vec![0.0; 3]];
        for s in &steps {
            let last = nodes.last().unwrap();
            nodes.push(last.iter().zip(s).map(|(x, d)| x + d).collect());
        }
        let times: Vec<f64> = (0..=16).map(|i| i as f64 / 16.0).collect();
        let grid: Vec<f64> = (0..=8).map(|i| i as f64 / 8.0).collect();
        let lift = RoughPathLift::from_nodes(&times, &nodes, &grid, 0.4).unwrap();
        let mut p = [a, u, b];
        p.sort();
        prop_assert!(lift.chen_defect(p[0], p[1], p[2]) < 1e-12);
        prop_assert!(lift.symmetric_defect(p[0], p[2]) < 1e-12);
    }

    #[test]
    fn cutoff_is_monotone(r in 0.0f64..10.0, x in 0.0f64..12.0, dx in 0.0f64..2.0) {
        let (f0, f1) = (cutoff_factor(x, r), cutoff_factor(x + dx, r));
        prop_assert!((0.0..=1.0).contains(&f0));
        prop_assert!(f1 <= f0);
    }

    #[test]
    fn wilson_interval_contains_estimate(total in 1usize..500, frac in 0.0f64..=1.0) {
        let hits = (frac * total as f64).round() as usize;
        let (lo, hi) = wilson_interval(hits, total);
        let p = hits as f64 / total as f64;
        prop_assert!(lo <= p + 1e-12 && p <= hi + 1e-12);
        prop_assert!(0.0 <= lo && hi <= 1.0);
    }

    #[test]
    fn quantiles_are_ordered(values in prop::collection::vec(-1e3f64..1e3, 1..50), q in 0.0f64..1.0) {
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let x = quantile(&values, q);
        prop_assert!(lo <= x && x <= hi);
        prop_assert!(quantile(&values, q * 0.5) <= x);
    }
}
