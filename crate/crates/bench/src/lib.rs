//! Fixtures shared by the benchmarks.

use nswz_core::dynamics::{NoiseModel, SolverConfig};
use nswz_core::init::{random_field, DEFAULT_SLOPE};
use nswz_core::noise::{BrownianEnsemble, PiecewiseLinearPaths};
use nswz_core::spectral::SpectralField;

pub struct Fixture {
    pub cfg: SolverConfig,
    pub xi: SpectralField,
    pub paths: PiecewiseLinearPaths,
    pub ensemble: BrownianEnsemble,
}

/// Desk-scale configuration at truncation `m` with one noise sample.
pub fn fixture(m: usize) -> Fixture {
    let cfg = SolverConfig {
        m,
        shell: (m / 4).max(1),
        ..Default::default()
    };
    let model = NoiseModel::from_config(&cfg).expect("valid configuration");
    let ensemble = BrownianEnsemble::sample(&model.support_vectors(), cfg.horizon, 8, 1).expect("ensemble");
    let paths = PiecewiseLinearPaths::from_ensemble(&ensemble, cfg.n).expect("paths");
    let xi = random_field(m, DEFAULT_SLOPE, 1.0, 2).expect("field");
    Fixture { cfg, xi, paths, ensemble }
}
