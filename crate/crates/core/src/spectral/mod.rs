//! Spectral calculus for real divergence-free fields on the unit torus.

mod field;
mod io;
mod ops;
mod transform;

pub use field::{bessel_weight, sobolev_norm, SpectralCoeffs, SpectralField, FIELD_TOLERANCE};
pub use io::{read_field, read_state, write_field, write_state, StateTag};
pub use ops::{biot_savart, curl, leray_project, project_in_place, transport_apply, SpectralOps};
pub use transform::{default_grid_size, Transformer};
