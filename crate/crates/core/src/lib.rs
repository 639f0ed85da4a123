#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod init;
pub mod lattice;
pub mod noise;
pub mod rough;
pub mod spectral;
pub mod validation;
pub mod vec3;

pub use error::{Error, Result};
