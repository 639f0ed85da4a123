//! Versioned binary format for spectral fields.
//!
//! Layout: magic `NSWZFLD1`, version (u32), `M` (u32), mode count (u32), then
//! for every nonzero mode in lexicographic order the three components as
//! little-endian `(re, im)` f64 pairs.

use std::io::{Read, Write};

use num_complex::Complex64;

use super::field::{SpectralCoeffs, SpectralField};
use crate::error::{Error, Result};
use crate::noise::{read_f64, read_u32, read_u64};

const MAGIC: &[u8; 8] = b"NSWZFLD1";
const VERSION: u32 = 1;

pub fn write_field<W: Write>(field: &SpectralField, mut w: W) -> Result<()> {
    let c = field.coeffs();
    let side = c.side();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(c.truncation() as u32).to_le_bytes())?;
    w.write_all(&((side * side * side - 1) as u32).to_le_bytes())?;
    for (_, v) in c.iter_modes() {
        for z in v {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads and validates a field written by [`write_field`].
pub fn read_field<R: Read>(mut r: R) -> Result<SpectralField> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a spectral field file".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported field version {version}")));
    }
    let m = read_u32(&mut r)? as usize;
    if m == 0 || m > 512 {
        return Err(Error::Format(format!("truncation {m} out of range")));
    }
    let count = read_u32(&mut r)? as usize;
    let side = 2 * m + 1;
    if count != side * side * side - 1 {
        return Err(Error::Format(format!("mode count {count} does not match M = {m}")));
    }
    let mut c = SpectralCoeffs::zeros(m);
    let origin = c.origin_slot();
    for s in 0..c.as_slice().len() {
        if s == origin {
            continue;
        }
        let mut v = [Complex64::new(0.0, 0.0); 3];
        for z in &mut v {
            *z = Complex64::new(read_f64(&mut r)?, read_f64(&mut r)?);
        }
        c.as_mut_slice()[s] = v;
    }
    SpectralField::from_coeffs(c)
}

const STATE_MAGIC: &[u8; 8] = b"NSWZSTA1";
const STATE_VERSION: u32 = 1;

/// Run identification stored in front of a saved state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateTag {
    pub config_hash: String,
    pub seed: u64,
    pub time: f64,
}

/// Saved state: magic `NSWZSTA1`, version (u32), hash length (u32) and bytes,
/// seed (u64), time (f64), then the field in the [`write_field`] layout.
pub fn write_state<W: Write>(field: &SpectralField, tag: &StateTag, mut w: W) -> Result<()> {
    w.write_all(STATE_MAGIC)?;
    w.write_all(&STATE_VERSION.to_le_bytes())?;
    w.write_all(&(tag.config_hash.len() as u32).to_le_bytes())?;
    w.write_all(tag.config_hash.as_bytes())?;
    w.write_all(&tag.seed.to_le_bytes())?;
    w.write_all(&tag.time.to_le_bytes())?;
    write_field(field, w)
}

pub fn read_state<R: Read>(mut r: R) -> Result<(StateTag, SpectralField)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != STATE_MAGIC {
        return Err(Error::Format("not a state file".into()));
    }
    let version = read_u32(&mut r)?;
    if version != STATE_VERSION {
        return Err(Error::Format(format!("unsupported state version {version}")));
    }
    let len = read_u32(&mut r)? as usize;
    if len > 256 {
        return Err(Error::Format(format!("config hash length {len} out of range")));
    }
    let mut hash = vec![0u8; len];
    r.read_exact(&mut hash)?;
    let config_hash = String::from_utf8(hash).map_err(|_| Error::Format("config hash is not UTF-8".into()))?;
    let seed = read_u64(&mut r)?;
    let time = read_f64(&mut r)?;
    let field = read_field(r)?;
    Ok((StateTag { config_hash, seed, time }, field))
}
