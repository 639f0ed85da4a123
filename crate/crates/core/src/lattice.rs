//! Truncated lattice of Fourier modes, the divergence-free frames attached to
//! each mode and the noise coefficients supported on a dyadic shell.
//!
//! The truncated lattice holds every nonzero `k` with `max |k_i| <= M`. Modes
//! are stored in lexicographic order, which coincides with the row-major
//! order of the cube `[-M, M]^3` with the origin removed.

use crate::error::{Error, Result};
use crate::vec3::{cross, dot, norm, scale};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SignClass {
    Plus,
    Minus,
}

/// A nonzero lattice vector with its sign class and orthonormal frame of `k^perp`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeMode {
    pub k: [i32; 3],
    pub sign: SignClass,
    /// `[a_{k,1}, a_{k,2}]`, shared between `k` and `-k`.
    pub frame: [[f64; 3]; 2],
}

impl LatticeMode {
    pub fn norm(&self) -> f64 {
        norm2_int(self.k).sqrt()
    }

    pub fn norm_sq(&self) -> i64 {
        let [a, b, c] = self.k;
        (a as i64).pow(2) + (b as i64).pow(2) + (c as i64).pow(2)
    }
}

/// Lexicographically positive: the first nonzero component is positive.
pub fn sign_class(k: [i32; 3]) -> SignClass {
    let first = k.iter().copied().find(|&c| c != 0).unwrap_or(0);
    if first > 0 {
        SignClass::Plus
    } else {
        SignClass::Minus
    }
}

fn norm2_int(k: [i32; 3]) -> f64 {
    k.iter().map(|&c| (c as f64) * (c as f64)).sum()
}

/// Right-handed orthonormal frame `(a1, a2, k/|k|)` for a plus-class vector.
///
/// `a1` normalises `e_i x k` for the first of `e1, e3, e2` that is not
/// parallel to `k`, and `a2 = k/|k| x a1`.
pub fn frame_for(k: [i32; 3]) -> [[f64; 3]; 2] {
    let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
    let khat = scale(&kf, 1.0 / norm(&kf));
    let axes = [0usize, 2, 1];
    for &i in &axes {
        let mut e = [0.0; 3];
        e[i] = 1.0;
        let c = cross(&e, &kf);
        let n = norm(&c);
        if n > 0.0 {
            let a1 = scale(&c, 1.0 / n);
            let a2 = cross(&khat, &a1);
            return [a1, a2];
        }
    }
    unreachable!("k is nonzero so some axis is not parallel to it")
}

/// The truncated lattice `{k != 0 : |k|_inf <= M}`.
#[derive(Clone, Debug)]
pub struct Lattice {
    m: usize,
    modes: Vec<LatticeMode>,
}

impl Lattice {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidTruncation(m));
        }
        let mi = m as i32;
        let mut modes = Vec::with_capacity((2 * m + 1).pow(3) - 1);
        for a in -mi..=mi {
            for b in -mi..=mi {
                for c in -mi..=mi {
                    let k = [a, b, c];
                    if k == [0, 0, 0] {
                        continue;
                    }
                    let sign = sign_class(k);
                    let base = match sign {
                        SignClass::Plus => k,
                        SignClass::Minus => [-a, -b, -c],
                    };
                    modes.push(LatticeMode {
                        k,
                        sign,
                        frame: frame_for(base),
                    });
                }
            }
        }
        Ok(Self { m, modes })
    }

    pub fn truncation(&self) -> usize {
        self.m
    }

    pub fn modes(&self) -> &[LatticeMode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn contains(&self, k: [i32; 3]) -> bool {
        let m = self.m as i32;
        k != [0, 0, 0] && k.iter().all(|&c| c.abs() <= m)
    }

    /// Position of `k` in the enumeration, if enumerated.
    pub fn index_of(&self, k: [i32; 3]) -> Option<usize> {
        if !self.contains(k) {
            return None;
        }
        let side = 2 * self.m + 1;
        let m = self.m as i32;
        let cube = ((k[0] + m) as usize * side + (k[1] + m) as usize) * side + (k[2] + m) as usize;
        let origin = (side * side * side) / 2;
        Some(if cube > origin { cube - 1 } else { cube })
    }

    pub fn mode(&self, k: [i32; 3]) -> Result<&LatticeMode> {
        self.index_of(k)
            .map(|i| &self.modes[i])
            .ok_or(Error::UnknownMode(k))
    }

    /// Data for multiplication by `sigma_{k,alpha}`.
    pub fn sigma_action(&self, k: [i32; 3], alpha: usize) -> Result<SigmaAction> {
        if !(1..=2).contains(&alpha) {
            return Err(Error::InvalidParameter(format!(
                "frame index alpha must be 1 or 2, got {alpha}"
            )));
        }
        let mode = self.mode(k)?;
        Ok(SigmaAction {
            shift: k,
            amplitude: mode.frame[alpha - 1],
        })
    }
}

/// Multiplying a field by `sigma_{k,alpha} = a_{k,alpha} e^{2 pi i k.x}` shifts
/// the Fourier index `l -> l + shift` and scales by `amplitude`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmaAction {
    pub shift: [i32; 3],
    pub amplitude: [f64; 3],
}

impl SigmaAction {
    pub fn divergence(&self) -> f64 {
        let k = [self.shift[0] as f64, self.shift[1] as f64, self.shift[2] as f64];
        dot(&k, &self.amplitude)
    }
}

/// `theta_k = |k|^{-gamma}` on the shell `N <= |k| <= 2N`, zero elsewhere.
#[derive(Clone, Debug)]
pub struct NoiseCoefficients {
    shell: usize,
    gamma: f64,
    /// Indexed like `Lattice::modes`.
    values: Vec<f64>,
    support: Vec<usize>,
    l2_norm: f64,
}

impl NoiseCoefficients {
    pub fn new(shell: usize, gamma: f64, lattice: &Lattice) -> Result<Self> {
        if shell == 0 {
            return Err(Error::InvalidParameter("shell index N must be >= 1".into()));
        }
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "decay exponent gamma must be positive, got {gamma}"
            )));
        }
        if lattice.truncation() < 2 * shell {
            return Err(Error::ShellTruncated {
                n: shell,
                m: lattice.truncation(),
            });
        }
        let lo = (shell * shell) as i64;
        let hi = (4 * shell * shell) as i64;
        let mut values = vec![0.0; lattice.len()];
        let mut support = Vec::new();
        for (i, mode) in lattice.modes().iter().enumerate() {
            let n2 = mode.norm_sq();
            if (lo..=hi).contains(&n2) {
                values[i] = (n2 as f64).powf(-gamma / 2.0);
                support.push(i);
            }
        }
        let l2_norm = support.iter().map(|&i| values[i] * values[i]).sum::<f64>().sqrt();
        Ok(Self {
            shell,
            gamma,
            values,
            support,
            l2_norm,
        })
    }

    /// Coefficients identically zero on `lattice`; turns the noise off.
    pub fn zero(lattice: &Lattice) -> Self {
        Self {
            shell: 0,
            gamma: 0.0,
            values: vec![0.0; lattice.len()],
            support: Vec::new(),
            l2_norm: 0.0,
        }
    }

    pub fn shell(&self) -> usize {
        self.shell
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn value(&self, index: usize) -> f64 {
        self.values[index]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Lattice indices with nonzero coefficient, in enumeration order.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm
    }

    pub fn is_zero(&self) -> bool {
        self.support.is_empty()
    }
}
