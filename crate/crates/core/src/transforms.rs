//! Linear maps `m = C y` between optimization coefficients and model cells.
//!
//! The Haar transform is orthonormal and multi-level. Coefficients share the
//! grid layout (z fastest); after each level the approximation block lives in
//! the leading `nz / 2^l x nx / 2^l` corner, so with full depth the coarsest
//! scaling coefficient is entry 0.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TransformKind {
    Identity,
    HaarWavelet2d { levels: usize, nz: usize, nx: usize },
}

impl TransformKind {
    pub fn haar(levels: usize, nz: usize, nx: usize) -> Result<Self> {
        let kind = TransformKind::HaarWavelet2d { levels, nz, nx };
        kind.validate()?;
        Ok(kind)
    }

    pub fn validate(&self) -> Result<()> {
        if let TransformKind::HaarWavelet2d { levels, nz, nx } = *self {
            if levels == 0 {
                return invalid("haar transform needs at least one level");
            }
            if levels >= usize::BITS as usize {
                return invalid(format!("haar level count {levels} is too large"));
            }
            let block = 1usize << levels;
            if nz == 0 || nx == 0 || nz % block != 0 || nx % block != 0 {
                return invalid(format!(
                    "grid {nz}x{nx} is not divisible by 2^{levels} = {block}"
                ));
            }
        }
        Ok(())
    }

    fn check_len(&self, n: usize) -> Result<()> {
        self.validate()?;
        if let TransformKind::HaarWavelet2d { nz, nx, .. } = *self {
            if n != nz * nx {
                return invalid(format!("vector of length {n} does not match grid {nz}x{nx}"));
            }
        }
        Ok(())
    }
}

/// Coefficients to model: `C y`.
pub fn apply(kind: &TransformKind, y: &[f64]) -> Result<Vec<f64>> {
    kind.check_len(y.len())?;
    match *kind {
        TransformKind::Identity => Ok(y.to_vec()),
        TransformKind::HaarWavelet2d { levels, nz, nx } => {
            let mut out = y.to_vec();
            haar_synthesis(&mut out, nz, nx, levels);
            Ok(out)
        }
    }
}

/// Model to coefficients: `C^T m`.
pub fn adjoint(kind: &TransformKind, m: &[f64]) -> Result<Vec<f64>> {
    kind.check_len(m.len())?;
    match *kind {
        TransformKind::Identity => Ok(m.to_vec()),
        TransformKind::HaarWavelet2d { levels, nz, nx } => {
            let mut out = m.to_vec();
            haar_analysis(&mut out, nz, nx, levels);
            Ok(out)
        }
    }
}

fn haar_forward_1d(line: &mut [f64], tmp: &mut [f64]) {
    let half = line.len() / 2;
    for i in 0..half {
        let (a, b) = (line[2 * i], line[2 * i + 1]);
        tmp[i] = (a + b) * FRAC_1_SQRT_2;
        tmp[half + i] = (a - b) * FRAC_1_SQRT_2;
    }
    line.copy_from_slice(&tmp[..line.len()]);
}

fn haar_inverse_1d(line: &mut [f64], tmp: &mut [f64]) {
    let half = line.len() / 2;
    for i in 0..half {
        let (s, d) = (line[i], line[half + i]);
        tmp[2 * i] = (s + d) * FRAC_1_SQRT_2;
        tmp[2 * i + 1] = (s - d) * FRAC_1_SQRT_2;
    }
    line.copy_from_slice(&tmp[..line.len()]);
}

fn haar_analysis(data: &mut [f64], nz: usize, nx: usize, levels: usize) {
    let mut tmp = vec![0.0; nz.max(nx)];
    let mut line = vec![0.0; nx];
    let (mut a, mut b) = (nz, nx);
    for _ in 0..levels {
        for ix in 0..b {
            haar_forward_1d(&mut data[ix * nz..ix * nz + a], &mut tmp);
        }
        for iz in 0..a {
            for ix in 0..b {
                line[ix] = data[ix * nz + iz];
            }
            haar_forward_1d(&mut line[..b], &mut tmp);
            for ix in 0..b {
                data[ix * nz + iz] = line[ix];
            }
        }
        a /= 2;
        b /= 2;
    }
}

fn haar_synthesis(data: &mut [f64], nz: usize, nx: usize, levels: usize) {
    let mut tmp = vec![0.0; nz.max(nx)];
    let mut line = vec![0.0; nx];
    for level in (0..levels).rev() {
        let (a, b) = (nz >> level, nx >> level);
        for iz in 0..a {
            for ix in 0..b {
                line[ix] = data[ix * nz + iz];
            }
            haar_inverse_1d(&mut line[..b], &mut tmp);
            for ix in 0..b {
                data[ix * nz + iz] = line[ix];
            }
        }
        for ix in 0..b {
            haar_inverse_1d(&mut data[ix * nz..ix * nz + a], &mut tmp);
        }
    }
}
