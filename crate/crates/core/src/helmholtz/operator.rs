use num_complex::Complex64;

use super::{GridModel2D, Sponge};
use crate::error::{invalid, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<Complex64>,
}

impl CsrMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.row(i)
            .find(|&(c, _)| c == j)
            .map(|(_, v)| v)
            .unwrap_or_default()
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// True when `A^T = A` exactly (not conjugated).
    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }
}

/// `H(m) = omega^2 diag(m (1 - i gamma)) + L` on a specific grid.
#[derive(Debug, Clone)]
pub struct HelmholtzOperator {
    nz: usize,
    nx: usize,
    omega: f64,
    matrix: CsrMatrix,
    /// `1 - i gamma` per cell; `dH/dm_i = omega^2 * damping_i`.
    damping: Vec<Complex64>,
}

impl HelmholtzOperator {
    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn damping(&self) -> &[Complex64] {
        &self.damping
    }
}

/// Assembles the discrete Helmholtz operator. `omega = 0` yields the pure
/// Laplacian; negative or non-finite frequencies are rejected.
pub fn assemble(model: &GridModel2D, omega: f64, sponge: &Sponge) -> Result<HelmholtzOperator> {
    if !(omega >= 0.0) || !omega.is_finite() {
        return invalid(format!("omega must be >= 0 rad/s, got {omega}"));
    }
    let (nz, nx) = (model.nz(), model.nx());
    let n = nz * nx;
    let inv_h2 = 1.0 / (model.h() * model.h());
    let w2 = omega * omega;
    let gamma = sponge.profile(nz, nx);
    let damping: Vec<Complex64> = gamma.iter().map(|&g| Complex64::new(1.0, -g)).collect();

    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(5 * n);
    let mut values = Vec::with_capacity(5 * n);
    row_ptr.push(0);
    let off = Complex64::new(inv_h2, 0.0);
    for ix in 0..nx {
        for iz in 0..nz {
            let i = ix * nz + iz;
            // columns in increasing order: W, N, C, S, E
            if ix > 0 {
                col_idx.push(i - nz);
                values.push(off);
            }
            if iz > 0 {
                col_idx.push(i - 1);
                values.push(off);
            }
            col_idx.push(i);
            values.push(damping[i] * (w2 * model.values()[i]) - 4.0 * inv_h2);
            if iz + 1 < nz {
                col_idx.push(i + 1);
                values.push(off);
            }
            if ix + 1 < nx {
                col_idx.push(i + nz);
                values.push(off);
            }
            row_ptr.push(col_idx.len());
        }
    }
    Ok(HelmholtzOperator {
        nz,
        nx,
        omega,
        matrix: CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        },
        damping,
    })
}
