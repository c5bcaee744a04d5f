//! Forward modeling, data prediction and adjoint-state misfit gradients.

use std::sync::atomic::{AtomicUsize, Ordering};

use num_complex::Complex64;
use rayon::prelude::*;

use super::banded::{BandedLu, LuFailure};
use super::operator::{assemble, CsrMatrix, HelmholtzOperator};
use super::{AcquisitionGeometry, FrequencyData, GridModel2D};
use crate::error::{invalid, Error, Result};
use crate::penalties::{PenaltyKind, ResidualMatrix};

/// Relative residual every solve must reach.
pub const SOLVE_TOLERANCE: f64 = 1e-10;

/// Complex wavefield on the grid (z fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Wavefield {
    pub u: Vec<Complex64>,
}

/// LU factors of `H(m, omega)`, reusable for any number of forward and
/// adjoint solves. Immutable once built; the solve counter is atomic so the
/// operator can be shared across threads.
pub struct FactorizedOperator {
    omega: f64,
    matrix: CsrMatrix,
    damping: Vec<Complex64>,
    lu: BandedLu,
    solves: AtomicUsize,
}

impl std::fmt::Debug for FactorizedOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FactorizedOperator")
            .field("omega", &self.omega)
            .field("n", &self.matrix.dim())
            .field("solves", &self.solve_count())
            .finish()
    }
}

impl FactorizedOperator {
    pub fn new(op: &HelmholtzOperator) -> Result<Self> {
        let matrix = op.matrix().clone();
        let n = matrix.dim();
        // natural ordering with z fastest puts the x-neighbours nz columns away
        let bw = op.nz();
        let lu = BandedLu::factorize(n, bw, bw, |put| {
            for i in 0..n {
                for (j, v) in matrix.row(i) {
                    put(i, j, v);
                }
            }
        })
        .map_err(|f| Error::NumericalFailure {
            omega: op.omega(),
            reason: match f {
                LuFailure::ZeroPivot(k) => format!("zero pivot at row {k}"),
                LuFailure::IllConditioned(r) => format!("pivot ratio {r:.3e} exceeds condition limit"),
            },
        })?;
        Ok(Self {
            omega: op.omega(),
            matrix,
            damping: op.damping().to_vec(),
            lu,
            solves: AtomicUsize::new(0),
        })
    }

    pub fn build(model: &GridModel2D, omega: f64, sponge: &super::Sponge) -> Result<Self> {
        Self::new(&assemble(model, omega, sponge)?)
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// Number of solves (forward plus adjoint) performed with these factors.
    pub fn solve_count(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }

    /// `u = H^{-1} q`.
    pub fn solve(&self, q: &[Complex64]) -> Result<Wavefield> {
        if q.len() != self.dim() {
            return invalid(format!("source vector has length {}, operator {}", q.len(), self.dim()));
        }
        self.solves.fetch_add(1, Ordering::Relaxed);
        let mut u = q.to_vec();
        self.lu.solve_in_place(&mut u);
        self.check_residual(&u, q, false)?;
        Ok(Wavefield { u })
    }

    /// `v = H^{-H} b`. `H` is complex symmetric, so `H^H = conj(H)` and
    /// `v = conj(H^{-1} conj(b))` reuses the forward factors.
    pub fn solve_adjoint(&self, b: &[Complex64]) -> Result<Wavefield> {
        if b.len() != self.dim() {
            return invalid(format!("adjoint source has length {}, operator {}", b.len(), self.dim()));
        }
        self.solves.fetch_add(1, Ordering::Relaxed);
        let mut v: Vec<Complex64> = b.iter().map(|z| z.conj()).collect();
        self.lu.solve_in_place(&mut v);
        for z in v.iter_mut() {
            *z = z.conj();
        }
        self.check_residual(&v, b, true)?;
        Ok(Wavefield { u: v })
    }

    /// `||H u - q|| / ||q||` (or with `H^H` when `adjoint`).
    pub fn relative_residual(&self, u: &[Complex64], q: &[Complex64], adjoint: bool) -> f64 {
        let hu = if adjoint {
            let cu: Vec<Complex64> = u.iter().map(|z| z.conj()).collect();
            self.matrix.matvec(&cu).into_iter().map(|z| z.conj()).collect()
        } else {
            self.matrix.matvec(u)
        };
        let num: f64 = hu.iter().zip(q).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let den: f64 = q.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if den == 0.0 {
            num
        } else {
            num / den
        }
    }

    fn check_residual(&self, u: &[Complex64], q: &[Complex64], adjoint: bool) -> Result<()> {
        let rel = self.relative_residual(u, q, adjoint);
        if rel > SOLVE_TOLERANCE {
            return Err(Error::NumericalFailure {
                omega: self.omega,
                reason: format!("solve residual {rel:.3e} exceeds {SOLVE_TOLERANCE:e}"),
            });
        }
        Ok(())
    }
}

fn source_vector(model: &GridModel2D, geom: &AcquisitionGeometry, s: usize) -> Vec<Complex64> {
    let mut q = vec![Complex64::new(0.0, 0.0); model.len()];
    let h2 = model.h() * model.h();
    q[geom.sources[s].linear(model.nz())] = geom.source_weights[s] / h2;
    q
}

fn check_inputs(model: &GridModel2D, geom: &AcquisitionGeometry) -> Result<()> {
    geom.validate(model.nz(), model.nx())
}

/// `D[omega] = S H(m, omega)^{-1} Q` for every frequency.
pub fn predict_data(model: &GridModel2D, geom: &AcquisitionGeometry) -> Result<FrequencyData> {
    check_inputs(model, geom)?;
    let nz = model.nz();
    let values = geom
        .omegas
        .par_iter()
        .map(|&omega| {
            let fac = FactorizedOperator::build(model, omega, &geom.sponge)?;
            let mut d = Vec::with_capacity(geom.n_recv() * geom.n_src());
            for s in 0..geom.n_src() {
                let u = fac.solve(&source_vector(model, geom, s))?;
                d.extend(geom.receivers.iter().map(|r| u.u[r.linear(nz)]));
            }
            Ok(d)
        })
        .collect::<Result<Vec<_>>>()?;
    FrequencyData::new(geom.n_recv(), geom.n_src(), geom.omegas.clone(), values)
}

/// Misfit summed over frequencies, with optional model gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct MisfitEval {
    /// `sum_k w_k rho(S H_k^{-1} Q - D_k)`
    pub value: f64,
    /// Unweighted least-squares misfit `sum_k ||S H_k^{-1} Q - D_k||_F^2`.
    pub ls_residual: f64,
    pub gradient: Option<Vec<f64>>,
    /// Forward plus adjoint solves actually performed.
    pub pde_solves: usize,
}

struct FrequencyContribution {
    value: f64,
    ls: f64,
    gradient: Option<Vec<f64>>,
    solves: usize,
}

fn frequency_contribution(
    model: &GridModel2D,
    geom: &AcquisitionGeometry,
    data: &FrequencyData,
    kind: &PenaltyKind,
    k: usize,
    with_gradient: bool,
) -> Result<FrequencyContribution> {
    let omega = geom.omegas[k];
    let nz = model.nz();
    let n_recv = geom.n_recv();
    let fac = FactorizedOperator::build(model, omega, &geom.sponge)?;

    let mut fields = Vec::with_capacity(geom.n_src());
    let mut residual = Vec::with_capacity(n_recv * geom.n_src());
    let observed = data.matrix(k);
    for s in 0..geom.n_src() {
        let u = fac.solve(&source_vector(model, geom, s))?;
        for (r, rec) in geom.receivers.iter().enumerate() {
            residual.push(u.u[rec.linear(nz)] - observed[s * n_recv + r]);
        }
        if with_gradient {
            fields.push(u);
        }
    }
    let residual = ResidualMatrix::new(n_recv, geom.n_src(), omega, residual)?;
    let value = crate::penalties::penalty_value(kind, &residual)?;
    let ls = crate::penalties::penalty_value(&PenaltyKind::LeastSquares, &residual)?;

    let gradient = if with_gradient {
        let g_res = crate::penalties::penalty_gradient(kind, &residual)?;
        let mut grad = vec![0.0; model.len()];
        let w2 = omega * omega;
        for (s, u) in fields.iter().enumerate() {
            let mut rhs = vec![Complex64::new(0.0, 0.0); model.len()];
            for (r, rec) in geom.receivers.iter().enumerate() {
                rhs[rec.linear(nz)] += g_res.get(r, s);
            }
            let v = fac.solve_adjoint(&rhs)?;
            for i in 0..model.len() {
                grad[i] -= (w2 * fac.damping[i] * v.u[i].conj() * u.u[i]).re;
            }
        }
        Some(grad)
    } else {
        None
    };
    Ok(FrequencyContribution {
        value,
        ls,
        gradient,
        solves: fac.solve_count(),
    })
}

/// Weighted misfit and (optionally) its gradient with respect to `m`.
///
/// Per frequency and source the forward field `u = H^{-1} q` and the adjoint
/// field `v = H^{-H} S^T G` (with `G` the penalty gradient) give
/// `g_i -= Re(omega^2 (1 - i gamma_i) conj(v_i) u_i)`.
pub fn misfit_and_gradient(
    model: &GridModel2D,
    geom: &AcquisitionGeometry,
    data: &FrequencyData,
    kind: &PenaltyKind,
    weights: &[f64],
    with_gradient: bool,
) -> Result<MisfitEval> {
    check_inputs(model, geom)?;
    data.check_matches(geom)?;
    kind.validate()?;
    if weights.len() != geom.omegas.len() {
        return invalid(format!("{} frequency weights for {} frequencies", weights.len(), geom.omegas.len()));
    }
    let parts = (0..geom.omegas.len())
        .into_par_iter()
        .map(|k| frequency_contribution(model, geom, data, kind, k, with_gradient))
        .collect::<Result<Vec<_>>>()?;

    let mut value = 0.0;
    let mut ls_residual = 0.0;
    let mut pde_solves = 0;
    let mut gradient = with_gradient.then(|| vec![0.0; model.len()]);
    for (part, &w) in parts.into_iter().zip(weights) {
        value += w * part.value;
        ls_residual += part.ls;
        pde_solves += part.solves;
        if let (Some(acc), Some(g)) = (gradient.as_mut(), part.gradient) {
            for (a, b) in acc.iter_mut().zip(g) {
                *a += w * b;
            }
        }
    }
    Ok(MisfitEval {
        value,
        ls_residual,
        gradient,
        pde_solves,
    })
}

pub fn misfit_value(
    model: &GridModel2D,
    geom: &AcquisitionGeometry,
    data: &FrequencyData,
    kind: &PenaltyKind,
) -> Result<f64> {
    let w = vec![1.0; geom.omegas.len()];
    Ok(misfit_and_gradient(model, geom, data, kind, &w, false)?.value)
}

/// `grad_m sum_omega rho(S H(m)^{-1} Q - D)` with unit frequency weights.
pub fn misfit_gradient(
    model: &GridModel2D,
    geom: &AcquisitionGeometry,
    data: &FrequencyData,
    kind: &PenaltyKind,
) -> Result<Vec<f64>> {
    let w = vec![1.0; geom.omegas.len()];
    Ok(misfit_and_gradient(model, geom, data, kind, &w, true)?
        .gradient
        .expect("gradient requested"))
}
