//! Regularizers defined by a value (possibly `+inf`) and a scaled prox.
//!
//! `prox(kind, y, t)` returns the unique minimizer of
//! `1/2 ||g - y||^2 + t * R(g)`. Indicator regularizers (box, l1 ball)
//! return projections, independent of `t`.

mod l1ball;
pub mod tv;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub use l1ball::project_l1_ball;
pub use tv::{tv1d_prox, tv2d_prox};

/// Relative slack used when testing indicator feasibility.
pub const FEASIBILITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegularizerKind {
    Zero,
    Box { lo: Vec<f64>, hi: Vec<f64> },
    L1Penalty { lambda: f64 },
    L1Ball { tau: f64 },
    Tv1d { lambda: f64 },
    Tv2dAnisotropic { lambda: f64, nz: usize, nx: usize },
}

impl RegularizerKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            RegularizerKind::Zero => Ok(()),
            RegularizerKind::Box { lo, hi } => {
                if lo.len() != hi.len() {
                    return invalid(format!("box bounds have lengths {} and {}", lo.len(), hi.len()));
                }
                if let Some(i) = lo.iter().zip(hi).position(|(l, h)| !(l <= h)) {
                    return invalid(format!("box bound lo > hi at index {i}"));
                }
                Ok(())
            }
            RegularizerKind::L1Penalty { lambda }
            | RegularizerKind::Tv1d { lambda }
            | RegularizerKind::Tv2dAnisotropic { lambda, .. } => {
                if *lambda >= 0.0 && lambda.is_finite() {
                    Ok(())
                } else {
                    invalid(format!("regularization weight must be >= 0, got {lambda}"))
                }
            }
            RegularizerKind::L1Ball { tau } => {
                if *tau > 0.0 && tau.is_finite() {
                    Ok(())
                } else {
                    invalid(format!("l1-ball radius must be > 0, got {tau}"))
                }
            }
        }
    }

    /// True for regularizers that only take the values 0 and `+inf`.
    pub fn is_indicator(&self) -> bool {
        matches!(self, RegularizerKind::Box { .. } | RegularizerKind::L1Ball { .. })
    }

    fn check_len(&self, n: usize) -> Result<()> {
        match self {
            RegularizerKind::Box { lo, .. } if lo.len() != n => {
                invalid(format!("box bounds have length {}, vector has {n}", lo.len()))
            }
            RegularizerKind::Tv2dAnisotropic { nz, nx, .. } if nz * nx != n => {
                invalid(format!("TV grid {nz}x{nx} does not match vector length {n}"))
            }
            _ => Ok(()),
        }
    }
}

#[inline]
pub(crate) fn soft_threshold_scalar(v: f64, threshold: f64) -> f64 {
    v.signum() * (v.abs() - threshold).max(0.0)
}

/// Entrywise soft thresholding `sign(y_i) * max(0, |y_i| - threshold)`.
pub fn soft_threshold(y: &[f64], threshold: f64) -> Vec<f64> {
    y.iter()
        .map(|&v| if v == 0.0 { 0.0 } else { soft_threshold_scalar(v, threshold) })
        .collect()
}

fn check_finite(y: &[f64]) -> Result<()> {
    match y.iter().position(|v| !v.is_finite()) {
        Some(i) => invalid(format!("coefficient {i} is not finite")),
        None => Ok(()),
    }
}

/// `R(y)`, `+inf` outside the feasible set of indicator kinds.
pub fn reg_value(kind: &RegularizerKind, y: &[f64]) -> Result<f64> {
    kind.validate()?;
    kind.check_len(y.len())?;
    check_finite(y)?;
    Ok(match kind {
        RegularizerKind::Zero => 0.0,
        RegularizerKind::Box { lo, hi } => {
            let feasible = y.iter().zip(lo.iter().zip(hi)).all(|(&v, (&l, &h))| {
                let slack = FEASIBILITY_TOL * l.abs().max(h.abs()).max(1.0);
                v >= l - slack && v <= h + slack
            });
            if feasible {
                0.0
            } else {
                f64::INFINITY
            }
        }
        RegularizerKind::L1Penalty { lambda } => lambda * l1_norm(y),
        RegularizerKind::L1Ball { tau } => {
            if l1_norm(y) <= tau * (1.0 + FEASIBILITY_TOL) {
                0.0
            } else {
                f64::INFINITY
            }
        }
        RegularizerKind::Tv1d { lambda } => lambda * tv::tv1d_value(y),
        RegularizerKind::Tv2dAnisotropic { lambda, nz, nx } => lambda * tv::tv2d_value(y, *nz, *nx),
    })
}

pub fn prox(kind: &RegularizerKind, y: &[f64], t: f64) -> Result<Vec<f64>> {
    if !(t > 0.0) || !t.is_finite() {
        return invalid(format!("prox step must be > 0, got {t}"));
    }
    kind.validate()?;
    kind.check_len(y.len())?;
    check_finite(y)?;
    Ok(match kind {
        RegularizerKind::Zero => y.to_vec(),
        RegularizerKind::Box { lo, hi } => y
            .iter()
            .zip(lo.iter().zip(hi))
            .map(|(&v, (&l, &h))| v.clamp(l, h))
            .collect(),
        RegularizerKind::L1Penalty { lambda } => soft_threshold(y, t * lambda),
        RegularizerKind::L1Ball { tau } => project_l1_ball(y, *tau)?,
        RegularizerKind::Tv1d { lambda } => tv1d_prox(y, t * lambda),
        RegularizerKind::Tv2dAnisotropic { lambda, nz, nx } => tv2d_prox(y, *nz, *nx, t * lambda),
    })
}

pub(crate) fn l1_norm(y: &[f64]) -> f64 {
    y.iter().map(|v| v.abs()).sum()
}
