//! Composite optimization for 2-D frequency-domain full-waveform inversion.
//!
//! The objective is `phi(y) = sum_omega rho(S H(C y)^{-1} Q - D) + R(y)`:
//! a differentiable misfit penalty ([`penalties`]) on the data residual of a
//! Helmholtz forward model ([`helmholtz`]), evaluated at the model `m = C y`
//! produced by a linear transform ([`transforms`]), plus a regularizer with
//! an inexpensive prox ([`regularizers`]). [`pqn`] minimizes it with a
//! proximal quasi-Newton method built on [`quasinewton`].

// positivity checks are written as `!(x > 0.0)` so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod helmholtz;
pub mod objective;
pub mod penalties;
pub mod pqn;
pub mod quasinewton;
pub mod regularizers;
pub mod transforms;

pub use error::{Error, Result};
pub use helmholtz::{AcquisitionGeometry, FrequencyData, GridModel2D, GridPoint, Sponge};
pub use objective::{CompositeProblem, EvalRecord, SmoothEval, SmoothObjective};
pub use penalties::{PenaltyKind, ResidualMatrix};
pub use pqn::{minimize, spg_prox_solve, IterationRecord, PqnResult, SolverConfig, StopReason};
pub use quasinewton::LbfgsMemory;
pub use regularizers::RegularizerKind;
pub use transforms::TransformKind;
