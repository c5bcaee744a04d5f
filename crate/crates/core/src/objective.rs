//! The composite objective `phi(y) = sum_omega w_omega rho(h(s C y), D) + R(y)`.
//!
//! `s` is a fixed model scale so that coefficients can be kept in
//! convenient units (for example `s = 1e-6` puts `y` in s^2/km^2).

use crate::error::{invalid, Error, Result};
use crate::helmholtz::{misfit_and_gradient, AcquisitionGeometry, FrequencyData, GridModel2D};
use crate::penalties::PenaltyKind;
use crate::regularizers::{reg_value, RegularizerKind};
use crate::transforms::{self, TransformKind};

/// Value and gradient of the smooth part of a composite objective.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Least-squares data misfit reported alongside the optimized one.
    pub ls_residual: f64,
    pub pde_solves: usize,
}

/// Smooth part `f` of `f + R`, as seen by the optimizer.
///
/// Implementations may return [`Error::InvalidModel`] for trial points where
/// `f` is undefined; line searches treat that as a request to backtrack.
pub trait SmoothObjective {
    fn dim(&self) -> usize;
    fn evaluate(&self, y: &[f64]) -> Result<SmoothEval>;
}

/// Full evaluation record at a coefficient vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub smooth: f64,
    pub reg: f64,
    pub total: f64,
    pub gradient: Vec<f64>,
    pub ls_residual: f64,
    pub pde_solve_count: usize,
}

#[derive(Debug, Clone)]
pub struct CompositeProblem {
    grid: GridModel2D,
    geometry: AcquisitionGeometry,
    observed: FrequencyData,
    pub penalty: PenaltyKind,
    pub regularizer: RegularizerKind,
    pub transform: TransformKind,
    model_scale: f64,
    physical_bounds: Option<(f64, f64)>,
    frequency_weights: Vec<f64>,
}

impl CompositeProblem {
    /// `grid` fixes the shape and spacing; its values are not used.
    pub fn new(
        grid: GridModel2D,
        geometry: AcquisitionGeometry,
        observed: FrequencyData,
        penalty: PenaltyKind,
        regularizer: RegularizerKind,
        transform: TransformKind,
    ) -> Result<Self> {
        geometry.validate(grid.nz(), grid.nx())?;
        observed.check_matches(&geometry)?;
        penalty.validate()?;
        regularizer.validate()?;
        transform.validate()?;
        let n = grid.len();
        if let TransformKind::HaarWavelet2d { nz, nx, .. } = transform {
            if nz != grid.nz() || nx != grid.nx() {
                return invalid(format!(
                    "transform grid {nz}x{nx} differs from model grid {}x{}",
                    grid.nz(),
                    grid.nx()
                ));
            }
        }
        match &regularizer {
            RegularizerKind::Box { lo, .. } if lo.len() != n => {
                return invalid(format!("box bounds have length {}, model has {n} cells", lo.len()))
            }
            RegularizerKind::Tv2dAnisotropic { nz, nx, .. } if nz * nx != n => {
                return invalid(format!("TV grid {nz}x{nx} does not match the model grid"))
            }
            _ => {}
        }
        let frequency_weights = vec![1.0; geometry.omegas.len()];
        Ok(Self {
            grid,
            geometry,
            observed,
            penalty,
            regularizer,
            transform,
            model_scale: 1.0,
            physical_bounds: None,
            frequency_weights,
        })
    }

    pub fn with_model_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return invalid(format!("model scale must be > 0, got {scale}"));
        }
        self.model_scale = scale;
        Ok(self)
    }

    /// Models outside `[lo, hi]` (in s^2/m^2) are rejected like non-positive ones.
    pub fn with_physical_bounds(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return invalid(format!("physical bounds [{lo}, {hi}] are empty"));
        }
        self.physical_bounds = Some((lo, hi));
        Ok(self)
    }

    pub fn with_frequency_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.geometry.omegas.len() {
            return invalid(format!(
                "{} frequency weights for {} frequencies",
                weights.len(),
                self.geometry.omegas.len()
            ));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return invalid("frequency weights must be finite and >= 0");
        }
        self.frequency_weights = weights;
        Ok(self)
    }

    pub fn geometry(&self) -> &AcquisitionGeometry {
        &self.geometry
    }

    pub fn observed(&self) -> &FrequencyData {
        &self.observed
    }

    pub fn model_scale(&self) -> f64 {
        self.model_scale
    }

    pub fn grid(&self) -> &GridModel2D {
        &self.grid
    }

    /// `m = s C y`, validated for positivity and physical bounds.
    pub fn model_from(&self, y: &[f64]) -> Result<GridModel2D> {
        if y.len() != self.grid.len() {
            return invalid(format!("coefficient vector has length {}, model {}", y.len(), self.grid.len()));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return invalid(format!("coefficient {i} is not finite"));
        }
        let mut m = transforms::apply(&self.transform, y)?;
        for v in m.iter_mut() {
            *v *= self.model_scale;
        }
        if let Some((lo, hi)) = self.physical_bounds {
            if let Some(index) = m.iter().position(|&v| v < lo || v > hi) {
                return Err(Error::InvalidModel { index, value: m[index] });
            }
        }
        self.grid.with_values(m)
    }

    /// Inverse of [`model_from`](Self::model_from) for orthonormal transforms.
    pub fn coefficients_from(&self, model: &GridModel2D) -> Result<Vec<f64>> {
        if model.nz() != self.grid.nz() || model.nx() != self.grid.nx() {
            return invalid("model grid does not match the problem grid");
        }
        let mut y = transforms::adjoint(&self.transform, model.values())?;
        for v in y.iter_mut() {
            *v /= self.model_scale;
        }
        Ok(y)
    }

    /// Smooth value and gradient `s C^T grad_m`, plus regularizer value.
    pub fn eval_smooth(&self, y: &[f64]) -> Result<EvalRecord> {
        let model = self.model_from(y)?;
        let eval = misfit_and_gradient(
            &model,
            &self.geometry,
            &self.observed,
            &self.penalty,
            &self.frequency_weights,
            true,
        )?;
        let grad_m = eval.gradient.expect("gradient requested");
        let mut gradient = transforms::adjoint(&self.transform, &grad_m)?;
        for g in gradient.iter_mut() {
            *g *= self.model_scale;
        }
        let reg = reg_value(&self.regularizer, y)?;
        Ok(EvalRecord {
            smooth: eval.value,
            reg,
            total: eval.value + reg,
            gradient,
            ls_residual: eval.ls_residual,
            pde_solve_count: eval.pde_solves,
        })
    }

    /// `phi(y)`, forward solves only.
    pub fn eval_total(&self, y: &[f64]) -> Result<f64> {
        let reg = reg_value(&self.regularizer, y)?;
        let model = self.model_from(y)?;
        let eval = misfit_and_gradient(
            &model,
            &self.geometry,
            &self.observed,
            &self.penalty,
            &self.frequency_weights,
            false,
        )?;
        Ok(eval.value + reg)
    }
}

impl SmoothObjective for CompositeProblem {
    fn dim(&self) -> usize {
        self.grid.len()
    }

    fn evaluate(&self, y: &[f64]) -> Result<SmoothEval> {
        let rec = self.eval_smooth(y)?;
        Ok(SmoothEval {
            value: rec.smooth,
            gradient: rec.gradient,
            ls_residual: rec.ls_residual,
            pde_solves: rec.pde_solve_count,
        })
    }
}
