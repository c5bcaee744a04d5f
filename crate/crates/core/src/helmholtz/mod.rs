//! 2-D constant-density acoustic modeling in the frequency domain.
//!
//! The discrete operator is `H(m) = omega^2 diag(m (1 - i gamma)) + L` with a
//! 5-point Laplacian `L`, homogeneous Dirichlet outer boundary and a
//! quadratic-ramp absorbing sponge `gamma`. Grid vectors are stored with z
//! fastest: cell `(iz, ix)` lives at `ix * nz + iz`.

mod banded;
pub mod io;
mod modeling;
mod operator;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub use modeling::{
    misfit_and_gradient, misfit_gradient, misfit_value, predict_data, FactorizedOperator,
    MisfitEval, Wavefield, SOLVE_TOLERANCE,
};
pub use operator::{assemble, CsrMatrix, HelmholtzOperator};

pub const MIN_GRID_POINTS: usize = 8;
/// Minimum points per wavelength below which a dispersion warning is logged.
pub const MIN_POINTS_PER_WAVELENGTH: f64 = 8.0;

/// Squared-slowness field (s^2/m^2) on a regular grid with spacing `h` (m).
#[derive(Debug, Clone, PartialEq)]
pub struct GridModel2D {
    nz: usize,
    nx: usize,
    h: f64,
    m: Vec<f64>,
}

impl GridModel2D {
    pub fn new(nz: usize, nx: usize, h: f64, m: Vec<f64>) -> Result<Self> {
        if nz < MIN_GRID_POINTS || nx < MIN_GRID_POINTS {
            return invalid(format!("grid {nz}x{nx} is smaller than {MIN_GRID_POINTS}x{MIN_GRID_POINTS}"));
        }
        if !(h > 0.0) || !h.is_finite() {
            return invalid(format!("grid spacing must be > 0, got {h}"));
        }
        if m.len() != nz * nx {
            return invalid(format!("model has {} cells, grid is {nz}x{nx}", m.len()));
        }
        check_positive(&m)?;
        Ok(Self { nz, nx, h, m })
    }

    pub fn constant(nz: usize, nx: usize, h: f64, value: f64) -> Result<Self> {
        Self::new(nz, nx, h, vec![value; nz * nx])
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.m
    }

    pub fn into_values(self) -> Vec<f64> {
        self.m
    }

    pub fn index(&self, iz: usize, ix: usize) -> usize {
        ix * self.nz + iz
    }

    /// Same grid, new values.
    pub fn with_values(&self, m: Vec<f64>) -> Result<Self> {
        Self::new(self.nz, self.nx, self.h, m)
    }
}

pub(crate) fn check_positive(m: &[f64]) -> Result<()> {
    match m.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
        Some(index) => Err(Error::InvalidModel { index, value: m[index] }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridPoint {
    pub iz: usize,
    pub ix: usize,
}

impl GridPoint {
    pub fn new(iz: usize, ix: usize) -> Self {
        Self { iz, ix }
    }

    pub fn linear(&self, nz: usize) -> usize {
        self.ix * nz + self.iz
    }
}

/// Absorbing band: `gamma = gamma_max * ((width - d) / width)^2` for a cell
/// `d < width` cells from the nearest edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sponge {
    pub width: usize,
    pub gamma_max: f64,
}

impl Default for Sponge {
    fn default() -> Self {
        Self {
            width: 10,
            gamma_max: 1.0,
        }
    }
}

impl Sponge {
    pub fn gamma(&self, iz: usize, ix: usize, nz: usize, nx: usize) -> f64 {
        if self.width == 0 {
            return 0.0;
        }
        let d = iz.min(nz - 1 - iz).min(ix).min(nx - 1 - ix);
        if d >= self.width {
            0.0
        } else {
            let r = (self.width - d) as f64 / self.width as f64;
            self.gamma_max * r * r
        }
    }

    pub fn profile(&self, nz: usize, nx: usize) -> Vec<f64> {
        let mut g = vec![0.0; nz * nx];
        for ix in 0..nx {
            for iz in 0..nz {
                g[ix * nz + iz] = self.gamma(iz, ix, nz, nx);
            }
        }
        g
    }
}

/// Sources, receivers, frequencies and boundary treatment of a survey.
///
/// Source `s` injects `weight_s / h^2` at its grid node; the same sources
/// are used at every frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionGeometry {
    pub sources: Vec<GridPoint>,
    pub source_weights: Vec<Complex64>,
    pub receivers: Vec<GridPoint>,
    pub omegas: Vec<f64>,
    pub sponge: Sponge,
}

impl AcquisitionGeometry {
    /// Unit point sources.
    pub fn new(sources: Vec<GridPoint>, receivers: Vec<GridPoint>, omegas: Vec<f64>, sponge: Sponge) -> Self {
        let source_weights = vec![Complex64::new(1.0, 0.0); sources.len()];
        Self {
            sources,
            source_weights,
            receivers,
            omegas,
            sponge,
        }
    }

    pub fn n_src(&self) -> usize {
        self.sources.len()
    }

    pub fn n_recv(&self) -> usize {
        self.receivers.len()
    }

    pub fn validate(&self, nz: usize, nx: usize) -> Result<()> {
        if self.sources.is_empty() || self.receivers.is_empty() {
            return invalid("geometry needs at least one source and one receiver");
        }
        if self.source_weights.len() != self.sources.len() {
            return invalid("one source weight per source is required");
        }
        if self.omegas.is_empty() {
            return invalid("geometry needs at least one frequency");
        }
        if let Some(w) = self.omegas.iter().find(|&&w| !(w > 0.0) || !w.is_finite()) {
            return invalid(format!("frequencies must be > 0 rad/s, got {w}"));
        }
        if !(self.sponge.gamma_max >= 0.0) || !self.sponge.gamma_max.is_finite() {
            return invalid(format!("sponge gamma_max must be >= 0, got {}", self.sponge.gamma_max));
        }
        let band = self.sponge.width;
        let inside = |p: &GridPoint| {
            p.iz >= band && p.ix >= band && p.iz + band < nz && p.ix + band < nx
        };
        for (label, pts) in [("source", &self.sources), ("receiver", &self.receivers)] {
            for p in pts.iter() {
                if p.iz >= nz || p.ix >= nx {
                    return invalid(format!("{label} ({}, {}) lies outside the {nz}x{nx} grid", p.iz, p.ix));
                }
                if !inside(p) {
                    return invalid(format!(
                        "{label} ({}, {}) lies inside the {band}-cell absorbing band",
                        p.iz, p.ix
                    ));
                }
            }
        }
        Ok(())
    }

    /// Smallest points-per-wavelength over the model and frequency set.
    pub fn points_per_wavelength(&self, model: &GridModel2D) -> f64 {
        let m_max = model.values().iter().cloned().fold(0.0, f64::max);
        let v_min = 1.0 / m_max.sqrt();
        let w_max = self.omegas.iter().cloned().fold(0.0, f64::max);
        2.0 * std::f64::consts::PI * v_min / w_max / model.h()
    }

    /// Logs a warning when the grid undersamples the shortest wavelength.
    pub fn check_sampling(&self, model: &GridModel2D) -> f64 {
        let ppw = self.points_per_wavelength(model);
        if ppw < MIN_POINTS_PER_WAVELENGTH {
            log::warn!(
                "grid samples the shortest wavelength with {ppw:.1} points (< {MIN_POINTS_PER_WAVELENGTH}); expect dispersion"
            );
        }
        ppw
    }
}

/// Per-frequency complex data matrices `n_recv x n_src`, receiver fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyData {
    n_recv: usize,
    n_src: usize,
    omegas: Vec<f64>,
    values: Vec<Vec<Complex64>>,
}

impl FrequencyData {
    pub fn new(n_recv: usize, n_src: usize, omegas: Vec<f64>, values: Vec<Vec<Complex64>>) -> Result<Self> {
        if values.len() != omegas.len() {
            return invalid(format!("{} data matrices for {} frequencies", values.len(), omegas.len()));
        }
        for (k, v) in values.iter().enumerate() {
            if v.len() != n_recv * n_src {
                return invalid(format!(
                    "data matrix {k} has {} entries, expected {n_recv}x{n_src}",
                    v.len()
                ));
            }
            if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return invalid(format!("data matrix {k} has non-finite entries"));
            }
        }
        Ok(Self {
            n_recv,
            n_src,
            omegas,
            values,
        })
    }

    pub fn zeros(n_recv: usize, n_src: usize, omegas: Vec<f64>) -> Self {
        let values = vec![vec![Complex64::new(0.0, 0.0); n_recv * n_src]; omegas.len()];
        Self {
            n_recv,
            n_src,
            omegas,
            values,
        }
    }

    pub fn n_recv(&self) -> usize {
        self.n_recv
    }

    pub fn n_src(&self) -> usize {
        self.n_src
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn n_freq(&self) -> usize {
        self.omegas.len()
    }

    pub fn matrix(&self, k: usize) -> &[Complex64] {
        &self.values[k]
    }

    pub fn matrix_mut(&mut self, k: usize) -> &mut [Complex64] {
        &mut self.values[k]
    }

    pub fn get(&self, k: usize, recv: usize, src: usize) -> Complex64 {
        self.values[k][src * self.n_recv + recv]
    }

    pub fn frobenius_sqr(&self, k: usize) -> f64 {
        self.values[k].iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn check_matches(&self, geom: &AcquisitionGeometry) -> Result<()> {
        if self.n_recv != geom.n_recv() || self.n_src != geom.n_src() {
            return invalid(format!(
                "data is {}x{} but geometry has {} receivers and {} sources",
                self.n_recv,
                self.n_src,
                geom.n_recv(),
                geom.n_src()
            ));
        }
        if self.omegas.len() != geom.omegas.len()
            || self.omegas.iter().zip(&geom.omegas).any(|(a, b)| (a - b).abs() > 1e-12 * b.abs())
        {
            return invalid("data frequencies do not match the geometry");
        }
        Ok(())
    }
}
