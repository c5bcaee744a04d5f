//! Synthetic models and data.

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::{ModelSpec, NoiseSpec, MAX_VELOCITY, MIN_VELOCITY};
use crate::error::{invalid, Result};
use crate::helmholtz::io::read_model;
use crate::helmholtz::{predict_data, AcquisitionGeometry, FrequencyData, GridModel2D};

/// Squared-slowness model from a layered/blob spec or a model file.
pub fn synth_model(spec: &ModelSpec, seed: u64) -> Result<GridModel2D> {
    let (nz, nx, h, layers, blobs, random_blobs) = match spec {
        ModelSpec::File { path } => return read_model(path),
        ModelSpec::Layered { nz, nx, h, layers, blobs, random_blobs } => (*nz, *nx, *h, layers, blobs, random_blobs),
    };
    if layers.is_empty() {
        return invalid("layered model needs at least one layer");
    }
    let mut sorted = layers.clone();
    sorted.sort_by_key(|l| l.top);
    let mut velocity = vec![0.0; nz * nx];
    for iz in 0..nz {
        let v = sorted.iter().rev().find(|l| l.top <= iz).unwrap_or(&sorted[0]).velocity;
        for ix in 0..nx {
            velocity[ix * nz + iz] = v;
        }
    }

    let mut all_blobs = blobs.clone();
    if let Some(r) = random_blobs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..r.count {
            all_blobs.push(super::config::Blob {
                iz: rng.random_range(0.0..nz as f64),
                ix: rng.random_range(0.0..nx as f64),
                sigma: r.sigma,
                dv: rng.random_range(-r.max_dv..=r.max_dv),
            });
        }
    }
    for b in &all_blobs {
        let inv = 1.0 / (2.0 * b.sigma * b.sigma);
        for ix in 0..nx {
            for iz in 0..nz {
                let r2 = (iz as f64 - b.iz).powi(2) + (ix as f64 - b.ix).powi(2);
                velocity[ix * nz + iz] += b.dv * (-r2 * inv).exp();
            }
        }
    }
    if let Some(v) = velocity.iter().find(|v| !(MIN_VELOCITY..=MAX_VELOCITY).contains(*v)) {
        return invalid(format!("velocity {v} m/s is outside [{MIN_VELOCITY}, {MAX_VELOCITY}]"));
    }
    GridModel2D::new(nz, nx, h, velocity.iter().map(|v| 1.0 / (v * v)).collect())
}

/// Separable Gaussian smoothing with `sigma` in cells; edges are replicated.
pub fn gaussian_blur(model: &GridModel2D, sigma: f64) -> Result<GridModel2D> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return invalid(format!("blur sigma must be >= 0, got {sigma}"));
    }
    if sigma == 0.0 {
        return Ok(model.clone());
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|w| *w /= total);

    let (nz, nx) = (model.nz() as isize, model.nx() as isize);
    let src = model.values();
    let at = |iz: isize, ix: isize| (ix.clamp(0, nx - 1) * nz + iz.clamp(0, nz - 1)) as usize;
    let mut tmp = vec![0.0; src.len()];
    for ix in 0..nx {
        for iz in 0..nz {
            tmp[at(iz, ix)] = (-radius..=radius)
                .zip(&kernel)
                .map(|(k, w)| w * src[at(iz + k, ix)])
                .sum();
        }
    }
    let mut out = vec![0.0; src.len()];
    for ix in 0..nx {
        for iz in 0..nz {
            out[at(iz, ix)] = (-radius..=radius)
                .zip(&kernel)
                .map(|(k, w)| w * tmp[at(iz, ix + k)])
                .sum();
        }
    }
    model.with_values(out)
}

/// Synthetic data with the noise actually added, per frequency.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub data: FrequencyData,
    pub clean: FrequencyData,
    /// `||eps||_F^2` of the Gaussian part.
    pub noise_energy: Vec<f64>,
    /// Linear indices (receiver fastest) of outlier entries.
    pub outliers: Vec<Vec<usize>>,
}

impl SynthData {
    /// `10 log10(||D_clean||^2 / ||eps||^2)` for frequency `k`.
    pub fn achieved_snr_db(&self, k: usize) -> f64 {
        10.0 * (self.clean.frobenius_sqr(k) / self.noise_energy[k]).log10()
    }
}

pub fn synth_data(m_true: &GridModel2D, geom: &AcquisitionGeometry, noise: &NoiseSpec, seed: u64) -> Result<FrequencyData> {
    Ok(synth_data_detailed(m_true, geom, noise, seed)?.data)
}

/// Clean prediction, then Gaussian noise at the requested per-frequency SNR,
/// then `round(p n)` entries per frequency replaced by spikes of magnitude
/// `a max|D|` with uniform phase.
pub fn synth_data_detailed(
    m_true: &GridModel2D,
    geom: &AcquisitionGeometry,
    noise: &NoiseSpec,
    seed: u64,
) -> Result<SynthData> {
    noise.validate()?;
    let clean = predict_data(m_true, geom)?;
    let mut data = clean.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut noise_energy = vec![0.0; clean.n_freq()];
    let mut outliers = vec![Vec::new(); clean.n_freq()];

    for k in 0..clean.n_freq() {
        let signal = clean.frobenius_sqr(k);
        let peak = clean.matrix(k).iter().fold(0.0f64, |a, v| a.max(v.norm()));
        let d = data.matrix_mut(k);
        if let Some(snr) = noise.snr_db {
            let eps: Vec<Complex64> = (0..d.len())
                .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect();
            let raw: f64 = eps.iter().map(|e| e.norm_sqr()).sum();
            let target = signal / 10f64.powf(snr / 10.0);
            let scale = if raw > 0.0 { (target / raw).sqrt() } else { 0.0 };
            for (v, e) in d.iter_mut().zip(&eps) {
                *v += e * scale;
            }
            noise_energy[k] = raw * scale * scale;
        }
        let count = (noise.outlier_fraction * d.len() as f64).round() as usize;
        if count > 0 {
            let mut idx = sample(&mut rng, d.len(), count).into_vec();
            idx.sort_unstable();
            for &i in &idx {
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                d[i] = Complex64::from_polar(noise.outlier_amplitude * peak, phase);
            }
            outliers[k] = idx;
        }
    }
    Ok(SynthData {
        data,
        clean,
        noise_energy,
        outliers,
    })
}
