//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::helmholtz::{AcquisitionGeometry, GridPoint, Sponge};
use crate::penalties::PenaltyKind;
use crate::pqn::SolverConfig;
use crate::regularizers::RegularizerKind;
use crate::transforms::TransformKind;

pub const MIN_VELOCITY: f64 = 1500.0;
pub const MAX_VELOCITY: f64 = 4500.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    /// First grid row (z index) of the layer.
    pub top: usize,
    /// m/s
    pub velocity: f64,
}

/// Gaussian velocity anomaly `dv * exp(-r^2 / (2 sigma^2))`, lengths in cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Blob {
    pub iz: f64,
    pub ix: f64,
    pub sigma: f64,
    pub dv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomBlobs {
    pub count: usize,
    pub max_dv: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Layered {
        nz: usize,
        nx: usize,
        h: f64,
        layers: Vec<Layer>,
        #[serde(default)]
        blobs: Vec<Blob>,
        #[serde(default)]
        random_blobs: Option<RandomBlobs>,
    },
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    /// Row of evenly spaced sources, used when `sources` is empty.
    #[serde(default)]
    pub source_row: usize,
    #[serde(default)]
    pub source_count: usize,
    /// Rows of receivers, one every `receiver_stride` columns.
    #[serde(default)]
    pub receiver_rows: Vec<usize>,
    #[serde(default = "default_stride")]
    pub receiver_stride: usize,
    #[serde(default)]
    pub sources: Vec<GridPoint>,
    #[serde(default)]
    pub receivers: Vec<GridPoint>,
    #[serde(default)]
    pub sponge: Sponge,
}

fn default_stride() -> usize {
    1
}

impl GeometrySpec {
    pub fn build(&self, nz: usize, nx: usize, frequencies_hz: &[f64]) -> Result<AcquisitionGeometry> {
        let w = self.sponge.width;
        if nx <= 2 * w || nz <= 2 * w {
            return config_err("geometry.sponge.width", format!("band of {w} cells leaves no interior in a {nz}x{nx} grid"));
        }
        let (first, last) = (w, nx - 1 - w);
        let sources = if !self.sources.is_empty() {
            self.sources.clone()
        } else {
            if self.source_count == 0 {
                return config_err("geometry.source_count", "need at least one source");
            }
            let span = (last - first) as f64;
            (0..self.source_count)
                .map(|s| {
                    let frac = (s as f64 + 0.5) / self.source_count as f64;
                    GridPoint::new(self.source_row, first + (frac * span).round() as usize)
                })
                .collect()
        };
        let receivers = if !self.receivers.is_empty() {
            self.receivers.clone()
        } else {
            if self.receiver_rows.is_empty() {
                return config_err("geometry.receiver_rows", "need at least one receiver row");
            }
            if self.receiver_stride == 0 {
                return config_err("geometry.receiver_stride", "must be >= 1");
            }
            self.receiver_rows
                .iter()
                .flat_map(|&iz| (first..=last).step_by(self.receiver_stride).map(move |ix| GridPoint::new(iz, ix)))
                .collect()
        };
        let omegas = frequencies_hz.iter().map(|f| 2.0 * std::f64::consts::PI * f).collect();
        let geom = AcquisitionGeometry::new(sources, receivers, omegas, self.sponge);
        geom.validate(nz, nx).map_err(|e| crate::Error::Config {
            field: "geometry".into(),
            message: e.to_string(),
        })?;
        Ok(geom)
    }
}

/// Regularizer as written in a config file; box bounds may be scalars and
/// grid shapes are filled in from the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegularizerSpec {
    Zero,
    Box { lo: f64, hi: f64 },
    L1Penalty { lambda: f64 },
    L1Ball { tau: f64 },
    Tv1d { lambda: f64 },
    Tv2d { lambda: f64 },
}

impl RegularizerSpec {
    pub fn build(&self, nz: usize, nx: usize) -> Result<RegularizerKind> {
        let n = nz * nx;
        let kind = match *self {
            RegularizerSpec::Zero => RegularizerKind::Zero,
            RegularizerSpec::Box { lo, hi } => RegularizerKind::Box {
                lo: vec![lo; n],
                hi: vec![hi; n],
            },
            RegularizerSpec::L1Penalty { lambda } => RegularizerKind::L1Penalty { lambda },
            RegularizerSpec::L1Ball { tau } => RegularizerKind::L1Ball { tau },
            RegularizerSpec::Tv1d { lambda } => RegularizerKind::Tv1d { lambda },
            RegularizerSpec::Tv2d { lambda } => RegularizerKind::Tv2dAnisotropic { lambda, nz, nx },
        };
        kind.validate().map_err(|e| crate::Error::Config {
            field: "regularizer".into(),
            message: e.to_string(),
        })?;
        Ok(kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TransformSpec {
    Identity,
    Haar { levels: usize },
}

impl TransformSpec {
    pub fn build(&self, nz: usize, nx: usize) -> Result<TransformKind> {
        match *self {
            TransformSpec::Identity => Ok(TransformKind::Identity),
            TransformSpec::Haar { levels } => TransformKind::haar(levels, nz, nx).map_err(|e| crate::Error::Config {
                field: "transform.levels".into(),
                message: e.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub snr_db: Option<f64>,
    pub outlier_fraction: f64,
    pub outlier_amplitude: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            snr_db: None,
            outlier_fraction: 0.0,
            outlier_amplitude: 5.0,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return config_err("noise.snr_db", "must be finite");
            }
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return config_err("noise.outlier_fraction", format!("must lie in [0, 1), got {}", self.outlier_fraction));
        }
        if !(self.outlier_amplitude > 0.0) || !self.outlier_amplitude.is_finite() {
            return config_err("noise.outlier_amplitude", format!("must be > 0, got {}", self.outlier_amplitude));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StartSpec {
    /// Gaussian blur of the true model, `sigma` in cells.
    BlurredTruth { sigma: f64 },
    File { path: PathBuf },
    /// Final model of an earlier run written to `dir`.
    PriorRun { dir: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub geometry: GeometrySpec,
    pub frequencies_hz: Vec<f64>,
    pub penalty: PenaltyKind,
    #[serde(default = "default_regularizer")]
    pub regularizer: RegularizerSpec,
    #[serde(default = "default_transform")]
    pub transform: TransformSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub noise: NoiseSpec,
    pub start: StartSpec,
    /// Observed data file; synthesized from the model when absent.
    #[serde(default)]
    pub data_path: Option<PathBuf>,
    /// `m = model_scale * C y`
    #[serde(default = "default_model_scale")]
    pub model_scale: f64,
    #[serde(default)]
    pub velocity_bounds: Option<[f64; 2]>,
    #[serde(default)]
    pub frequency_weights: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

fn default_regularizer() -> RegularizerSpec {
    RegularizerSpec::Zero
}

fn default_transform() -> TransformSpec {
    TransformSpec::Identity
}

fn default_model_scale() -> f64 {
    1e-6
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if let ModelSpec::Layered { nz, nx, h, layers, blobs, random_blobs } = &self.model {
            if *nz < crate::helmholtz::MIN_GRID_POINTS || *nx < crate::helmholtz::MIN_GRID_POINTS {
                return config_err("model.nz", format!("grid {nz}x{nx} is below the 8x8 minimum"));
            }
            if !(*h > 0.0) {
                return config_err("model.h", "grid spacing must be > 0");
            }
            if layers.is_empty() {
                return config_err("model.layers", "need at least one layer");
            }
            for (i, l) in layers.iter().enumerate() {
                if !(MIN_VELOCITY..=MAX_VELOCITY).contains(&l.velocity) {
                    return config_err(
                        &format!("model.layers[{i}].velocity"),
                        format!("{} m/s is outside [{MIN_VELOCITY}, {MAX_VELOCITY}]", l.velocity),
                    );
                }
            }
            for (i, b) in blobs.iter().enumerate() {
                if !(b.sigma > 0.0) {
                    return config_err(&format!("model.blobs[{i}].sigma"), "must be > 0");
                }
            }
            if let Some(r) = random_blobs {
                if !(r.sigma > 0.0) || !(r.max_dv >= 0.0) {
                    return config_err("model.random_blobs", "sigma must be > 0 and max_dv >= 0");
                }
            }
        }
        if self.frequencies_hz.is_empty() {
            return config_err("frequencies_hz", "need at least one frequency");
        }
        if let Some(f) = self.frequencies_hz.iter().find(|f| !(**f > 0.0) || !f.is_finite()) {
            return config_err("frequencies_hz", format!("frequencies must be > 0, got {f}"));
        }
        self.penalty.validate().map_err(|e| crate::Error::Config {
            field: "penalty".into(),
            message: e.to_string(),
        })?;
        self.solver.validate().map_err(|e| crate::Error::Config {
            field: "solver".into(),
            message: e.to_string(),
        })?;
        self.noise.validate()?;
        if let StartSpec::BlurredTruth { sigma } = self.start {
            if !(sigma >= 0.0) {
                return config_err("start.sigma", "must be >= 0");
            }
        }
        if !(self.model_scale > 0.0) || !self.model_scale.is_finite() {
            return config_err("model_scale", "must be > 0");
        }
        if let Some([lo, hi]) = self.velocity_bounds {
            if !(lo > 0.0 && lo < hi) {
                return config_err("velocity_bounds", "need 0 < v_min < v_max");
            }
        }
        if let Some(w) = &self.frequency_weights {
            if w.len() != self.frequencies_hz.len() {
                return config_err("frequency_weights", "need one weight per frequency");
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "model": {"kind": "layered", "nz": 16, "nx": 16, "h": 10.0,
                  "layers": [{"top": 0, "velocity": 2000.0}]},
        "geometry": {"source_row": 4, "source_count": 2, "receiver_rows": [10],
                     "sponge": {"width": 3, "gamma_max": 1.0}},
        "frequencies_hz": [3.0],
        "penalty": {"kind": "least_squares"},
        "start": {"kind": "blurred_truth", "sigma": 2.0}
    }"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.regularizer, RegularizerSpec::Zero);
        assert_eq!(cfg.transform, TransformSpec::Identity);
        assert_eq!(cfg.solver, SolverConfig::default());
        assert_eq!(cfg.model_scale, 1e-6);
        let geom = cfg.geometry.build(16, 16, &cfg.frequencies_hz).unwrap();
        assert_eq!(geom.n_src(), 2);
        assert_eq!(geom.n_recv(), 10);
        assert!((geom.omegas[0] - 6.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn field_level_errors() {
        let bad = MINIMAL.replace("\"velocity\": 2000.0", "\"velocity\": 9000.0");
        match ExperimentConfig::from_json(&bad) {
            Err(crate::Error::Config { field, .. }) => assert_eq!(field, "model.layers[0].velocity"),
            other => panic!("unexpected {other:?}"),
        }
        let bad = MINIMAL.replace("\"start\"", "\"noise\": {\"outlier_fraction\": 1.5}, \"start\"");
        match ExperimentConfig::from_json(&bad) {
            Err(crate::Error::Config { field, .. }) => assert_eq!(field, "noise.outlier_fraction"),
            other => panic!("unexpected {other:?}"),
        }
        let bad = MINIMAL.replace("\"least_squares\"", "\"huber\", \"kappa\": -1.0");
        assert!(matches!(ExperimentConfig::from_json(&bad), Err(crate::Error::Config { .. })));
        let unknown = MINIMAL.replace("\"start\"", "\"bogus\": 1, \"start\"");
        assert!(ExperimentConfig::from_json(&unknown).is_err());
    }

    #[test]
    fn sources_in_band_are_rejected() {
        let cfg = ExperimentConfig::from_json(&MINIMAL.replace("\"source_row\": 4", "\"source_row\": 1")).unwrap();
        assert!(cfg.geometry.build(16, 16, &cfg.frequencies_hz).is_err());
    }
}
