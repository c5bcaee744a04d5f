//! Binary model and data files with JSON sidecar headers.
//!
//! Model: little-endian `f64` squared slowness, z fastest; header
//! `{nz, nx, h, units}` in `<stem>.json`.
//!
//! Data: little-endian interleaved `re, im` `f64` pairs ordered by frequency,
//! then source, then receiver (receiver fastest); header
//! `{n_recv, n_src, omegas}` in `<stem>.json`.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{FrequencyData, GridModel2D};
use crate::error::{invalid, Result};

pub const MODEL_UNITS: &str = "s2/m2";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelHeader {
    pub nz: usize,
    pub nx: usize,
    pub h: f64,
    pub units: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataHeader {
    pub n_recv: usize,
    pub n_src: usize,
    pub omegas: Vec<f64>,
}

pub fn header_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn f64s_to_bytes(values: impl Iterator<Item = f64>) -> Vec<u8> {
    values.flat_map(|v| v.to_le_bytes()).collect()
}

fn bytes_to_f64s(bytes: &[u8], path: &Path) -> Result<Vec<f64>> {
    if !bytes.len().is_multiple_of(8) {
        return invalid(format!("{} is not a whole number of f64 values", path.display()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn write_model(path: &Path, model: &GridModel2D) -> Result<()> {
    let header = ModelHeader {
        nz: model.nz(),
        nx: model.nx(),
        h: model.h(),
        units: MODEL_UNITS.to_string(),
    };
    fs::write(path, f64s_to_bytes(model.values().iter().copied()))?;
    fs::write(header_path(path), serde_json::to_string_pretty(&header)?)?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<GridModel2D> {
    let header: ModelHeader = serde_json::from_str(&fs::read_to_string(header_path(path))?)?;
    if header.units != MODEL_UNITS {
        return invalid(format!("model units `{}` are not {MODEL_UNITS}", header.units));
    }
    let values = bytes_to_f64s(&fs::read(path)?, path)?;
    if values.len() != header.nz * header.nx {
        return invalid(format!(
            "{} holds {} values, header says {}x{}",
            path.display(),
            values.len(),
            header.nz,
            header.nx
        ));
    }
    GridModel2D::new(header.nz, header.nx, header.h, values)
}

pub fn write_data(path: &Path, data: &FrequencyData) -> Result<()> {
    let header = DataHeader {
        n_recv: data.n_recv(),
        n_src: data.n_src(),
        omegas: data.omegas().to_vec(),
    };
    let values = (0..data.n_freq())
        .flat_map(|k| data.matrix(k).iter().flat_map(|z| [z.re, z.im]))
        .collect::<Vec<f64>>();
    fs::write(path, f64s_to_bytes(values.into_iter()))?;
    fs::write(header_path(path), serde_json::to_string_pretty(&header)?)?;
    Ok(())
}

pub fn read_data(path: &Path) -> Result<FrequencyData> {
    let header: DataHeader = serde_json::from_str(&fs::read_to_string(header_path(path))?)?;
    let values = bytes_to_f64s(&fs::read(path)?, path)?;
    let per = header.n_recv * header.n_src;
    if values.len() != 2 * per * header.omegas.len() {
        return invalid(format!(
            "{} holds {} values, header implies {}",
            path.display(),
            values.len(),
            2 * per * header.omegas.len()
        ));
    }
    let matrices = values
        .chunks_exact(2 * per.max(1))
        .take(header.omegas.len())
        .map(|chunk| chunk.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect())
        .collect();
    FrequencyData::new(header.n_recv, header.n_src, header.omegas, matrices)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_and_data_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m: Vec<f64> = (0..80).map(|i| 1e-7 + i as f64 * 1e-9).collect();
        let model = GridModel2D::new(8, 10, 12.5, m).unwrap();
        let mp = dir.path().join("model.bin");
        write_model(&mp, &model).unwrap();
        assert_eq!(fs::metadata(&mp).unwrap().len(), 80 * 8);
        assert_eq!(read_model(&mp).unwrap(), model);

        let vals = (0..2)
            .map(|k| (0..6).map(|i| Complex64::new(i as f64 + k as f64, -(i as f64))).collect())
            .collect();
        let data = FrequencyData::new(3, 2, vec![10.0, 20.0], vals).unwrap();
        let dp = dir.path().join("data.bin");
        write_data(&dp, &data).unwrap();
        let bytes = fs::read(&dp).unwrap();
        assert_eq!(bytes.len(), 2 * 6 * 2 * 8);
        // second f64 is the imaginary part of (recv 0, src 0, freq 0)
        assert_eq!(f64::from_le_bytes(bytes[8..16].try_into().unwrap()), -0.0);
        assert_eq!(read_data(&dp).unwrap(), data);
    }

    #[test]
    fn truncated_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let model = GridModel2D::constant(8, 8, 1.0, 1.0).unwrap();
        let mp = dir.path().join("m.bin");
        write_model(&mp, &model).unwrap();
        fs::write(&mp, vec![0u8; 63 * 8]).unwrap();
        assert!(read_model(&mp).is_err());
        fs::write(&mp, vec![0u8; 5]).unwrap();
        assert!(read_model(&mp).is_err());
    }
}
