use super::{PropagatorConfig, QuantumError, SpaceTimeField, SpatialGrid, C64};
use crate::model::FamilySpec;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

/// Sidecar metadata stored next to a binary field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMetadata {
    pub t0: f64,
    pub t1: f64,
    pub n_t: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
    #[serde(rename = "N")]
    pub n_points: usize,
    pub field_spec: Option<FamilySpec>,
    pub config: Option<PropagatorConfig>,
}

/// `<path>.json`
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes little-endian interleaved `(re, im)` doubles, `t` outer and `x` inner, plus the JSON sidecar.
pub fn write_field(
    path: &Path,
    field: &SpaceTimeField,
    field_spec: Option<&FamilySpec>,
    config: Option<&PropagatorConfig>,
) -> Result<(), QuantumError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for v in field.values.iter() {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    w.flush()?;
    let meta = FieldMetadata {
        t0: field.t0,
        t1: field.t1,
        n_t: field.n_t(),
        half_width: field.grid.half_width,
        n_points: field.grid.n_points,
        field_spec: field_spec.cloned(),
        config: config.copied(),
    };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<(SpaceTimeField, FieldMetadata), QuantumError> {
    let meta: FieldMetadata = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    let grid = SpatialGrid::new(meta.half_width, meta.n_points)?;
    let bytes = fs::read(path)?;
    let expected = meta.n_t * meta.n_points * 16;
    if bytes.len() != expected {
        return Err(QuantumError::InvalidParameter(format!(
            "field file holds {} bytes, metadata implies {expected}",
            bytes.len()
        )));
    }
    let word = |i: usize| f64::from_le_bytes(bytes[8 * i..8 * i + 8].try_into().expect("8-byte slice"));
    let data: Vec<C64> = (0..meta.n_t * meta.n_points).map(|i| C64::new(word(2 * i), word(2 * i + 1))).collect();
    let values = Array2::from_shape_vec((meta.n_t, meta.n_points), data)
        .map_err(|e| QuantumError::InvalidParameter(e.to_string()))?;
    Ok((SpaceTimeField { t0: meta.t0, t1: meta.t1, grid, values }, meta))
}
