//! On-disk artifact formats.
//!
//! Matrices travel in a fixed binary layout: a 16-byte header of two
//! little-endian u64 values (rows, then columns) followed by the entries as
//! little-endian f64 in column-major order. Defect tensors pair a JSON
//! manifest (parameters, grid, scheme, slice file names) with one matrix
//! file per parameter. CSV tables start with a `# config_sha256=...`
//! comment naming the configuration that produced them, then a header row.
//! Every writer goes through a temp-file-and-rename so that a failing run
//! never leaves a partially written artifact behind.

use crate::closure::DefectTensor;
use crate::error::{Error, Result};
use crate::models::TimeGrid;
use crate::timestepping::ImexScheme;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Write `bytes` to `path` atomically: the data lands under a temporary
/// name in the same directory and is renamed into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Serialize a matrix into the binary layout.
pub fn matrix_bytes(m: &DMatrix<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * m.len());
    out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for v in m.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    write_atomic(path, &matrix_bytes(m))
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let bytes =
        fs::read(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if bytes.len() < 16 {
        return Err(Error::Format(format!(
            "{}: shorter than the 16-byte matrix header",
            path.display()
        )));
    }
    let nrows = u64::from_le_bytes(bytes[0..8].try_into().unwrap()) as usize;
    let ncols = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let expected = 16 + 8usize
        .checked_mul(nrows.saturating_mul(ncols))
        .ok_or_else(|| Error::Format(format!("{}: dimensions overflow", path.display())))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "{}: {} x {} matrix needs {} bytes, file has {}",
            path.display(),
            nrows,
            ncols,
            expected,
            bytes.len()
        )));
    }
    let mut m = DMatrix::zeros(nrows, ncols);
    for (i, v) in m.iter_mut().enumerate() {
        let at = 16 + 8 * i;
        *v = f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    }
    Ok(m)
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorManifest {
    params: Vec<Vec<f64>>,
    grid: TimeGrid,
    scheme: ImexScheme,
    slices: Vec<String>,
}

/// Persist a defect tensor as `manifest.json` plus one matrix file per
/// parameter inside `dir`.
pub fn write_defect_tensor(dir: &Path, tensor: &DefectTensor) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut names = Vec::with_capacity(tensor.slices.len());
    for (i, slice) in tensor.slices.iter().enumerate() {
        let name = format!("slice_{i:04}.bin");
        write_matrix(&dir.join(&name), slice)?;
        names.push(name);
    }
    let manifest = TensorManifest {
        params: tensor.params.clone(),
        grid: tensor.grid,
        scheme: tensor.scheme,
        slices: names,
    };
    write_json(&dir.join("manifest.json"), &manifest)
}

pub fn read_defect_tensor(dir: &Path) -> Result<DefectTensor> {
    let manifest: TensorManifest = read_json(&dir.join("manifest.json"))?;
    if manifest.slices.len() != manifest.params.len() {
        return Err(Error::Format(format!(
            "{}: manifest lists {} slices for {} parameters",
            dir.display(),
            manifest.slices.len(),
            manifest.params.len()
        )));
    }
    let mut slices = Vec::with_capacity(manifest.slices.len());
    for name in &manifest.slices {
        slices.push(read_matrix(&dir.join(name))?);
    }
    let tensor = DefectTensor {
        slices,
        params: manifest.params,
        grid: manifest.grid,
        scheme: manifest.scheme,
    };
    tensor.validate()?;
    Ok(tensor)
}

/// Write any serializable value as pretty JSON.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Format(format!("JSON encoding failed: {e}")))?;
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Shortest decimal that round-trips; integers and specials stay readable.
pub fn format_float(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v:e}")
    }
}

/// Write a CSV table: a comment line carrying the config hash, a header
/// row, then the data rows.
pub fn write_csv(path: &Path, config_hash: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut text = String::new();
    text.push_str(&format!("# config_sha256={config_hash}\n"));
    text.push_str(&header.join(","));
    text.push('\n');
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::Format(format!(
                "CSV row with {} fields under a {}-column header",
                row.len(),
                header.len()
            )));
        }
        text.push_str(&row.join(","));
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}
