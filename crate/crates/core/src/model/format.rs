//! Binary model file: `IMPM`, then u32 LE version, n_obs, n_hidden, then
//! W1, b1, W2, b2 as little-endian f64 in row-major order.

use std::fs;
use std::path::Path;

use super::ImplicationModel;
use crate::error::{Error, Result};

pub const MODEL_MAGIC: [u8; 4] = *b"IMPM";
pub const MODEL_VERSION: u32 = 1;

const HEADER_LEN: usize = 16;

pub fn write_model(model: &ImplicationModel) -> Vec<u8> {
    let n_floats = model.w1.len() + model.b1.len() + model.w2.len() + model.b2.len();
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * n_floats);
    buf.extend_from_slice(&MODEL_MAGIC);
    buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    buf.extend_from_slice(&(model.n_obs() as u32).to_le_bytes());
    buf.extend_from_slice(&(model.n_hidden() as u32).to_le_bytes());
    for part in [&model.w1, &model.b1, &model.w2, &model.b2] {
        for w in part.iter() {
            buf.extend_from_slice(&w.to_le_bytes());
        }
    }
    buf
}

fn u32_at(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap())
}

pub fn read_model(bytes: &[u8]) -> Result<ImplicationModel> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::ModelFormat(format!(
            "truncated header: {} bytes, need {HEADER_LEN}",
            bytes.len()
        )));
    }
    if bytes[..4] != MODEL_MAGIC {
        return Err(Error::ModelFormat(format!(
            "bad magic {:?}, expected \"IMPM\"",
            String::from_utf8_lossy(&bytes[..4])
        )));
    }
    let version = u32_at(bytes, 4);
    if version != MODEL_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported version {version}, expected {MODEL_VERSION}"
        )));
    }
    let n_obs = u32_at(bytes, 8) as usize;
    let n_hidden = u32_at(bytes, 12) as usize;
    let overflow = || Error::ModelFormat(format!("dimension overflow (n_obs={n_obs}, n_hidden={n_hidden})"));
    let n_in = n_obs.checked_mul(2).ok_or_else(overflow)?;
    let matrix = n_in.checked_mul(n_hidden).ok_or_else(overflow)?;
    let n_floats = matrix
        .checked_mul(2)
        .and_then(|x| x.checked_add(n_hidden))
        .and_then(|x| x.checked_add(n_in))
        .ok_or_else(overflow)?;
    let body = n_floats.checked_mul(8).ok_or_else(overflow)?;
    let expected = HEADER_LEN.checked_add(body).ok_or_else(overflow)?;
    if bytes.len() != expected {
        return Err(Error::ModelFormat(format!(
            "expected {expected} bytes for n_obs={n_obs}, n_hidden={n_hidden}, found {}",
            bytes.len()
        )));
    }
    let mut floats = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut take = |n: usize| -> Vec<f64> { floats.by_ref().take(n).collect() };
    let w1 = take(matrix);
    let b1 = take(n_hidden);
    let w2 = take(matrix);
    let b2 = take(n_in);
    ImplicationModel::from_parts(n_obs, n_hidden, w1, b1, w2, b2)
        .map_err(|e| Error::ModelFormat(e.to_string()))
}

pub fn save_model(model: &ImplicationModel, path: &Path) -> Result<()> {
    fs::write(path, write_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<ImplicationModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_model(&bytes)
}
