//! Self-describing tensor files.
//!
//! Layout (all multi-byte integers little-endian):
//!
//! ```text
//! offset  size      field
//! 0       4         magic "SHCT"
//! 4       1         version (1)
//! 5       1         dtype: 1 = f32, 2 = f64, 3 = i16 fixed point
//! 6       1         rank (1..=4)
//! 7       1         fixed-point bit width (0 for float)
//! 8       4*rank    extents, u32 each
//! ..      4         exponent, i32 (0 for float)
//! ..      ..        payload, row-major
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensorio::{FixedPointTensor, FloatTensor};

pub const MAGIC: &[u8; 4] = b"SHCT";
pub const VERSION: u8 = 1;

/// Element encoding of a real-valued blob.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RealDtype {
    F32,
    F64,
}

impl RealDtype {
    pub fn width(self) -> usize {
        match self {
            RealDtype::F32 => 4,
            RealDtype::F64 => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RealDtype::F32 => "f32",
            RealDtype::F64 => "f64",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "f32" => Some(RealDtype::F32),
            "f64" => Some(RealDtype::F64),
            _ => None,
        }
    }

    fn code(self) -> u8 {
        match self {
            RealDtype::F32 => 1,
            RealDtype::F64 => 2,
        }
    }
}

const FIXED_CODE: u8 = 3;

/// Narrowest lossless encoding: f32 when every value survives the round
/// trip, f64 otherwise.
pub fn real_dtype_for(values: &[f64]) -> RealDtype {
    if values.iter().all(|&v| (v as f32) as f64 == v) {
        RealDtype::F32
    } else {
        RealDtype::F64
    }
}

pub fn encode_reals(values: &[f64], dtype: RealDtype, out: &mut Vec<u8>) {
    out.reserve(values.len() * dtype.width());
    for &v in values {
        match dtype {
            RealDtype::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            RealDtype::F64 => out.extend_from_slice(&v.to_le_bytes()),
        }
    }
}

/// Decodes exactly `bytes.len() / width` values; callers check the length.
pub fn decode_reals(bytes: &[u8], dtype: RealDtype) -> Vec<f64> {
    match dtype {
        RealDtype::F32 => bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect(),
        RealDtype::F64 => bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect(),
    }
}

/// Contents of a tensor file.
#[derive(Debug, Clone, PartialEq)]
pub enum StoredTensor {
    Float(FloatTensor),
    Fixed(FixedPointTensor),
}

impl StoredTensor {
    pub fn dims(&self) -> &[usize] {
        match self {
            StoredTensor::Float(t) => t.dims(),
            StoredTensor::Fixed(t) => t.dims(),
        }
    }
}

impl From<FloatTensor> for StoredTensor {
    fn from(t: FloatTensor) -> Self {
        StoredTensor::Float(t)
    }
}

impl From<FixedPointTensor> for StoredTensor {
    fn from(t: FixedPointTensor) -> Self {
        StoredTensor::Fixed(t)
    }
}

pub fn encode_tensor(tensor: &StoredTensor) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    let (code, bits, exponent) = match tensor {
        StoredTensor::Float(t) => (real_dtype_for(t.data()).code(), 0u8, 0i32),
        StoredTensor::Fixed(t) => (FIXED_CODE, t.bits() as u8, t.exponent()),
    };
    let dims = tensor.dims();
    out.push(code);
    out.push(dims.len() as u8);
    out.push(bits);
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&exponent.to_le_bytes());
    match tensor {
        StoredTensor::Float(t) => encode_reals(t.data(), real_dtype_for(t.data()), &mut out),
        StoredTensor::Fixed(t) => {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

fn take<'a>(bytes: &'a [u8], at: &mut usize, n: usize) -> Result<&'a [u8]> {
    let end = *at + n;
    if end > bytes.len() {
        return Err(Error::MalformedHeader(format!(
            "header ends at byte {} but file has {}",
            end,
            bytes.len()
        )));
    }
    let slice = &bytes[*at..end];
    *at = end;
    Ok(slice)
}

pub fn decode_tensor(bytes: &[u8]) -> Result<StoredTensor> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    let mut at = 4;
    let fixed = take(bytes, &mut at, 4)?;
    let (version, code, rank, bits) = (fixed[0], fixed[1], fixed[2], fixed[3]);
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version as u32));
    }
    if !(1..=4).contains(&rank) {
        return Err(Error::MalformedHeader(format!("rank {rank}")));
    }
    let mut dims = Vec::with_capacity(rank as usize);
    for _ in 0..rank {
        let b = take(bytes, &mut at, 4)?;
        dims.push(u32::from_le_bytes(b.try_into().unwrap()) as usize);
    }
    let exponent = i32::from_le_bytes(take(bytes, &mut at, 4)?.try_into().unwrap());
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::MalformedHeader(format!("extents {dims:?} overflow")))?;
    let width = match code {
        1 => 4,
        2 => 8,
        FIXED_CODE => 2,
        other => return Err(Error::MalformedHeader(format!("dtype code {other}"))),
    };
    let payload = &bytes[at..];
    let expected = count
        .checked_mul(width)
        .ok_or_else(|| Error::MalformedHeader(format!("extents {dims:?} overflow")))?;
    if payload.len() < expected {
        return Err(Error::TruncatedPayload { expected, found: payload.len() });
    }
    if payload.len() > expected {
        return Err(Error::MalformedHeader(format!(
            "{} trailing bytes after payload",
            payload.len() - expected
        )));
    }
    match code {
        FIXED_CODE => {
            let data = payload
                .chunks_exact(2)
                .map(|b| i16::from_le_bytes([b[0], b[1]]))
                .collect();
            Ok(StoredTensor::Fixed(FixedPointTensor::new(dims, data, bits as u32, exponent)?))
        }
        _ => {
            if bits != 0 || exponent != 0 {
                return Err(Error::MalformedHeader(
                    "float tensor with nonzero bit width or exponent".into(),
                ));
            }
            let dtype = if code == 1 { RealDtype::F32 } else { RealDtype::F64 };
            Ok(StoredTensor::Float(FloatTensor::new(dims, decode_reals(payload, dtype))?))
        }
    }
}

pub fn save_tensor(path: impl AsRef<Path>, tensor: &StoredTensor) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_tensor(tensor)).map_err(|e| Error::io(path, e))
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<StoredTensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_tensor(&bytes)
}
