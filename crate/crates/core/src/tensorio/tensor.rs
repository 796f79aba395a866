use crate::codebook::{floor_log2, pow2};
use crate::error::{Error, Result};

/// Dense row-major real tensor of rank 1 to 4.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

fn check_dims(dims: &[usize], len: usize) -> Result<()> {
    if dims.is_empty() || dims.len() > 4 {
        return Err(Error::ShapeMismatch(format!("rank {} outside 1..=4", dims.len())));
    }
    let expected: usize = dims.iter().product();
    if expected != len {
        return Err(Error::ShapeMismatch(format!(
            "dims {dims:?} need {expected} values, got {len}"
        )));
    }
    Ok(())
}

impl FloatTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        check_dims(&dims, data.len())?;
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(FloatTensor { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let len = dims.iter().product();
        FloatTensor::new(dims, vec![0.0; len])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<FloatTensor> {
        FloatTensor::new(self.dims.clone(), self.data.iter().map(|&v| f(v)).collect())
    }
}

/// Exponents outside this range are rejected so every scaling stays in the
/// normal `f64` range.
pub const EXPONENT_RANGE: std::ops::RangeInclusive<i32> = -960..=960;

/// Integer tensor sharing one power-of-two exponent: `real = stored * 2^exponent`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedPointTensor {
    dims: Vec<usize>,
    data: Vec<i16>,
    bits: u8,
    exponent: i32,
}

pub fn check_bits(bits: u32) -> Result<()> {
    if (2..=16).contains(&bits) {
        Ok(())
    } else {
        Err(Error::InvalidBits(bits))
    }
}

fn signed_range(bits: u32) -> (i32, i32) {
    let half = 1i32 << (bits - 1);
    (-half, half - 1)
}

impl FixedPointTensor {
    pub fn new(dims: Vec<usize>, data: Vec<i16>, bits: u32, exponent: i32) -> Result<Self> {
        check_bits(bits)?;
        check_dims(&dims, data.len())?;
        let (lo, hi) = signed_range(bits);
        if let Some(&v) = data.iter().find(|&&v| (v as i32) < lo || (v as i32) > hi) {
            return Err(Error::ShapeMismatch(format!(
                "stored value {v} does not fit in {bits} signed bits"
            )));
        }
        if !EXPONENT_RANGE.contains(&exponent) {
            return Err(Error::MalformedHeader(format!("exponent {exponent} out of range")));
        }
        Ok(FixedPointTensor { dims, data, bits: bits as u8, exponent })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[i16] {
        &self.data
    }

    pub fn bits(&self) -> u32 {
        self.bits as u32
    }

    pub fn exponent(&self) -> i32 {
        self.exponent
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Converts to dynamic fixed point with a per-tensor exponent.
///
/// `e = ceil(log2(max|t|)) - (bits - 1)` and `stored = round(t / 2^e)`
/// (half away from zero), clamped to the signed range, so the largest element
/// may saturate at `+2^(bits-1) - 1`. If the largest magnitude rounds down to
/// exactly `2^(bits-2)`, the tensor would re-derive a smaller exponent from
/// its own stored values; the exponent is lowered by one in that case so the
/// conversion is stable under re-conversion.
pub fn to_fixed_point(t: &FloatTensor, bits: u32) -> Result<FixedPointTensor> {
    check_bits(bits)?;
    let max = t.max_abs();
    let top = bits as i32 - 1;
    let mut exponent = if max == 0.0 { -top } else { ceil_log2(max) - top };
    if !EXPONENT_RANGE.contains(&exponent) {
        return Err(Error::Domain(max));
    }
    let mut stored = quantize_with(t.data(), bits, exponent);
    if max > 0.0 {
        let peak = stored.iter().map(|v| (*v as i32).abs()).max().unwrap_or(0);
        if peak == 1 << (bits - 2) {
            exponent -= 1;
            stored = quantize_with(t.data(), bits, exponent);
        }
    }
    FixedPointTensor::new(t.dims().to_vec(), stored, bits, exponent)
}

fn quantize_with(values: &[f64], bits: u32, exponent: i32) -> Vec<i16> {
    let (lo, hi) = signed_range(bits);
    let step = pow2(-exponent);
    values
        .iter()
        .map(|v| (v * step).round().clamp(lo as f64, hi as f64) as i16)
        .collect()
}

/// Exact `ceil(log2(x))` for finite `x > 0`.
pub(crate) fn ceil_log2(x: f64) -> i32 {
    let floor = floor_log2(x);
    if x == pow2(floor) {
        floor
    } else {
        floor + 1
    }
}

pub fn from_fixed_point(t: &FixedPointTensor) -> FloatTensor {
    let step = pow2(t.exponent);
    let data = t.data.iter().map(|&v| v as f64 * step).collect();
    FloatTensor::new(t.dims.clone(), data).expect("fixed-point values are finite")
}
