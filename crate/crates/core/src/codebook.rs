//! Power-of-two codebooks and the greedy multi-stage weight quantizer.
//!
//! A weight normalized to `[-1, 1]` is approximated by a sum of `N` codewords,
//! one per stage. Stage `n` (1-based) draws from
//! `{0} ∪ {±2^(2-n-k) : k = 1..=max_index}`, so every stage is a shifted copy
//! of the first and the union of all stages holds `P = M + 2(N-1)` distinct
//! values. Each stage choice is stored as a signed index: `0` selects the zero
//! codeword, `±k` selects `±2^(2-n-k)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensorio::FloatTensor;

/// Largest supported index bit width. Indices are serialized as one signed
/// byte each.
pub const MAX_BITS: u32 = 8;

/// Stage count `N` and index bit width `B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawConfig", into = "RawConfig")]
pub struct CodebookConfig {
    stages: u8,
    bits: u8,
}

#[derive(Serialize, Deserialize)]
struct RawConfig {
    stages: u32,
    bits: u32,
}

impl TryFrom<RawConfig> for CodebookConfig {
    type Error = Error;

    fn try_from(raw: RawConfig) -> Result<Self> {
        CodebookConfig::new(raw.stages, raw.bits)
    }
}

impl From<CodebookConfig> for RawConfig {
    fn from(c: CodebookConfig) -> Self {
        RawConfig { stages: c.stages as u32, bits: c.bits as u32 }
    }
}

impl CodebookConfig {
    pub fn new(stages: u32, bits: u32) -> Result<Self> {
        if stages < 1 || stages > u8::MAX as u32 {
            return Err(Error::InvalidConfig(format!(
                "stage count {stages} outside 1..=255"
            )));
        }
        if bits < 2 {
            return Err(Error::InvalidConfig(format!(
                "unsupported bit-width {bits} (binary codebooks without zero are not supported; need B >= 2)"
            )));
        }
        if bits > MAX_BITS {
            return Err(Error::InvalidConfig(format!(
                "unsupported bit-width {bits} (max {MAX_BITS})"
            )));
        }
        Ok(CodebookConfig { stages: stages as u8, bits: bits as u8 })
    }

    /// `N`.
    pub fn stages(&self) -> usize {
        self.stages as usize
    }

    /// `B`.
    pub fn bits(&self) -> u32 {
        self.bits as u32
    }

    /// Codewords per stage, `M = 2^B - 1`.
    pub fn size(&self) -> usize {
        (1usize << self.bits) - 1
    }

    /// `floor(M / 2)`: the largest index magnitude.
    pub fn max_index(&self) -> i32 {
        (self.size() / 2) as i32
    }

    /// Distinct values over all stages including zero, `P = M + 2(N - 1)`.
    pub fn combinations(&self) -> usize {
        self.size() + 2 * (self.stages() - 1)
    }

    /// Shift-by-one steps needed to produce every union codeword from the
    /// largest one, `floor(P/2) - 1`. Equals `-min_exponent()`.
    pub fn max_shift(&self) -> u32 {
        (self.combinations() / 2 - 1) as u32
    }

    /// Exponent of the smallest nonzero codeword over all stages.
    pub fn min_exponent(&self) -> i32 {
        2 - self.stages as i32 - self.max_index()
    }

    /// Exponent magnitude `k` of the codeword `±2^-k` selected by `index` at
    /// `stage`, or `None` for the zero codeword.
    pub fn shift_of(&self, stage: usize, index: i32) -> Option<u32> {
        if index == 0 {
            None
        } else {
            Some((stage as i32 + index.abs() - 2) as u32)
        }
    }

    pub fn check_index(&self, stage: usize, index: i32) -> Result<()> {
        let max = self.max_index();
        if index.abs() > max {
            Err(Error::IndexOutOfRange { stage, index, max })
        } else {
            Ok(())
        }
    }
}

/// Exact `2^e` for exponents in the normal `f64` range.
pub(crate) fn pow2(e: i32) -> f64 {
    debug_assert!((-1022..=1023).contains(&e));
    f64::from_bits(((e + 1023) as u64) << 52)
}

/// Exact `floor(log2(x))` for finite `x > 0`, subnormals included.
pub(crate) fn floor_log2(x: f64) -> i32 {
    debug_assert!(x > 0.0 && x.is_finite());
    let biased = ((x.to_bits() >> 52) & 0x7ff) as i32;
    if biased == 0 {
        floor_log2(x * pow2(64)) - 64
    } else {
        biased - 1023
    }
}

/// Codeword value of `index` at 1-based `stage`.
pub fn decode(stage: usize, index: i32) -> f64 {
    if index == 0 {
        return 0.0;
    }
    let magnitude = pow2(2 - stage as i32 - index.abs());
    if index < 0 {
        -magnitude
    } else {
        magnitude
    }
}

/// Materialized codeword values.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    config: CodebookConfig,
    stages: Vec<Vec<f64>>,
    union: Vec<f64>,
}

impl Codebook {
    pub fn config(&self) -> CodebookConfig {
        self.config
    }

    /// Values of 1-based `stage`, ordered by index from `-max_index` to
    /// `+max_index`.
    pub fn stage(&self, stage: usize) -> &[f64] {
        &self.stages[stage - 1]
    }

    /// All distinct values over every stage (zero included), ascending.
    pub fn union(&self) -> &[f64] {
        &self.union
    }
}

pub fn build_codebook(config: CodebookConfig) -> Codebook {
    let max = config.max_index();
    let stages: Vec<Vec<f64>> = (1..=config.stages())
        .map(|n| (-max..=max).map(|idx| decode(n, idx)).collect())
        .collect();
    let mut union: Vec<f64> = stages.iter().flatten().copied().collect();
    union.sort_by(f64::total_cmp);
    // -0.0 never occurs; every zero codeword is +0.0
    union.dedup();
    Codebook { config, stages, union }
}

/// One stage of the quantizer: picks the stage-`stage` codeword for `r`.
///
/// Returns `(index, codeword)`. Magnitudes below the stage range clip to the
/// zero codeword. Fails if `r` lies above the largest codeword's rounding
/// range, which the greedy chain never produces for `|r| <= 1`.
pub fn quantize_stage(r: f64, stage: usize, config: CodebookConfig) -> Result<(i8, f64)> {
    if !r.is_finite() {
        return Err(Error::Domain(r));
    }
    if r == 0.0 {
        return Ok((0, 0.0));
    }
    let max = config.max_index();
    let magnitude = r.abs();
    let mut exp = floor_log2(magnitude);
    let offset = 2 - stage as i32;
    // the rounding bump lowers the index by at most one
    if offset - exp - 1 > max {
        return Ok((0, 0.0));
    }
    // log2|r| > floor + log2(1.5)  <=>  |r| > 1.5 * 2^floor
    if magnitude > 1.5 * pow2(exp) {
        exp += 1;
    }
    let index = offset - exp;
    if index > max {
        return Ok((0, 0.0));
    }
    if index < 1 {
        return Err(Error::Domain(r));
    }
    let q = pow2(exp);
    if r < 0.0 {
        Ok((-(index as i8), -q))
    } else {
        Ok((index as i8, q))
    }
}

/// Quantizes normalized `r` into `indices` (length `N`) and returns the
/// reconstructed value.
pub fn quantize_into(r: f64, config: CodebookConfig, indices: &mut [i8]) -> Result<f64> {
    debug_assert_eq!(indices.len(), config.stages());
    if !r.is_finite() || r.abs() > 1.0 {
        return Err(Error::Domain(r));
    }
    let mut residual = r;
    let mut value = 0.0;
    for (n, slot) in indices.iter_mut().enumerate() {
        if residual == 0.0 {
            *slot = 0;
            continue;
        }
        let (idx, q) = quantize_stage(residual, n + 1, config)?;
        *slot = idx;
        residual -= q;
        value += q;
    }
    Ok(value)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarQuantization {
    pub indices: Vec<i8>,
    pub value: f64,
}

pub fn quantize_scalar(r: f64, config: CodebookConfig) -> Result<ScalarQuantization> {
    let mut indices = vec![0i8; config.stages()];
    let value = quantize_into(r, config, &mut indices)?;
    Ok(ScalarQuantization { indices, value })
}

/// Sum of the codewords selected by `indices`, stage by stage.
pub fn reconstruct(indices: &[i8]) -> f64 {
    indices
        .iter()
        .enumerate()
        .map(|(n, &idx)| decode(n + 1, idx as i32))
        .sum()
}

/// A weight tensor in index form.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedWeightTensor {
    dims: Vec<usize>,
    /// Weight-major, stage-minor: `indices[i * N + n]`.
    indices: Vec<i8>,
    scale: f64,
    config: CodebookConfig,
}

impl QuantizedWeightTensor {
    pub fn from_parts(
        dims: Vec<usize>,
        indices: Vec<i8>,
        scale: f64,
        config: CodebookConfig,
    ) -> Result<Self> {
        let count: usize = dims.iter().product();
        if dims.is_empty() || dims.len() > 4 {
            return Err(Error::ShapeMismatch(format!("weight rank {} outside 1..=4", dims.len())));
        }
        if indices.len() != count * config.stages() {
            return Err(Error::ShapeMismatch(format!(
                "{} indices for {} weights x {} stages",
                indices.len(),
                count,
                config.stages()
            )));
        }
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::ShapeMismatch(format!("invalid weight scale {scale}")));
        }
        for (i, &idx) in indices.iter().enumerate() {
            config.check_index(i % config.stages() + 1, idx as i32)?;
        }
        Ok(QuantizedWeightTensor { dims, indices, scale, config })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn indices(&self) -> &[i8] {
        &self.indices
    }

    /// Indices of weight `i`, one per stage.
    pub fn weight_indices(&self, i: usize) -> &[i8] {
        let n = self.config.stages();
        &self.indices[i * n..(i + 1) * n]
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn config(&self) -> CodebookConfig {
        self.config
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn quantize_tensor(w: &FloatTensor, config: CodebookConfig) -> Result<QuantizedWeightTensor> {
    if w.is_empty() {
        return Err(Error::EmptyTensor);
    }
    let n = config.stages();
    let scale = w.max_abs();
    let mut indices = vec![0i8; w.len() * n];
    if scale > 0.0 {
        for (value, slot) in w.data().iter().zip(indices.chunks_exact_mut(n)) {
            quantize_into(value / scale, config, slot)?;
        }
    }
    QuantizedWeightTensor::from_parts(w.dims().to_vec(), indices, scale, config)
}

pub fn dequantize_tensor(q: &QuantizedWeightTensor) -> FloatTensor {
    let data = q
        .indices
        .chunks_exact(q.config.stages())
        .map(|idx| q.scale * reconstruct(idx))
        .collect();
    FloatTensor::new(q.dims.clone(), data).expect("dequantized weights are finite")
}

/// Mean squared error between normalized weights and their reconstruction.
pub fn empirical_distortion(w: &FloatTensor, config: CodebookConfig) -> Result<f64> {
    if w.is_empty() {
        return Err(Error::EmptyTensor);
    }
    let scale = w.max_abs();
    if scale == 0.0 {
        return Ok(0.0);
    }
    let mut indices = vec![0i8; config.stages()];
    let mut total = 0.0;
    for value in w.data() {
        let r = value / scale;
        let approx = quantize_into(r, config, &mut indices)?;
        total += (r - approx) * (r - approx);
    }
    Ok(total / w.len() as f64)
}
