use crate::codebook::CodebookConfig;
use crate::engine::OpCounts;
use crate::error::{Error, Result};

/// Largest shift count the 32-bit buffer can hold for 8-bit inputs.
pub const MAX_ENGINE_SHIFT: u32 = 23;

/// Products of one input column with every nonzero union codeword.
///
/// Row `k` (for `k` in `0..=K`) holds `x_c * 2^(K-k)`, the codeword `+2^-k`
/// scaled by `2^K`; row `K + 1 + k` holds its negation. The buffer's values
/// carry exponent `e_in - K`, so no low bits are ever shifted out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrecomputeBuffer {
    channels: usize,
    max_shift: u32,
    entries: Vec<i32>,
}

impl PrecomputeBuffer {
    pub fn new(channels: usize, config: CodebookConfig) -> Result<Self> {
        let max_shift = config.max_shift();
        if max_shift > MAX_ENGINE_SHIFT {
            return Err(Error::InvalidConfig(format!(
                "codebook needs {max_shift} shift steps; the engine supports at most {MAX_ENGINE_SHIFT}"
            )));
        }
        let rows = 2 * (max_shift as usize + 1);
        Ok(PrecomputeBuffer { channels, max_shift, entries: vec![0; rows * channels] })
    }

    /// `P - 1`.
    pub fn rows(&self) -> usize {
        2 * (self.max_shift as usize + 1)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `K`.
    pub fn max_shift(&self) -> u32 {
        self.max_shift
    }

    pub fn row(&self, row: usize) -> &[i32] {
        &self.entries[row * self.channels..(row + 1) * self.channels]
    }

    /// Row holding the codeword `±2^-shift`.
    pub fn row_for(&self, shift: u32, negative: bool) -> usize {
        debug_assert!(shift <= self.max_shift);
        if negative {
            (self.max_shift + 1 + shift) as usize
        } else {
            shift as usize
        }
    }

    /// Exponent of the stored integers given the input exponent.
    pub fn exponent(&self, input_exponent: i32) -> i32 {
        input_exponent - self.max_shift as i32
    }

    pub fn fits_i16(&self) -> bool {
        self.entries.iter().all(|&v| i16::try_from(v).is_ok())
    }

    /// Refills the buffer from one input column using only shift-by-one and
    /// sign-flip operations.
    pub fn fill(&mut self, column: impl Iterator<Item = i32>, counts: &mut OpCounts) -> Result<()> {
        let k = self.max_shift as usize;
        let c_len = self.channels;
        let mut filled = 0;
        for (c, x) in column.enumerate().take(c_len) {
            if !(i8::MIN as i32..=i8::MAX as i32).contains(&x) {
                return Err(Error::InputWidthExceeded(x));
            }
            // pass-through lands in the smallest-codeword row
            let mut v = x;
            self.entries[k * c_len + c] = v;
            for row in (0..k).rev() {
                v <<= 1;
                self.entries[row * c_len + c] = v;
            }
            counts.shifts += k as u64;
            for row in 0..=k {
                self.entries[(k + 1 + row) * c_len + c] = -self.entries[row * c_len + c];
            }
            counts.sign_flips += k as u64 + 1;
            filled += 1;
        }
        if filled != c_len {
            return Err(Error::ShapeMismatch(format!("column has {filled} values, expected {c_len}")));
        }
        counts.buffers_built += 1;
        Ok(())
    }
}

pub fn precompute_terms(x: &[i32], config: CodebookConfig, counts: &mut OpCounts) -> Result<PrecomputeBuffer> {
    let mut buffer = PrecomputeBuffer::new(x.len(), config)?;
    buffer.fill(x.iter().copied(), counts)?;
    Ok(buffer)
}
