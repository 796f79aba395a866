use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometry of one convolution layer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    /// `C`
    pub in_channels: usize,
    /// `C̃`
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub stride: usize,
    /// Symmetric zero padding.
    pub padding: usize,
    pub has_bias: bool,
}

impl LayerSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        input: (usize, usize),
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        let spec = LayerSpec {
            name: name.into(),
            in_channels,
            out_channels,
            kernel_h: kernel.0,
            kernel_w: kernel.1,
            in_h: input.0,
            in_w: input.1,
            stride,
            padding,
            has_bias: true,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn without_bias(mut self) -> Self {
        self.has_bias = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let extents = [
            ("in_channels", self.in_channels),
            ("out_channels", self.out_channels),
            ("kernel_h", self.kernel_h),
            ("kernel_w", self.kernel_w),
            ("in_h", self.in_h),
            ("in_w", self.in_w),
            ("stride", self.stride),
        ];
        if let Some((field, _)) = extents.iter().find(|(_, v)| *v == 0) {
            return Err(Error::ShapeMismatch(format!("layer {}: {field} must be >= 1", self.name)));
        }
        if self.in_h + 2 * self.padding < self.kernel_h || self.in_w + 2 * self.padding < self.kernel_w {
            return Err(Error::ShapeMismatch(format!(
                "layer {}: {}x{} kernel larger than padded {}x{} input",
                self.name,
                self.kernel_h,
                self.kernel_w,
                self.in_h + 2 * self.padding,
                self.in_w + 2 * self.padding
            )));
        }
        Ok(())
    }

    /// `H̃ = floor((H + 2p - Hf) / stride) + 1`
    pub fn out_h(&self) -> usize {
        (self.in_h + 2 * self.padding - self.kernel_h) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.in_w + 2 * self.padding - self.kernel_w) / self.stride + 1
    }

    pub fn input_dims(&self) -> [usize; 3] {
        [self.in_channels, self.in_h, self.in_w]
    }

    pub fn output_dims(&self) -> [usize; 3] {
        [self.out_channels, self.out_h(), self.out_w()]
    }

    pub fn weight_dims(&self) -> [usize; 4] {
        [self.out_channels, self.in_channels, self.kernel_h, self.kernel_w]
    }

    pub fn weight_count(&self) -> usize {
        self.weight_dims().iter().product()
    }
}
