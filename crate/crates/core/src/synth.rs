//! Seeded synthetic models and inputs for comparisons and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::tensorio::{FloatTensor, Layer, LayerSpec, LayerWeights, Model};

/// Geometry of one synthetic layer; the input extents follow from the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

/// Three conv layers over a `3x16x16` input.
pub const DEMO_INPUT: [usize; 3] = [3, 16, 16];
pub const DEMO_LAYERS: [LayerShape; 3] = [
    LayerShape { out_channels: 8, kernel: 3, stride: 1, padding: 1 },
    LayerShape { out_channels: 8, kernel: 3, stride: 2, padding: 1 },
    LayerShape { out_channels: 4, kernel: 1, stride: 1, padding: 0 },
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gaussian sample rounded to `f32` precision, so tensors store compactly and
/// scales keep at most 24 significant bits.
fn gaussian(rng: &mut impl Rng, std: f64) -> f64 {
    let normal = Normal::new(0.0, std).expect("valid std");
    normal.sample(rng) as f32 as f64
}

/// Float model with He-scaled Gaussian weights and small Gaussian biases.
pub fn random_float_model(input: [usize; 3], shapes: &[LayerShape], rng: &mut impl Rng) -> Result<Model> {
    let [mut c, mut h, mut w] = input;
    let mut layers = Vec::with_capacity(shapes.len());
    for (i, s) in shapes.iter().enumerate() {
        let spec = LayerSpec::new(format!("conv{}", i + 1), c, s.out_channels, (s.kernel, s.kernel), (h, w), s.stride, s.padding)?;
        let fan_in = (c * s.kernel * s.kernel) as f64;
        let std = (2.0 / fan_in).sqrt();
        let weights = (0..spec.weight_count()).map(|_| gaussian(rng, std)).collect();
        let bias = (0..s.out_channels).map(|_| gaussian(rng, 0.05)).collect();
        [c, h, w] = spec.output_dims();
        layers.push(Layer {
            weights: LayerWeights::Float(FloatTensor::new(spec.weight_dims().to_vec(), weights)?),
            bias: Some(bias),
            spec,
        });
    }
    Model::new(None, layers)
}

/// Uniform input in `[-1, 1)` at `f32` precision.
pub fn random_input(dims: [usize; 3], rng: &mut impl Rng) -> FloatTensor {
    let len = dims.iter().product();
    let data = (0..len).map(|_| rng.random_range(-1.0f32..1.0) as f64).collect();
    FloatTensor::new(dims.to_vec(), data).expect("finite samples")
}
