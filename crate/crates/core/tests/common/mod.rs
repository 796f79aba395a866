//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_distr::{Distribution, Normal};
use shiftconv::codebook::{quantize_tensor, CodebookConfig, QuantizedWeightTensor};
use shiftconv::tensorio::{FixedPointTensor, FloatTensor, LayerSpec};

/// The greedy stage quantizer written out line by line in the log domain.
pub fn straight_line_quantizer(r: f64, stages: usize, bits: u32) -> Vec<i8> {
    let max_idx = ((1i32 << bits) - 1) / 2;
    let mut r = r;
    let mut out = Vec::with_capacity(stages);
    for n in 1..=stages as i32 {
        if r == 0.0 {
            out.push(0);
            continue;
        }
        let q_sgn = if r < 0.0 { -1 } else { 1 };
        let q_log = r.abs().log2();
        let mut q_idx = q_log.floor() as i32;
        let b_log = q_idx as f64 + 1.5f64.log2();
        if q_log > b_log {
            q_idx += 1;
        }
        let mut idx = -n - q_idx + 2;
        let mut q = q_sgn as f64 * 2f64.powi(q_idx);
        if idx > max_idx {
            q = 0.0;
            idx = 0;
        }
        out.push((q_sgn * idx) as i8);
        r -= q;
    }
    out
}

/// Quadruple-loop convolution, accumulation order `c`, `hf`, `wf`, bias last.
pub fn brute_force_conv(x: &[f64], w: &[f64], bias: Option<&[f64]>, s: &LayerSpec) -> Vec<f64> {
    let ho = (s.in_h + 2 * s.padding - s.kernel_h) / s.stride + 1;
    let wo = (s.in_w + 2 * s.padding - s.kernel_w) / s.stride + 1;
    let mut y = vec![0.0; s.out_channels * ho * wo];
    for co in 0..s.out_channels {
        for oh in 0..ho {
            for ow in 0..wo {
                let mut acc = 0.0;
                for c in 0..s.in_channels {
                    for hf in 0..s.kernel_h {
                        for wf in 0..s.kernel_w {
                            let ih = (oh * s.stride + hf) as isize - s.padding as isize;
                            let iw = (ow * s.stride + wf) as isize - s.padding as isize;
                            if ih < 0 || iw < 0 || ih >= s.in_h as isize || iw >= s.in_w as isize {
                                continue;
                            }
                            let xv = x[(c * s.in_h + ih as usize) * s.in_w + iw as usize];
                            let wv = w[((co * s.in_channels + c) * s.kernel_h + hf) * s.kernel_w + wf];
                            acc += xv * wv;
                        }
                    }
                }
                if let Some(b) = bias {
                    acc += b[co];
                }
                y[(co * ho + oh) * wo + ow] = acc;
            }
        }
    }
    y
}

/// A layer drawn within the engine's stated bounds, with operands.
pub struct Instance {
    pub spec: LayerSpec,
    pub x: FixedPointTensor,
    pub q: QuantizedWeightTensor,
    pub bias: Vec<f64>,
}

pub fn random_spec(rng: &mut impl Rng) -> LayerSpec {
    loop {
        let c = rng.random_range(1..=8);
        let co = rng.random_range(1..=8);
        let kh = rng.random_range(1..=5);
        let kw = rng.random_range(1..=5);
        let h = rng.random_range(1..=12);
        let w = rng.random_range(1..=12);
        let stride = rng.random_range(1..=2);
        let pad = rng.random_range(0..=1);
        if h + 2 * pad >= kh && w + 2 * pad >= kw {
            return LayerSpec::new("rand", c, co, (kh, kw), (h, w), stride, pad).unwrap();
        }
    }
}

pub fn random_fixed(dims: Vec<usize>, rng: &mut impl Rng) -> FixedPointTensor {
    let len = dims.iter().product();
    let data = (0..len).map(|_| rng.random_range(-128i16..=127)).collect();
    FixedPointTensor::new(dims, data, 8, rng.random_range(-12..=4)).unwrap()
}

pub fn random_f32_vec(len: usize, std: f64, rng: &mut impl Rng) -> Vec<f64> {
    let normal = Normal::new(0.0, std).unwrap();
    (0..len).map(|_| normal.sample(rng) as f32 as f64).collect()
}

pub fn random_instance(rng: &mut impl Rng) -> Instance {
    let spec = random_spec(rng);
    let stages = rng.random_range(1..=3);
    let config = CodebookConfig::new(stages, 4).unwrap();
    let x = random_fixed(spec.input_dims().to_vec(), rng);
    let mut w = random_f32_vec(spec.weight_count(), 0.3, rng);
    // occasional zero taps and whole-zero filters
    for v in w.iter_mut() {
        if rng.random_bool(0.1) {
            *v = 0.0;
        }
    }
    if rng.random_bool(0.02) {
        w.iter_mut().for_each(|v| *v = 0.0);
    }
    let q = quantize_tensor(&FloatTensor::new(spec.weight_dims().to_vec(), w).unwrap(), config).unwrap();
    let bias = random_f32_vec(spec.out_channels, 0.1, rng);
    Instance { spec, x, q, bias }
}

pub fn bits_equal(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Random chained model: 1 to 3 layers, extents up to 8, a mix of float and
/// index-form layers, biases present or absent, f32- and f64-valued reals.
pub fn random_model(rng: &mut impl Rng) -> shiftconv::tensorio::Model {
    use shiftconv::tensorio::{Layer, LayerWeights, Model};
    let config = rng
        .random_bool(0.7)
        .then(|| CodebookConfig::new(rng.random_range(1..=3), rng.random_range(2..=4)).unwrap());
    let wide_reals = rng.random_bool(0.3);
    let real = |rng: &mut dyn rand::RngCore| {
        let v: f64 = rng.random_range(-2.0..2.0);
        if wide_reals { v } else { v as f32 as f64 }
    };
    let (mut c, mut h, mut w) = (rng.random_range(1..=8), rng.random_range(1..=8), rng.random_range(1..=8));
    let mut layers = Vec::new();
    for i in 0..rng.random_range(1..=3) {
        let spec = loop {
            let kh = rng.random_range(1..=3usize);
            let kw = rng.random_range(1..=3usize);
            let pad = rng.random_range(0..=1usize);
            let stride = rng.random_range(1..=2usize);
            if h + 2 * pad >= kh && w + 2 * pad >= kw {
                let s = LayerSpec::new(format!("l{i}"), c, rng.random_range(1..=8), (kh, kw), (h, w), stride, pad).unwrap();
                break if rng.random_bool(0.3) { s.without_bias() } else { s };
            }
        };
        let count = spec.weight_count();
        let weights = match config {
            Some(cfg) if rng.random_bool(0.8) => {
                let max = cfg.max_index();
                let idx = (0..count * cfg.stages()).map(|_| rng.random_range(-max..=max) as i8).collect();
                let scale = if rng.random_bool(0.05) { 0.0 } else { real(rng).abs() };
                LayerWeights::Quantized(QuantizedWeightTensor::from_parts(spec.weight_dims().to_vec(), idx, scale, cfg).unwrap())
            }
            _ => {
                let data = (0..count).map(|_| real(rng)).collect();
                LayerWeights::Float(FloatTensor::new(spec.weight_dims().to_vec(), data).unwrap())
            }
        };
        let bias = spec.has_bias.then(|| (0..spec.out_channels).map(|_| real(rng)).collect());
        [c, h, w] = spec.output_dims();
        layers.push(Layer { spec, weights, bias });
    }
    Model::new(config, layers).unwrap()
}

/// Random float or fixed-point tensor of rank 1 to 4.
pub fn random_stored_tensor(rng: &mut impl Rng) -> shiftconv::tensorio::StoredTensor {
    let rank = rng.random_range(1..=4);
    let dims: Vec<usize> = (0..rank).map(|_| rng.random_range(1..=6)).collect();
    let len: usize = dims.iter().product();
    if rng.random_bool(0.5) {
        let wide = rng.random_bool(0.5);
        let data = (0..len)
            .map(|_| {
                let v: f64 = rng.random_range(-1e3..1e3);
                if wide { v } else { v as f32 as f64 }
            })
            .collect();
        FloatTensor::new(dims, data).unwrap().into()
    } else {
        let bits = rng.random_range(2..=16u32);
        let lim = 1i32 << (bits - 1);
        let data = (0..len).map(|_| rng.random_range(-lim..lim) as i16).collect();
        FixedPointTensor::new(dims, data, bits, rng.random_range(-40..=40)).unwrap().into()
    }
}
