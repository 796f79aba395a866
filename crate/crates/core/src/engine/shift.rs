//! Multiplierless convolution: every input column is expanded once into its
//! precomputed shift/sign-flip terms, and those terms are routed by weight
//! index into every output position whose receptive field covers the column.

use std::thread;

use crate::codebook::{pow2, QuantizedWeightTensor};
use crate::engine::precompute::PrecomputeBuffer;
use crate::engine::{EngineOptions, OpCounts};
use crate::error::{Error, Result};
use crate::tensorio::{FixedPointTensor, FloatTensor, LayerSpec};

/// Integer partial sums for one layer, `[C̃, H̃, W̃]` row-major, carrying
/// `exponent`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccumulatorPlane {
    pub dims: [usize; 3],
    pub values: Vec<i32>,
    pub exponent: i32,
}

/// Multiplexer select codes: `0` is the zero input, `r + 1` is buffer row `r`.
/// Layout `[C̃][N][Hf][Wf][C]` so the inner loop walks channels.
struct SelectTable {
    codes: Vec<u16>,
    stages: usize,
}

impl SelectTable {
    fn new(q: &QuantizedWeightTensor, spec: &LayerSpec, buffer: &PrecomputeBuffer) -> Result<Self> {
        let config = q.config();
        let stages = config.stages();
        let [co_n, c_n, kh, kw] = spec.weight_dims();
        let mut codes = vec![0u16; co_n * stages * kh * kw * c_n];
        for co in 0..co_n {
            for c in 0..c_n {
                for hf in 0..kh {
                    for wf in 0..kw {
                        let weight = ((co * c_n + c) * kh + hf) * kw + wf;
                        for (n, &idx) in q.weight_indices(weight).iter().enumerate() {
                            let idx = idx as i32;
                            config.check_index(n + 1, idx)?;
                            let code = match config.shift_of(n + 1, idx) {
                                None => 0,
                                Some(shift) => buffer.row_for(shift, idx < 0) as u16 + 1,
                            };
                            codes[(((co * stages + n) * kh + hf) * kw + wf) * c_n + c] = code;
                        }
                    }
                }
            }
        }
        Ok(SelectTable { codes, stages })
    }

    fn channel_codes(&self, co: usize, n: usize, hf: usize, wf: usize, spec: &LayerSpec) -> &[u16] {
        let c_n = spec.in_channels;
        let start = (((co * self.stages + n) * spec.kernel_h + hf) * spec.kernel_w + wf) * c_n;
        &self.codes[start..start + c_n]
    }
}

fn check_operands(x: &FixedPointTensor, q: &QuantizedWeightTensor, spec: &LayerSpec) -> Result<()> {
    spec.validate()?;
    if x.dims() != spec.input_dims() {
        return Err(Error::ShapeMismatch(format!(
            "layer {}: input {:?}, expected {:?}",
            spec.name,
            x.dims(),
            spec.input_dims()
        )));
    }
    if q.dims() != spec.weight_dims() {
        return Err(Error::ShapeMismatch(format!(
            "layer {}: weights {:?}, expected {:?}",
            spec.name,
            q.dims(),
            spec.weight_dims()
        )));
    }
    Ok(())
}

/// Output coordinate fed by input coordinate `i` through kernel tap `tap`.
fn output_index(i: usize, tap: usize, stride: usize, padding: usize, out_len: usize) -> Option<usize> {
    let shifted = (i + padding).checked_sub(tap)?;
    if shifted % stride != 0 {
        return None;
    }
    let o = shifted / stride;
    (o < out_len).then_some(o)
}

/// Sums the `C` terms chosen by `codes` from the buffer.
#[inline]
fn select_sum(buffer: &PrecomputeBuffer, codes: &[u16], channel: usize) -> Result<i32> {
    let mut sum = 0i32;
    for (c, &code) in codes.iter().enumerate() {
        if code != 0 {
            let term = buffer.row(code as usize - 1)[c];
            sum = sum.checked_add(term).ok_or(Error::AccumulatorOverflow { channel })?;
        }
    }
    Ok(sum)
}

fn scatter_rows(
    x: &FixedPointTensor,
    q: &QuantizedWeightTensor,
    spec: &LayerSpec,
    table: &SelectTable,
    rows: std::ops::Range<usize>,
) -> Result<(Vec<i32>, OpCounts)> {
    let [co_n, out_h, out_w] = spec.output_dims();
    let (h_n, w_n, c_n) = (spec.in_h, spec.in_w, spec.in_channels);
    let mut acc = vec![0i32; co_n * out_h * out_w];
    let mut counts = OpCounts::default();
    let mut buffer = PrecomputeBuffer::new(c_n, q.config())?;
    let data = x.data();
    for h in rows {
        for w in 0..w_n {
            buffer.fill((0..c_n).map(|c| data[(c * h_n + h) * w_n + w] as i32), &mut counts)?;
            for hf in 0..spec.kernel_h {
                let Some(oh) = output_index(h, hf, spec.stride, spec.padding, out_h) else {
                    continue;
                };
                for wf in 0..spec.kernel_w {
                    let Some(ow) = output_index(w, wf, spec.stride, spec.padding, out_w) else {
                        continue;
                    };
                    for co in 0..co_n {
                        let slot = &mut acc[(co * out_h + oh) * out_w + ow];
                        for n in 0..table.stages {
                            let sum = select_sum(&buffer, table.channel_codes(co, n, hf, wf, spec), co)?;
                            *slot = slot.checked_add(sum).ok_or(Error::AccumulatorOverflow { channel: co })?;
                            counts.adds += c_n as u64;
                        }
                    }
                }
            }
        }
    }
    Ok((acc, counts))
}

/// Input-stationary integer accumulation, optionally split across workers by
/// input rows. Each worker owns a private plane; planes are summed in worker
/// order, so the result does not depend on the worker count.
pub fn accumulate_scatter(
    x: &FixedPointTensor,
    q: &QuantizedWeightTensor,
    spec: &LayerSpec,
    options: &EngineOptions,
) -> Result<(AccumulatorPlane, OpCounts)> {
    check_operands(x, q, spec)?;
    let probe = PrecomputeBuffer::new(spec.in_channels, q.config())?;
    let table = SelectTable::new(q, spec, &probe)?;
    let workers = options.workers.clamp(1, spec.in_h);
    let chunk = spec.in_h.div_ceil(workers);
    let ranges: Vec<_> = (0..spec.in_h).step_by(chunk).map(|s| s..(s + chunk).min(spec.in_h)).collect();

    let partials: Vec<Result<(Vec<i32>, OpCounts)>> = if ranges.len() == 1 {
        vec![scatter_rows(x, q, spec, &table, ranges[0].clone())]
    } else {
        thread::scope(|scope| {
            let handles: Vec<_> = ranges
                .iter()
                .map(|r| {
                    let table = &table;
                    let r = r.clone();
                    scope.spawn(move || scatter_rows(x, q, spec, table, r))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        })
    };

    let [co_n, out_h, out_w] = spec.output_dims();
    let mut values = vec![0i32; co_n * out_h * out_w];
    let mut counts = OpCounts::default();
    for partial in partials {
        let (plane, c) = partial?;
        for (i, (total, v)) in values.iter_mut().zip(plane).enumerate() {
            *total = total
                .checked_add(v)
                .ok_or(Error::AccumulatorOverflow { channel: i / (out_h * out_w) })?;
        }
        counts += c;
    }
    Ok((
        AccumulatorPlane {
            dims: spec.output_dims(),
            values,
            exponent: probe.exponent(x.exponent()),
        },
        counts,
    ))
}

/// Output-stationary re-derivation of the same accumulators: each output
/// position gathers the terms of the input columns under its window.
pub fn accumulate_gather(x: &FixedPointTensor, q: &QuantizedWeightTensor, spec: &LayerSpec) -> Result<AccumulatorPlane> {
    check_operands(x, q, spec)?;
    let (h_n, w_n, c_n) = (spec.in_h, spec.in_w, spec.in_channels);
    let mut scratch = OpCounts::default();
    let mut buffers = Vec::with_capacity(h_n * w_n);
    for h in 0..h_n {
        for w in 0..w_n {
            let mut b = PrecomputeBuffer::new(c_n, q.config())?;
            b.fill((0..c_n).map(|c| x.data()[(c * h_n + h) * w_n + w] as i32), &mut scratch)?;
            buffers.push(b);
        }
    }
    let table = SelectTable::new(q, spec, &buffers[0])?;
    let [co_n, out_h, out_w] = spec.output_dims();
    let mut values = vec![0i32; co_n * out_h * out_w];
    for co in 0..co_n {
        for oh in 0..out_h {
            for ow in 0..out_w {
                let mut total = 0i32;
                for hf in 0..spec.kernel_h {
                    let Some(h) = (oh * spec.stride + hf).checked_sub(spec.padding).filter(|&h| h < h_n) else {
                        continue;
                    };
                    for wf in 0..spec.kernel_w {
                        let Some(w) = (ow * spec.stride + wf).checked_sub(spec.padding).filter(|&w| w < w_n) else {
                            continue;
                        };
                        for n in 0..table.stages {
                            let sum = select_sum(&buffers[h * w_n + w], table.channel_codes(co, n, hf, wf, spec), co)?;
                            total = total.checked_add(sum).ok_or(Error::AccumulatorOverflow { channel: co })?;
                        }
                    }
                }
                values[(co * out_h + oh) * out_w + ow] = total;
            }
        }
    }
    Ok(AccumulatorPlane {
        dims: spec.output_dims(),
        values,
        exponent: buffers[0].exponent(x.exponent()),
    })
}

/// Applies the accumulator exponent, the weight scale, and the bias. These
/// scalings sit after the adder tree, outside the shift/add datapath.
pub fn finalize(plane: &AccumulatorPlane, scale: f64, bias: Option<&[f64]>) -> FloatTensor {
    let step = pow2(plane.exponent);
    let per_channel = plane.dims[1] * plane.dims[2];
    let data = plane
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let b = bias.map_or(0.0, |b| b[i / per_channel]);
            (v as f64 * step) * scale + b
        })
        .collect();
    FloatTensor::new(plane.dims.to_vec(), data).expect("finite accumulators")
}

#[derive(Debug, Clone)]
pub struct ShiftOutput {
    pub output: FloatTensor,
    pub counts: OpCounts,
}

pub fn conv_layer_shift(
    x: &FixedPointTensor,
    q: &QuantizedWeightTensor,
    bias: Option<&[f64]>,
    spec: &LayerSpec,
    options: &EngineOptions,
) -> Result<ShiftOutput> {
    if let Some(b) = bias {
        if b.len() != spec.out_channels {
            return Err(Error::ShapeMismatch(format!(
                "layer {}: bias has {} values for {} outputs",
                spec.name,
                b.len(),
                spec.out_channels
            )));
        }
    }
    let (plane, mut counts) = accumulate_scatter(x, q, spec, options)?;
    counts.finalize_multiplies += plane.values.len() as u64;
    Ok(ShiftOutput { output: finalize(&plane, q.scale(), bias), counts })
}
