use crate::error::{Error, Result};
use crate::tensorio::{FloatTensor, LayerSpec};

/// Direct floating-point convolution (cross-correlation) with zero padding.
///
/// Each output sums `x * w` over `c`, then `hf`, then `wf`, starting from
/// `0.0`, and adds the bias last.
pub fn conv_layer_reference(x: &FloatTensor, w: &FloatTensor, bias: Option<&[f64]>, spec: &LayerSpec) -> Result<FloatTensor> {
    spec.validate()?;
    if x.dims() != spec.input_dims() {
        return Err(Error::ShapeMismatch(format!(
            "layer {}: input {:?}, expected {:?}",
            spec.name,
            x.dims(),
            spec.input_dims()
        )));
    }
    if w.dims() != spec.weight_dims() {
        return Err(Error::ShapeMismatch(format!(
            "layer {}: weights {:?}, expected {:?}",
            spec.name,
            w.dims(),
            spec.weight_dims()
        )));
    }
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
    let (c_n, h_n, w_n) = (spec.in_channels, spec.in_h, spec.in_w);
    let (kh, kw) = (spec.kernel_h, spec.kernel_w);
    let [co_n, out_h, out_w] = spec.output_dims();
    let (xd, wd) = (x.data(), w.data());
    let mut out = Vec::with_capacity(co_n * out_h * out_w);
    for co in 0..co_n {
        for oh in 0..out_h {
            for ow in 0..out_w {
                let mut sum = 0.0;
                for c in 0..c_n {
                    for hf in 0..kh {
                        let Some(ih) = (oh * spec.stride + hf).checked_sub(spec.padding).filter(|&h| h < h_n) else {
                            continue;
                        };
                        for wf in 0..kw {
                            let Some(iw) = (ow * spec.stride + wf).checked_sub(spec.padding).filter(|&v| v < w_n) else {
                                continue;
                            };
                            sum += xd[(c * h_n + ih) * w_n + iw] * wd[((co * c_n + c) * kh + hf) * kw + wf];
                        }
                    }
                }
                out.push(sum + bias.map_or(0.0, |b| b[co]));
            }
        }
    }
    FloatTensor::new(spec.output_dims().to_vec(), out)
}
