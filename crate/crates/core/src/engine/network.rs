use std::time::{Duration, Instant};

use crate::codebook::dequantize_tensor;
use crate::engine::{conv_layer_reference, conv_layer_shift, EngineOptions, OpCounts};
use crate::error::{Error, Result};
use crate::tensorio::{from_fixed_point, to_fixed_point, FixedPointTensor, FloatTensor, LayerWeights, Model};

/// Activation width fed to the shift engine.
pub const ACTIVATION_BITS: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetworkOptions {
    /// ReLU between layers (never after the last one).
    pub relu: bool,
    /// Re-quantize inter-layer activations to 8-bit dynamic fixed point.
    pub requantize: bool,
    /// Run quantized layers through the float reference on dequantized
    /// operands instead of the shift engine.
    pub oracle: bool,
    pub engine: EngineOptions,
}

impl Default for NetworkOptions {
    fn default() -> Self {
        NetworkOptions { relu: true, requantize: true, oracle: false, engine: EngineOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecPath {
    Shift,
    Reference,
}

#[derive(Debug, Clone)]
pub struct LayerRun {
    pub name: String,
    pub path: ExecPath,
    pub elapsed: Duration,
    pub counts: OpCounts,
}

#[derive(Debug, Clone)]
pub struct NetworkRun {
    pub output: FloatTensor,
    pub layers: Vec<LayerRun>,
}

impl NetworkRun {
    pub fn total_counts(&self) -> OpCounts {
        let mut total = OpCounts::default();
        for l in &self.layers {
            total += l.counts;
        }
        total
    }
}

enum Activation {
    Fixed(FixedPointTensor),
    Float(FloatTensor),
}

impl Activation {
    fn dims(&self) -> &[usize] {
        match self {
            Activation::Fixed(t) => t.dims(),
            Activation::Float(t) => t.dims(),
        }
    }

    fn to_float(&self) -> FloatTensor {
        match self {
            Activation::Fixed(t) => from_fixed_point(t),
            Activation::Float(t) => t.clone(),
        }
    }

    fn to_engine_input(&self) -> Result<FixedPointTensor> {
        match self {
            Activation::Fixed(t) if t.bits() <= ACTIVATION_BITS => Ok(t.clone()),
            Activation::Fixed(t) => to_fixed_point(&from_fixed_point(t), ACTIVATION_BITS),
            Activation::Float(t) => to_fixed_point(t, ACTIVATION_BITS),
        }
    }
}

pub fn relu(t: &FloatTensor) -> FloatTensor {
    t.map(|v| v.max(0.0)).expect("relu keeps values finite")
}

/// Runs `model` on a float input. Quantized first layers see the input
/// converted to 8-bit dynamic fixed point.
pub fn run_network(model: &Model, input: &FloatTensor, options: &NetworkOptions) -> Result<NetworkRun> {
    run(model, Activation::Float(input.clone()), options)
}

pub fn run_network_fixed(model: &Model, input: &FixedPointTensor, options: &NetworkOptions) -> Result<NetworkRun> {
    run(model, Activation::Fixed(input.clone()), options)
}

fn run(model: &Model, input: Activation, options: &NetworkOptions) -> Result<NetworkRun> {
    if input.dims() != model.input_dims() {
        return Err(Error::ShapeMismatch(format!(
            "input {:?}, model expects {:?}",
            input.dims(),
            model.input_dims()
        )));
    }
    let mut act = input;
    let mut runs = Vec::with_capacity(model.layers().len());
    let last = model.layers().len() - 1;
    for (i, layer) in model.layers().iter().enumerate() {
        let start = Instant::now();
        let bias = layer.bias.as_deref();
        // without inter-layer requantization, later activations stay float
        let integer_input = i == 0 || options.requantize;
        let (out, path, counts) = match &layer.weights {
            LayerWeights::Quantized(q) if integer_input => {
                let x = act.to_engine_input()?;
                if options.oracle {
                    let y = conv_layer_reference(&from_fixed_point(&x), &dequantize_tensor(q), bias, &layer.spec)?;
                    (y, ExecPath::Reference, OpCounts::default())
                } else {
                    let r = conv_layer_shift(&x, q, bias, &layer.spec, &options.engine)?;
                    (r.output, ExecPath::Shift, r.counts)
                }
            }
            LayerWeights::Quantized(q) => {
                let y = conv_layer_reference(&act.to_float(), &dequantize_tensor(q), bias, &layer.spec)?;
                (y, ExecPath::Reference, OpCounts::default())
            }
            LayerWeights::Float(w) => {
                let y = conv_layer_reference(&act.to_float(), w, bias, &layer.spec)?;
                (y, ExecPath::Reference, OpCounts::default())
            }
        };
        runs.push(LayerRun { name: layer.spec.name.clone(), path, elapsed: start.elapsed(), counts });
        if i == last {
            return Ok(NetworkRun { output: out, layers: runs });
        }
        let out = if options.relu { relu(&out) } else { out };
        act = if options.requantize {
            Activation::Fixed(to_fixed_point(&out, ACTIVATION_BITS)?)
        } else {
            Activation::Float(out)
        };
    }
    unreachable!("model has at least one layer")
}
