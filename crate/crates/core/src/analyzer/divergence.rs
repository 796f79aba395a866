use crate::analyzer::histogram::{Histogram, DEFAULT_BINS};
use crate::engine::{run_network, NetworkOptions};
use crate::error::{Error, Result};
use crate::tensorio::{FloatTensor, Model};

#[derive(Debug, Clone, Copy)]
pub struct DivergenceOptions {
    pub a: NetworkOptions,
    pub b: NetworkOptions,
    pub bins: usize,
    /// Histogram half-width; defaults to the largest observed difference.
    pub half_range: Option<f64>,
}

impl Default for DivergenceOptions {
    fn default() -> Self {
        DivergenceOptions {
            a: NetworkOptions::default(),
            b: NetworkOptions::default(),
            bins: DEFAULT_BINS,
            half_range: None,
        }
    }
}

/// Distribution of `out_a - out_b` over every output element of every input.
#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    pub histogram: Histogram,
    /// Mean difference (bias).
    pub mean: f64,
    /// Population variance of the difference.
    pub variance: f64,
    pub max_abs: f64,
    pub samples: u64,
}

impl Divergence {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Differences between paired output tensors.
pub fn divergence_of(pairs: &[(FloatTensor, FloatTensor)], bins: usize, half_range: Option<f64>) -> Result<Divergence> {
    if pairs.is_empty() {
        return Err(Error::NoInputs);
    }
    let mut diffs = Vec::new();
    for (a, b) in pairs {
        if a.dims() != b.dims() {
            return Err(Error::ShapeMismatch(format!("outputs {:?} vs {:?}", a.dims(), b.dims())));
        }
        diffs.extend(a.data().iter().zip(b.data()).map(|(x, y)| x - y));
    }
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let variance = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
    let max_abs = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let half = half_range.unwrap_or(if max_abs > 0.0 { max_abs } else { 1.0 });
    let mut histogram = Histogram::uniform(-half, half, bins)?;
    histogram.extend(diffs.iter().copied());
    Ok(Divergence { histogram, mean, variance, max_abs, samples: diffs.len() as u64 })
}

pub fn output_divergence(a: &Model, b: &Model, inputs: &[FloatTensor], options: &DivergenceOptions) -> Result<Divergence> {
    if inputs.is_empty() {
        return Err(Error::NoInputs);
    }
    if a.output_dims() != b.output_dims() || a.input_dims() != b.input_dims() {
        return Err(Error::ShapeMismatch(format!(
            "models map {:?}->{:?} and {:?}->{:?}",
            a.input_dims(),
            a.output_dims(),
            b.input_dims(),
            b.output_dims()
        )));
    }
    let pairs = inputs
        .iter()
        .map(|x| Ok((run_network(a, x, &options.a)?.output, run_network(b, x, &options.b)?.output)))
        .collect::<Result<Vec<_>>>()?;
    divergence_of(&pairs, options.bins, options.half_range)
}
