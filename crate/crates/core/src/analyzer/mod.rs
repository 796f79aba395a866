//! Complexity accounting and distribution analysis.

mod cost;
mod divergence;
mod histogram;
mod layerfile;

pub use cost::{layer_cost, model_cost, network_cost, CostRow, CostTable, LayerCost};
pub use divergence::{divergence_of, output_divergence, Divergence, DivergenceOptions};
pub use histogram::{weight_histogram, Histogram, DEFAULT_BINS};
pub use layerfile::{load_layer_file, parse_layer_file, LayerRecord};
