//! Convolution execution: the shift/add engine, its floating-point reference,
//! and the layer-chaining network runner.

mod network;
mod precompute;
mod reference;
mod shift;

use std::ops::AddAssign;

pub use network::{relu, run_network, run_network_fixed, ExecPath, LayerRun, NetworkOptions, NetworkRun};
pub use precompute::{precompute_terms, PrecomputeBuffer, MAX_ENGINE_SHIFT};
pub use reference::conv_layer_reference;
pub use shift::{accumulate_gather, accumulate_scatter, conv_layer_shift, finalize, AccumulatorPlane, ShiftOutput};

/// Operation tallies for the shift/add datapath.
///
/// `datapath_multiplies` counts general multiplications between input
/// ingestion and the adder-tree output; nothing on that path multiplies, so
/// it stays zero. `finalize_multiplies` counts the per-output scale
/// applications that happen after accumulation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounts {
    pub shifts: u64,
    pub sign_flips: u64,
    pub adds: u64,
    pub datapath_multiplies: u64,
    pub finalize_multiplies: u64,
    pub buffers_built: u64,
}

impl AddAssign for OpCounts {
    fn add_assign(&mut self, o: OpCounts) {
        self.shifts += o.shifts;
        self.sign_flips += o.sign_flips;
        self.adds += o.adds;
        self.datapath_multiplies += o.datapath_multiplies;
        self.finalize_multiplies += o.finalize_multiplies;
        self.buffers_built += o.buffers_built;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineOptions {
    /// Worker threads for one layer; `1` runs inline.
    pub workers: usize,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions { workers: 1 }
    }
}

impl EngineOptions {
    pub fn with_workers(workers: usize) -> Self {
        EngineOptions { workers: workers.max(1) }
    }

    pub fn all_cores() -> Self {
        let n = std::thread::available_parallelism().map_or(1, |n| n.get());
        EngineOptions::with_workers(n)
    }
}
