use std::collections::HashSet;
use std::ops::{Add, AddAssign};

use crate::analyzer::LayerRecord;
use crate::codebook::CodebookConfig;
use crate::tensorio::LayerSpec;

/// Cycle accounting for one layer (or a sum of layers).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LayerCost {
    /// `C̃·H̃·W̃·C·Hf·Wf`: one multiplier cycle per product.
    pub conv_mult_cycles: u64,
    /// `P·C·H·W`: every input element times every union codeword.
    pub shift_product_ops: u64,
    /// `C·H·W`: the pipelined shift unit emits all `P - 1` terms of an
    /// input element per cycle.
    pub shift_alu_cycles: u64,
}

impl LayerCost {
    pub fn speedup(&self) -> f64 {
        self.conv_mult_cycles as f64 / self.shift_alu_cycles as f64
    }
}

impl Add for LayerCost {
    type Output = LayerCost;

    fn add(self, o: LayerCost) -> LayerCost {
        LayerCost {
            conv_mult_cycles: self.conv_mult_cycles + o.conv_mult_cycles,
            shift_product_ops: self.shift_product_ops + o.shift_product_ops,
            shift_alu_cycles: self.shift_alu_cycles + o.shift_alu_cycles,
        }
    }
}

impl AddAssign for LayerCost {
    fn add_assign(&mut self, o: LayerCost) {
        *self = *self + o;
    }
}

pub fn layer_cost(spec: &LayerSpec, config: CodebookConfig) -> LayerCost {
    let input = (spec.in_channels * spec.in_h * spec.in_w) as u64;
    let [co, oh, ow] = spec.output_dims();
    let window = (spec.in_channels * spec.kernel_h * spec.kernel_w) as u64;
    LayerCost {
        conv_mult_cycles: (co * oh * ow) as u64 * window,
        shift_product_ops: config.combinations() as u64 * input,
        shift_alu_cycles: input,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostRow {
    pub name: String,
    pub cost: LayerCost,
    /// The layer reads a tensor an earlier layer already expanded, so its
    /// shift-unit work is not counted again in the total.
    pub shared_input: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostTable {
    pub rows: Vec<CostRow>,
    pub total: LayerCost,
}

impl CostTable {
    pub fn speedup(&self) -> f64 {
        self.total.speedup()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<28} {:>16} {:>14} {:>14} {:>10}\n",
            "layer", "mult_cycles", "shift_ops", "alu_cycles", "speedup"
        );
        for row in &self.rows {
            let mark = if row.shared_input { " (shared input)" } else { "" };
            out.push_str(&format!(
                "{:<28} {:>16} {:>14} {:>14} {:>10.1}{}\n",
                row.name,
                row.cost.conv_mult_cycles,
                row.cost.shift_product_ops,
                row.cost.shift_alu_cycles,
                row.cost.speedup(),
                mark
            ));
        }
        out.push_str(&format!(
            "{:<28} {:>16} {:>14} {:>14} {:>10.1}\n",
            "TOTAL",
            self.total.conv_mult_cycles,
            self.total.shift_product_ops,
            self.total.shift_alu_cycles,
            self.total.speedup()
        ));
        out.push_str(&format!(
            "mult: {:.2}M cycles, shift unit: {:.3}M cycles, speedup: {:.1}x\n",
            self.total.conv_mult_cycles as f64 / 1e6,
            self.total.shift_alu_cycles as f64 / 1e6,
            self.total.speedup()
        ));
        out
    }
}

/// Plain per-layer sum.
pub fn model_cost(layers: &[LayerSpec], config: CodebookConfig) -> CostTable {
    let rows: Vec<CostRow> = layers
        .iter()
        .map(|spec| CostRow { name: spec.name.clone(), cost: layer_cost(spec, config), shared_input: false })
        .collect();
    let total = rows.iter().fold(LayerCost::default(), |acc, r| acc + r.cost);
    CostTable { rows, total }
}

/// Per-layer sum where layers naming the same input tensor share one
/// precompute pass: their multiplier cycles add up, shift-unit work is
/// counted once per tensor.
pub fn network_cost(records: &[LayerRecord], config: CodebookConfig) -> CostTable {
    let mut seen = HashSet::new();
    let mut total = LayerCost::default();
    let mut rows = Vec::with_capacity(records.len());
    for record in records {
        let cost = layer_cost(&record.spec, config);
        let shared_input = !seen.insert(record.input_key().to_string());
        total.conv_mult_cycles += cost.conv_mult_cycles;
        if !shared_input {
            total.shift_product_ops += cost.shift_product_ops;
            total.shift_alu_cycles += cost.shift_alu_cycles;
        }
        rows.push(CostRow { name: record.spec.name.clone(), cost, shared_input });
    }
    CostTable { rows, total }
}
