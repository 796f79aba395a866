//! Layer-geometry text files: one whitespace-delimited record per layer,
//!
//! ```text
//! # name  C  C̃  Hf  Wf  H  W  stride  pad  [input]
//! conv1   3  64  3   3   227 227 2    0    data
//! ```
//!
//! The optional tenth field names the tensor the layer reads; layers with the
//! same name share one precompute pass. `#` starts a comment.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensorio::LayerSpec;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerRecord {
    pub spec: LayerSpec,
    pub input: Option<String>,
}

impl LayerRecord {
    /// Identity of the input tensor; a layer without an explicit input name
    /// reads a tensor of its own.
    pub fn input_key(&self) -> &str {
        self.input.as_deref().unwrap_or(&self.spec.name)
    }
}

pub fn parse_layer_file(text: &str, origin: &str) -> Result<Vec<LayerRecord>> {
    let mut records = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { path: origin.to_string(), line: lineno + 1, message };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 9 && fields.len() != 10 {
            return Err(err(format!("expected 9 or 10 fields, found {}", fields.len())));
        }
        let mut nums = [0usize; 8];
        for (slot, field) in nums.iter_mut().zip(&fields[1..9]) {
            *slot = field.parse().map_err(|_| err(format!("{field:?} is not a non-negative integer")))?;
        }
        let [c, co, kh, kw, h, w, stride, pad] = nums;
        let spec = LayerSpec::new(fields[0], c, co, (kh, kw), (h, w), stride, pad).map_err(|e| err(e.to_string()))?;
        records.push(LayerRecord { spec, input: fields.get(9).map(|s| s.to_string()) });
    }
    if records.is_empty() {
        return Err(Error::Parse { path: origin.to_string(), line: 0, message: "no layer records".into() });
    }
    Ok(records)
}

pub fn load_layer_file(path: impl AsRef<Path>) -> Result<Vec<LayerRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_layer_file(&text, &path.display().to_string())
}
