//! Model container: a JSON manifest plus one raw blob per weight and bias
//! tensor, all in one directory.
//!
//! Quantized weights are stored as one signed byte per index (weight-major,
//! stage-minor). Float weights and biases are little-endian `f32`, or `f64`
//! when a value would not survive narrowing; the manifest records which.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codebook::{quantize_tensor, CodebookConfig, QuantizedWeightTensor};
use crate::error::{Error, Result};
use crate::tensorio::format::{decode_reals, encode_reals, real_dtype_for, RealDtype};
use crate::tensorio::{FloatTensor, LayerSpec};

pub const MANIFEST: &str = "model.json";
pub const FORMAT_NAME: &str = "shiftconv-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum LayerWeights {
    Float(FloatTensor),
    Quantized(QuantizedWeightTensor),
}

impl LayerWeights {
    pub fn dims(&self) -> &[usize] {
        match self {
            LayerWeights::Float(t) => t.dims(),
            LayerWeights::Quantized(q) => q.dims(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub weights: LayerWeights,
    /// Present iff `spec.has_bias`; one value per output channel.
    pub bias: Option<Vec<f64>>,
}

/// Ordered chain of convolution layers sharing one codebook.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: Option<CodebookConfig>,
    layers: Vec<Layer>,
}

impl Model {
    pub fn new(config: Option<CodebookConfig>, layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::ShapeMismatch("model has no layers".into()));
        }
        for layer in &layers {
            let spec = &layer.spec;
            spec.validate()?;
            if layer.weights.dims() != spec.weight_dims() {
                return Err(Error::ShapeMismatch(format!(
                    "layer {}: weights {:?}, geometry needs {:?}",
                    spec.name,
                    layer.weights.dims(),
                    spec.weight_dims()
                )));
            }
            if let LayerWeights::Quantized(q) = &layer.weights {
                if config != Some(q.config()) {
                    return Err(Error::ShapeMismatch(format!(
                        "layer {}: codebook {:?} differs from model codebook {:?}",
                        spec.name,
                        q.config(),
                        config
                    )));
                }
            }
            match (&layer.bias, spec.has_bias) {
                (Some(b), true) if b.len() == spec.out_channels => {}
                (None, false) => {}
                (b, _) => {
                    return Err(Error::ShapeMismatch(format!(
                        "layer {}: bias of length {:?} for {} outputs (has_bias = {})",
                        spec.name,
                        b.as_ref().map(Vec::len),
                        spec.out_channels,
                        spec.has_bias
                    )))
                }
            }
            if let Some(b) = &layer.bias {
                if let Some(i) = b.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(i));
                }
            }
        }
        for pair in layers.windows(2) {
            let (a, b) = (&pair[0].spec, &pair[1].spec);
            if a.output_dims() != b.input_dims() {
                return Err(Error::ShapeMismatch(format!(
                    "layer {} produces {:?} but layer {} expects {:?}",
                    a.name,
                    a.output_dims(),
                    b.name,
                    b.input_dims()
                )));
            }
        }
        Ok(Model { config, layers })
    }

    pub fn config(&self) -> Option<CodebookConfig> {
        self.config
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dims(&self) -> [usize; 3] {
        self.layers[0].spec.input_dims()
    }

    pub fn output_dims(&self) -> [usize; 3] {
        self.layers[self.layers.len() - 1].spec.output_dims()
    }

    /// Quantizes every float layer with `config`. Layers already in index
    /// form must use the same codebook.
    pub fn quantize(&self, config: CodebookConfig) -> Result<Model> {
        let layers = self
            .layers
            .iter()
            .map(|layer| {
                let weights = match &layer.weights {
                    LayerWeights::Float(w) => LayerWeights::Quantized(quantize_tensor(w, config)?),
                    LayerWeights::Quantized(q) => LayerWeights::Quantized(q.clone()),
                };
                Ok(Layer { spec: layer.spec.clone(), weights, bias: layer.bias.clone() })
            })
            .collect::<Result<Vec<_>>>()?;
        Model::new(Some(config), layers)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format: String,
    version: u32,
    codebook: Option<CodebookConfig>,
    layers: Vec<LayerEntry>,
}

#[derive(Serialize, Deserialize)]
struct LayerEntry {
    #[serde(flatten)]
    spec: LayerSpec,
    weights: WeightEntry,
    bias: Option<RealBlob>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum WeightEntry {
    Float(RealBlob),
    Quantized { scale: f64, blob: String },
}

#[derive(Serialize, Deserialize)]
struct RealBlob {
    dtype: String,
    blob: String,
}

fn write_blob(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| Error::io(path, e))
}

fn write_reals(dir: &Path, name: String, values: &[f64]) -> Result<RealBlob> {
    let dtype = real_dtype_for(values);
    let mut bytes = Vec::new();
    encode_reals(values, dtype, &mut bytes);
    write_blob(dir, &name, &bytes)?;
    Ok(RealBlob { dtype: dtype.name().into(), blob: name })
}

/// Writes `model` into directory `dir` (created if missing).
pub fn save_model(model: &Model, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(model.layers.len());
    for (i, layer) in model.layers.iter().enumerate() {
        let weights = match &layer.weights {
            LayerWeights::Float(w) => WeightEntry::Float(write_reals(dir, format!("layer{i}.weights"), w.data())?),
            LayerWeights::Quantized(q) => {
                let name = format!("layer{i}.idx");
                let bytes: Vec<u8> = q.indices().iter().map(|&v| v as u8).collect();
                write_blob(dir, &name, &bytes)?;
                WeightEntry::Quantized { scale: q.scale(), blob: name }
            }
        };
        let bias = match &layer.bias {
            Some(b) => Some(write_reals(dir, format!("layer{i}.bias"), b)?),
            None => None,
        };
        entries.push(LayerEntry { spec: layer.spec.clone(), weights, bias });
    }
    let manifest = Manifest {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
        codebook: model.config,
        layers: entries,
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write_blob(dir, MANIFEST, text.as_bytes())
}

fn read_blob(dir: &Path, name: &str, expected: usize) -> Result<Vec<u8>> {
    if name.contains('/') || name.contains('\\') || name == ".." {
        return Err(Error::MalformedManifest(format!("blob name {name:?} must be a plain file name")));
    }
    let path = dir.join(name);
    let bytes = fs::read(&path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != expected {
        return Err(Error::BlobLengthMismatch { blob: name.into(), expected, found: bytes.len() });
    }
    Ok(bytes)
}

fn read_reals(dir: &Path, blob: &RealBlob, count: usize) -> Result<Vec<f64>> {
    let dtype = RealDtype::from_name(&blob.dtype)
        .ok_or_else(|| Error::MalformedManifest(format!("unknown dtype {:?}", blob.dtype)))?;
    let bytes = read_blob(dir, &blob.blob, count * dtype.width())?;
    Ok(decode_reals(&bytes, dtype))
}

pub fn load_model(dir: impl AsRef<Path>) -> Result<Model> {
    let dir = dir.as_ref();
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::MalformedManifest(e.to_string()))?;
    match value.get("format").and_then(|v| v.as_str()) {
        Some(FORMAT_NAME) => {}
        other => return Err(Error::MalformedManifest(format!("format {other:?}, expected {FORMAT_NAME:?}"))),
    }
    let version = value
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::MalformedManifest("missing version".into()))?;
    if version != FORMAT_VERSION as u64 {
        return Err(Error::UnsupportedVersion(version.min(u32::MAX as u64) as u32));
    }
    let manifest: Manifest = serde_json::from_value(value).map_err(|e| {
        // invalid codebook configs surface through serde as plain messages
        Error::MalformedManifest(e.to_string())
    })?;

    let mut layers = Vec::with_capacity(manifest.layers.len());
    for entry in manifest.layers {
        entry.spec.validate().map_err(|e| Error::MalformedManifest(e.to_string()))?;
        let dims = entry.spec.weight_dims().to_vec();
        let count = entry.spec.weight_count();
        let weights = match &entry.weights {
            WeightEntry::Float(blob) => LayerWeights::Float(FloatTensor::new(dims, read_reals(dir, blob, count)?)?),
            WeightEntry::Quantized { scale, blob } => {
                let config = manifest.codebook.ok_or_else(|| {
                    Error::MalformedManifest(format!("layer {} is quantized but no codebook is declared", entry.spec.name))
                })?;
                let bytes = read_blob(dir, blob, count * config.stages())?;
                let indices = bytes.into_iter().map(|b| b as i8).collect();
                LayerWeights::Quantized(QuantizedWeightTensor::from_parts(dims, indices, *scale, config)?)
            }
        };
        let bias = match &entry.bias {
            Some(blob) => Some(read_reals(dir, blob, entry.spec.out_channels)?),
            None => None,
        };
        layers.push(Layer { spec: entry.spec, weights, bias });
    }
    Model::new(manifest.codebook, layers).map_err(|e| match e {
        Error::ShapeMismatch(m) => Error::MalformedManifest(m),
        other => other,
    })
}
