//! Tensors, dynamic fixed point, layer geometry, and on-disk formats.

pub mod format;
mod layer;
pub mod model;
mod tensor;

pub use format::{load_tensor, save_tensor, StoredTensor};
pub use layer::LayerSpec;
pub use model::{load_model, save_model, Layer, LayerWeights, Model};
pub use tensor::{check_bits, from_fixed_point, to_fixed_point, FixedPointTensor, FloatTensor};
