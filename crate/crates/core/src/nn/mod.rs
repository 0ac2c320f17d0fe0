//! Forward-only CNN engine for VGG-style layer strings, the VGGW weight
//! format and parity-vector replay.

mod ops;
mod parity;
mod tensor;
mod vgg;
pub(crate) mod weights;

pub use ops::{
    argmax, batchnorm2d, conv2d, dense, global_avg_pool, pool2d, relu, softmax, PoolKind,
};
pub use parity::{
    load_parity, parse_parity, replay_parity, serialize_parity, ParityCase, ParityReport,
};
pub use tensor::Tensor;
pub use vgg::{
    build_model, count_config_params, count_params, ConvBlock, LayerSpec, LayerString, Model,
    ParamCount, ParamRef, VggConfig, BN_EPSILON,
};
pub use weights::{
    load_weights, model_from_bytes, model_to_bytes, parse_tensors, save_weights, serialize_tensors,
    RawTensor,
};
