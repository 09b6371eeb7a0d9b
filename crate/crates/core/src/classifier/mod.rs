//! A compact convolutional classifier with hand-written forward and backward
//! passes.
//!
//! Network: `n` blocks of [3×3 same-padded convolution → ReLU → 2×2 max-pool],
//! then global average pooling, a 1024-unit ReLU dense layer and a 2-unit
//! softmax layer. The loss is two-class cross-entropy (binary cross-entropy on
//! `p_tampered`) and parameters are updated with Adam.
//!
//! All numerics are generic over [`Scalar`]: training runs in `f32`, gradient
//! checks in `f64`.

mod adam;
mod checkpoint;
mod layers;
mod model;
mod tensor;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use layers::{
    conv3x3_backward, conv3x3_forward, dense_backward, dense_forward, global_avg_pool, maxpool2_backward,
    maxpool2_forward, softmax,
};
pub use model::{
    backward, bce_loss, forward, head_param_count, predicted_class, Architecture, ForwardCache, ModelParams,
    ParamTensor, CLASSES, HIDDEN_UNITS,
};
pub use tensor::Tensor4;
pub use train::{
    evaluate_examples, predict, predict_examples, train, train_on_examples, EpochRecord, TrainConfig, TrainHistory,
};

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::AddAssign;

/// Floating-point element type of tensors and parameters.
pub trait Scalar: num_traits::Float + AddAssign + Sum + Default + Debug + Send + Sync + 'static {
    /// Softmax row-sum tolerance for this precision.
    const SUM_TOLERANCE: f64;

    fn of(v: f64) -> Self;

    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    const SUM_TOLERANCE: f64 = 1e-6;

    fn of(v: f64) -> Self {
        v as f32
    }

    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    const SUM_TOLERANCE: f64 = 1e-9;

    fn of(v: f64) -> Self {
        v
    }

    fn as_f64(self) -> f64 {
        self
    }
}
