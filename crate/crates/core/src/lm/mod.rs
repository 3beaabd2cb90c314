//! Miniature decoder-only autoregressive language model, implemented
//! from scratch on dense matrices: training (cross-entropy + adaptive
//! moments), incremental sampling, and versioned checkpoints. The math
//! is generic over the scalar so the identical network can be
//! instantiated at `f64` for finite-difference gradient verification.

pub mod math;

mod checkpoint;
mod model;
mod sample;
mod train;


pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use model::{KvCache, LayerParams, LmConfig, LmError, Params};
pub use sample::{sample, SampleOutput};
pub use train::{
    build_windows, loss_and_grad, loss_curve_csv, nll_loss, train, Adam, AdamHyper,
    TrainHyper,
};

pub(crate) use train::backward;
