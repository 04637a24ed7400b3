//! Simulation of OAM-encoded transmission through a strained few-mode
//! fiber, with a neural decoder that reads the scrambled output frames.
//!
//! Numerics are generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix the scalar for the common cases. The channel itself needs `f64`:
//! its propagation phases are of order 10⁷ rad.

pub mod channel;
pub mod codec;
pub mod dataset;
pub mod error;
pub mod fiber;
pub mod field;
pub mod linalg;
pub mod nn;
pub mod pgm;
pub mod pipeline;
pub mod rng;
pub mod scalar;
pub mod special;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type FiberSpecF64 = fiber::FiberSpec<f64>;
pub type FiberSpecF32 = fiber::FiberSpec<f32>;
pub type LpModeF64 = fiber::LpMode<f64>;
pub type LpModeF32 = fiber::LpMode<f32>;
pub type GridF64 = field::Grid<f64>;
pub type GridF32 = field::Grid<f32>;
pub type ComplexFieldF64 = field::ComplexField<f64>;
pub type ComplexFieldF32 = field::ComplexField<f32>;
pub type ModalVectorF64 = field::ModalVector<f64>;
pub type LpBasisF64 = field::LpBasis<f64>;
pub type CMatrixF64 = linalg::CMatrix<f64>;
pub type ChannelSpecF64 = channel::ChannelSpec<f64>;
pub type CameraSpecF64 = channel::CameraSpec<f64>;
pub type ChannelF64 = channel::Channel<f64>;
pub type DatasetF64 = dataset::Dataset<f64>;
pub type DatasetManifestF64 = dataset::DatasetManifest<f64>;
pub type MlpF64 = nn::Mlp<f64>;
pub type MlpF32 = nn::Mlp<f32>;
