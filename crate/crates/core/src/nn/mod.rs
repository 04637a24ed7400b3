//! Frame classifier: 9×7 block features, a one-hidden-layer sigmoid/softmax
//! network, scaled conjugate gradient training and evaluation.

pub mod eval;
pub mod mlp;
pub mod preprocess;
pub mod scg;
pub mod split;
pub mod train;

pub use eval::{argmax, raw_crosstalk, ConfusionMatrix, LabeledMatrix};
pub use mlp::{cross_entropy, softmax, Mlp, MlpObjective};
pub use preprocess::{downsample_9x7, features, to_grayscale, FEATURES, GRID_H, GRID_W};
pub use scg::{scg_minimize, EpochRecord, Objective, ScgConfig, ScgOutcome, StopReason};
pub use split::{split_dataset, Split, SplitFractions};
pub use train::{train, TrainConfig, TrainSummary};
