//! End-to-end training: split, initialise, minimise, restore best.

use serde::{Deserialize, Serialize};

use super::mlp::{Mlp, MlpObjective, Shape};
use super::scg::{scg_minimize, EpochRecord, Objective, ScgConfig, StopReason};
use super::split::{split_dataset, Split, SplitFractions};
use crate::rng::stream;
use crate::{Error, Result, Scalar};

pub const DEFAULT_HIDDEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: usize,
    pub scg: ScgConfig,
    pub fractions: SplitFractions,
    /// Multiplier on the scaled-uniform initialisation range.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: DEFAULT_HIDDEN,
            scg: ScgConfig::default(),
            fractions: SplitFractions::default(),
            init_scale: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::InvalidParameter("hidden layer must be non-empty".into()));
        }
        if !(self.init_scale > 0.0) {
            return Err(Error::InvalidParameter("init scale must be positive".into()));
        }
        self.scg.validate()?;
        self.fractions.validate()
    }
}

/// What a trained model remembers about how it was made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub config: TrainConfig,
    pub epochs: usize,
    pub best_epoch: usize,
    pub stop: StopReason,
    pub best_val_loss: f64,
    pub final_train_loss: f64,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput<T> {
    pub model: Mlp<T>,
    pub split: Split,
    pub log: Vec<EpochRecord>,
}

fn gather<T: Clone>(xs: &[Vec<T>], labels: &[usize], idx: &[usize]) -> (Vec<Vec<T>>, Vec<usize>) {
    (
        idx.iter().map(|&i| xs[i].clone()).collect(),
        idx.iter().map(|&i| labels[i]).collect(),
    )
}

/// Trains on a stratified split of `(xs, labels)`. The test part is never
/// touched here; it is returned for the caller to evaluate.
pub fn train<T: Scalar>(
    xs: &[Vec<T>],
    labels: &[usize],
    class_names: Vec<String>,
    cfg: &TrainConfig,
) -> Result<TrainOutput<T>> {
    cfg.validate()?;
    let input = xs
        .first()
        .map(Vec::len)
        .ok_or(Error::Empty("training data"))?;
    if xs.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: xs.len(),
            got: labels.len(),
        });
    }
    let shape = Shape {
        input,
        hidden: cfg.hidden,
        classes: class_names.len(),
    };
    let split = split_dataset(labels, shape.classes, cfg.fractions, cfg.seed)?;
    let (tx, tl) = gather(xs, labels, &split.train);
    let (vx, vl) = gather(xs, labels, &split.val);
    let mut model = Mlp::glorot(
        shape,
        class_names,
        T::lit(cfg.init_scale),
        &mut stream(cfg.seed, "init", 0, 0),
    )?;
    model.loss(&tx, &tl)?;
    let train_obj = MlpObjective { shape, xs: &tx, labels: &tl };
    let val_obj = MlpObjective { shape, xs: &vx, labels: &vl };
    let outcome = scg_minimize(&train_obj, Some(&val_obj), model.params.clone(), &cfg.scg)?;
    model.params = outcome.weights;
    model.training = Some(TrainSummary {
        config: *cfg,
        epochs: outcome.log.len(),
        best_epoch: outcome.best_epoch,
        stop: outcome.stop,
        best_val_loss: outcome.best_val_loss.unwrap_or(f64::NAN),
        final_train_loss: train_obj.loss(&model.params).to_f64_lossy(),
        n_train: split.train.len(),
        n_val: split.val.len(),
        n_test: split.test.len(),
    });
    Ok(TrainOutput {
        model,
        split,
        log: outcome.log,
    })
}
