//! Møller's scaled conjugate gradient with validation-based early stopping.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

/// Differentiable scalar function of a flat parameter vector.
pub trait Objective<T> {
    fn loss(&self, w: &[T]) -> T;
    fn loss_grad(&self, w: &[T]) -> (T, Vec<T>);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScgConfig {
    pub max_epochs: usize,
    pub sigma: f64,
    pub lambda_init: f64,
    pub min_grad_norm: f64,
    /// Consecutive epochs of worsening validation loss before stopping.
    pub patience: usize,
}

impl Default for ScgConfig {
    fn default() -> Self {
        ScgConfig {
            max_epochs: 1000,
            sigma: 5e-5,
            lambda_init: 5e-7,
            min_grad_norm: 1e-8,
            patience: 6,
        }
    }
}

impl ScgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::InvalidParameter(
                "max epochs and patience must be at least 1".into(),
            ));
        }
        if !(self.sigma > 0.0 && self.lambda_init > 0.0 && self.min_grad_norm >= 0.0) {
            return Err(Error::InvalidParameter("SCG constants must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    GradientNorm,
    ValidationPatience,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub lambda: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScgOutcome<T> {
    /// Weights with the best validation loss, or the final weights when
    /// there is no validation objective.
    pub weights: Vec<T>,
    pub best_epoch: usize,
    pub best_val_loss: Option<f64>,
    pub stop: StopReason,
    pub log: Vec<EpochRecord>,
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn axpy<T: Scalar>(w: &[T], alpha: T, p: &[T]) -> Vec<T> {
    w.iter().zip(p).map(|(&wi, &pi)| wi + alpha * pi).collect()
}

fn finite<T: Scalar>(v: T, what: &str, epoch: usize) -> Result<T> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Training(format!("non-finite {what} at epoch {epoch}")))
    }
}

/// Minimises `train` from `w0`. One epoch is one SCG iteration. With a
/// validation objective, training stops after `patience` consecutive
/// epochs whose validation loss exceeds the best so far, and the best
/// weights are returned.
pub fn scg_minimize<T: Scalar>(
    train: &dyn Objective<T>,
    val: Option<&dyn Objective<T>>,
    w0: Vec<T>,
    cfg: &ScgConfig,
) -> Result<ScgOutcome<T>> {
    cfg.validate()?;
    let n = w0.len();
    let sigma0 = T::lit(cfg.sigma);
    let lambda_max = T::lit(1e20);
    let mut w = w0;
    let (mut loss, g) = train.loss_grad(&w);
    finite(loss, "training loss", 0)?;
    let mut r: Vec<T> = g.iter().map(|&v| -v).collect();
    let mut p = r.clone();
    let mut lambda = T::lit(cfg.lambda_init);
    let mut lambda_bar = T::zero();
    let mut success = true;
    let mut curvature = T::zero();

    let mut best_w = w.clone();
    let mut best_val = match val {
        Some(v) => Some(finite(v.loss(&w), "validation loss", 0)?),
        None => None,
    };
    let mut best_epoch = 0;
    let mut fails = 0;
    let mut log = Vec::new();
    let mut stop = StopReason::MaxEpochs;

    for epoch in 1..=cfg.max_epochs {
        if dot(&r, &r).sqrt() < T::lit(cfg.min_grad_norm) {
            stop = StopReason::GradientNorm;
            break;
        }
        let p2 = dot(&p, &p);
        if success {
            // second-order information along p by differencing the gradient
            let sigma = sigma0 / p2.sqrt();
            let (_, g_plus) = train.loss_grad(&axpy(&w, sigma, &p));
            let s: Vec<T> = g_plus
                .iter()
                .zip(&r)
                .map(|(&gp, &ri)| (gp + ri) / sigma)
                .collect();
            curvature = finite(dot(&p, &s), "curvature", epoch)?;
        }
        let mut delta = curvature + (lambda - lambda_bar) * p2;
        if delta <= T::zero() {
            // make the local Hessian estimate positive definite
            lambda_bar = T::lit(2.0) * (lambda - delta / p2);
            delta = -delta + lambda * p2;
            lambda = lambda_bar;
        }
        let mu = dot(&p, &r);
        let alpha = mu / delta;
        let w_new = axpy(&w, alpha, &p);
        let loss_new = finite(train.loss(&w_new), "trial loss", epoch)?;
        let comparison = T::lit(2.0) * delta * (loss - loss_new) / (mu * mu);
        let accepted = comparison >= T::zero();
        if accepted {
            w = w_new;
            let (l, g) = train.loss_grad(&w);
            loss = finite(l, "training loss", epoch)?;
            let r_new: Vec<T> = g.iter().map(|&v| -v).collect();
            lambda_bar = T::zero();
            success = true;
            if epoch % n.max(1) == 0 {
                p = r_new.clone();
            } else {
                let beta = (dot(&r_new, &r_new) - dot(&r_new, &r)) / mu;
                p = axpy(&r_new, beta, &p);
            }
            r = r_new;
            if comparison >= T::lit(0.75) {
                lambda = lambda * T::lit(0.25);
            }
        } else {
            lambda_bar = lambda;
            success = false;
        }
        if comparison < T::lit(0.25) {
            lambda = (lambda + delta * (T::one() - comparison) / p2).min(lambda_max);
        }

        let mut val_loss = None;
        if let (Some(v), true) = (val, accepted) {
            let vl = finite(v.loss(&w), "validation loss", epoch)?;
            val_loss = Some(vl.to_f64_lossy());
            let best = best_val.unwrap();
            if vl < best {
                best_val = Some(vl);
                best_w.clone_from(&w);
                best_epoch = epoch;
                fails = 0;
            } else if vl > best {
                fails += 1;
            }
        } else if val.is_none() && accepted {
            best_epoch = epoch;
        }
        log.push(EpochRecord {
            epoch,
            train_loss: loss.to_f64_lossy(),
            val_loss,
            lambda: lambda.to_f64_lossy(),
            accepted,
        });
        if fails >= cfg.patience {
            stop = StopReason::ValidationPatience;
            break;
        }
    }
    let weights = if val.is_some() { best_w } else { w };
    Ok(ScgOutcome {
        weights,
        best_epoch,
        best_val_loss: best_val.map(|v| v.to_f64_lossy()),
        stop,
        log,
    })
}
