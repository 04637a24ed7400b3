//! One-hidden-layer network: `p = softmax(W₂ σ(W₁x + b₁) + b₂)`.

use std::fs;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scg::Objective;
use super::train::TrainSummary;
use crate::dataset::DataOrigin;
use crate::{Error, Result, Scalar};

/// Probabilities below this are clamped before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Samples per gradient work unit. Partial sums are combined in chunk order,
/// so results do not depend on the thread count.
const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub input: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl Shape {
    pub fn n_params(&self) -> usize {
        self.hidden * (self.input + 1) + self.classes * (self.hidden + 1)
    }

    /// Offsets of `w1, b1, w2, b2` in the flat parameter vector.
    fn offsets(&self) -> [usize; 4] {
        let b1 = self.hidden * self.input;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.classes * self.hidden;
        [0, b1, w2, b2]
    }

    /// Hidden activations and class probabilities for one sample.
    fn forward_into<T: Scalar>(&self, params: &[T], x: &[T], h: &mut [T], p: &mut [T]) {
        let [_, ob1, ow2, ob2] = self.offsets();
        let (w1, b1) = (&params[..ob1], &params[ob1..ow2]);
        let (w2, b2) = (&params[ow2..ob2], &params[ob2..]);
        for j in 0..self.hidden {
            let row = &w1[j * self.input..(j + 1) * self.input];
            let z = row.iter().zip(x).fold(b1[j], |acc, (&w, &xi)| acc + w * xi);
            h[j] = sigmoid(z);
        }
        for k in 0..self.classes {
            let row = &w2[k * self.hidden..(k + 1) * self.hidden];
            p[k] = row.iter().zip(h.iter()).fold(b2[k], |acc, (&w, &hj)| acc + w * hj);
        }
        softmax_in_place(p);
    }

    /// Adds this sample's loss gradient to `g` and returns its loss.
    fn accumulate<T: Scalar>(
        &self,
        params: &[T],
        x: &[T],
        label: usize,
        scratch: &mut Scratch<T>,
        g: &mut [T],
    ) -> T {
        let [_, ob1, ow2, ob2] = self.offsets();
        let Scratch { h, p, delta } = scratch;
        self.forward_into(params, x, h, p);
        let loss = cross_entropy(p, label);
        p[label] -= T::one();
        let w2 = &params[ow2..ob2];
        for j in 0..self.hidden {
            let back = (0..self.classes).fold(T::zero(), |acc, k| acc + w2[k * self.hidden + j] * p[k]);
            delta[j] = back * h[j] * (T::one() - h[j]);
        }
        for k in 0..self.classes {
            let gk = &mut g[ow2 + k * self.hidden..ow2 + (k + 1) * self.hidden];
            for (gkj, &hj) in gk.iter_mut().zip(h.iter()) {
                *gkj += p[k] * hj;
            }
            g[ob2 + k] += p[k];
        }
        for j in 0..self.hidden {
            let gj = &mut g[j * self.input..(j + 1) * self.input];
            for (gji, &xi) in gj.iter_mut().zip(x) {
                *gji += delta[j] * xi;
            }
            g[ob1 + j] += delta[j];
        }
        loss
    }

    /// Mean cross-entropy over `(xs, labels)`, with its gradient if asked.
    pub fn evaluate<T: Scalar>(
        &self,
        params: &[T],
        xs: &[Vec<T>],
        labels: &[usize],
        want_grad: bool,
    ) -> (T, Option<Vec<T>>) {
        assert_eq!(params.len(), self.n_params());
        assert_eq!(xs.len(), labels.len());
        let n = self.n_params();
        let partials: Vec<(T, Vec<T>)> = xs
            .par_chunks(CHUNK)
            .zip(labels.par_chunks(CHUNK))
            .map(|(xc, lc)| {
                let mut scratch = Scratch::new(self);
                let mut g = if want_grad { vec![T::zero(); n] } else { Vec::new() };
                let mut loss = T::zero();
                for (x, &label) in xc.iter().zip(lc) {
                    loss += if want_grad {
                        self.accumulate(params, x, label, &mut scratch, &mut g)
                    } else {
                        self.forward_into(params, x, &mut scratch.h, &mut scratch.p);
                        cross_entropy(&scratch.p, label)
                    };
                }
                (loss, g)
            })
            .collect();
        let inv = T::one() / T::from_usize_lossy(xs.len().max(1));
        let mut loss = T::zero();
        let mut grad = if want_grad { Some(vec![T::zero(); n]) } else { None };
        for (l, g) in partials {
            loss += l;
            if let Some(total) = grad.as_mut() {
                for (t, v) in total.iter_mut().zip(g) {
                    *t += v;
                }
            }
        }
        if let Some(total) = grad.as_mut() {
            total.iter_mut().for_each(|v| *v *= inv);
        }
        (loss * inv, grad)
    }
}

struct Scratch<T> {
    h: Vec<T>,
    p: Vec<T>,
    delta: Vec<T>,
}

impl<T: Scalar> Scratch<T> {
    fn new(shape: &Shape) -> Self {
        Scratch {
            h: vec![T::zero(); shape.hidden],
            p: vec![T::zero(); shape.classes],
            delta: vec![T::zero(); shape.hidden],
        }
    }
}

#[inline]
fn sigmoid<T: Scalar>(z: T) -> T {
    T::one() / (T::one() + (-z).exp())
}

fn softmax_in_place<T: Scalar>(z: &mut [T]) {
    let m = z.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// Numerically stable softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let mut p = logits.to_vec();
    softmax_in_place(&mut p);
    p
}

/// `−ln p[label]` with `p` clamped below at 1e−12.
pub fn cross_entropy<T: Scalar>(p: &[T], label: usize) -> T {
    -p[label].max(T::lit(PROB_FLOOR)).ln()
}

/// Trained or trainable network with its class-name table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp<T> {
    pub shape: Shape,
    pub class_names: Vec<String>,
    /// `[W₁ (H×I row-major), b₁, W₂ (C×H row-major), b₂]`.
    pub params: Vec<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<DataOrigin<T>>,
}

impl<T: Scalar> Mlp<T> {
    pub fn zeros(shape: Shape, class_names: Vec<String>) -> Result<Self> {
        let m = Mlp {
            shape,
            class_names,
            params: vec![T::zero(); shape.n_params()],
            training: None,
            origin: None,
        };
        m.validate()?;
        Ok(m)
    }

    /// Uniform weights in `±scale·sqrt(6/(fan_in + fan_out))` per layer,
    /// zero biases.
    pub fn glorot<R: Rng + ?Sized>(
        shape: Shape,
        class_names: Vec<String>,
        scale: T,
        rng: &mut R,
    ) -> Result<Self> {
        let mut m = Self::zeros(shape, class_names)?;
        let [_, ob1, ow2, ob2] = shape.offsets();
        let limit = |fan_in: usize, fan_out: usize| scale * T::lit((6.0 / (fan_in + fan_out) as f64).sqrt());
        let l1 = limit(shape.input, shape.hidden);
        for w in &mut m.params[..ob1] {
            *w = l1 * T::lit(rng.random_range(-1.0..1.0));
        }
        let l2 = limit(shape.hidden, shape.classes);
        for w in &mut m.params[ow2..ob2] {
            *w = l2 * T::lit(rng.random_range(-1.0..1.0));
        }
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.shape;
        if s.input == 0 || s.hidden == 0 || s.classes < 2 {
            return Err(Error::InvalidParameter(format!(
                "network needs input, hidden ≥ 1 and ≥ 2 classes, got {s:?}"
            )));
        }
        if self.class_names.len() != s.classes {
            return Err(Error::LengthMismatch {
                expected: s.classes,
                got: self.class_names.len(),
            });
        }
        if self.params.len() != s.n_params() {
            return Err(Error::LengthMismatch {
                expected: s.n_params(),
                got: self.params.len(),
            });
        }
        if self.params.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidParameter("non-finite weight".into()));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.shape.input {
            return Err(Error::LengthMismatch {
                expected: self.shape.input,
                got: x.len(),
            });
        }
        let mut h = vec![T::zero(); self.shape.hidden];
        let mut p = vec![T::zero(); self.shape.classes];
        self.shape.forward_into(&self.params, x, &mut h, &mut p);
        Ok(p)
    }

    /// Mean cross-entropy and its gradient over a non-empty batch.
    pub fn gradient(&self, xs: &[Vec<T>], labels: &[usize]) -> Result<(T, Vec<T>)> {
        self.check_batch(xs, labels)?;
        let (loss, g) = self.shape.evaluate(&self.params, xs, labels, true);
        Ok((loss, g.unwrap()))
    }

    pub fn loss(&self, xs: &[Vec<T>], labels: &[usize]) -> Result<T> {
        self.check_batch(xs, labels)?;
        Ok(self.shape.evaluate(&self.params, xs, labels, false).0)
    }

    fn check_batch(&self, xs: &[Vec<T>], labels: &[usize]) -> Result<()> {
        if xs.is_empty() {
            return Err(Error::Empty("batch"));
        }
        if xs.len() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: xs.len(),
                got: labels.len(),
            });
        }
        if let Some(x) = xs.iter().find(|x| x.len() != self.shape.input) {
            return Err(Error::LengthMismatch {
                expected: self.shape.input,
                got: x.len(),
            });
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= self.shape.classes) {
            return Err(Error::UnknownClass(l));
        }
        Ok(())
    }
}

impl<T: Scalar + Serialize> Mlp<T> {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

impl<T: Scalar + for<'de> Deserialize<'de>> Mlp<T> {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&text)?;
        m.validate()?;
        Ok(m)
    }
}

/// Full-batch training loss for a fixed data set, as a function of the
/// flat parameter vector.
pub struct MlpObjective<'a, T> {
    pub shape: Shape,
    pub xs: &'a [Vec<T>],
    pub labels: &'a [usize],
}

impl<T: Scalar> Objective<T> for MlpObjective<'_, T> {
    fn loss(&self, w: &[T]) -> T {
        self.shape.evaluate(w, self.xs, self.labels, false).0
    }

    fn loss_grad(&self, w: &[T]) -> (T, Vec<T>) {
        let (l, g) = self.shape.evaluate(w, self.xs, self.labels, true);
        (l, g.unwrap())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;
    use rand::Rng;

    fn names(c: usize) -> Vec<String> {
        (0..c).map(|i| i.to_string()).collect()
    }

    fn random_model(shape: Shape, seed: u64) -> Mlp<f64> {
        let mut rng = stream(seed, "test-model", 0, 0);
        let mut m = Mlp::glorot(shape, names(shape.classes), 1.0, &mut rng).unwrap();
        // non-zero biases so every parameter is exercised
        for v in m.params.iter_mut() {
            *v += 0.1 * rng.random_range(-1.0..1.0);
        }
        m
    }

    fn random_batch(n: usize, input: usize, classes: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = stream(seed, "test-batch", 0, 0);
        let xs = (0..n)
            .map(|_| (0..input).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let labels = (0..n).map(|_| rng.random_range(0..classes)).collect();
        (xs, labels)
    }

    #[test]
    fn zero_weights_give_uniform_output() {
        let m = Mlp::<f64>::zeros(Shape { input: 63, hidden: 4, classes: 5 }, names(5)).unwrap();
        let p = m.forward(&[0.3; 63]).unwrap();
        assert!(p.iter().all(|&v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn cross_entropy_contract() {
        assert_eq!(cross_entropy(&[0.0, 1.0, 0.0], 1), 0.0);
        assert!((cross_entropy(&[0.1f64; 10], 3) - 10f64.ln()).abs() < 1e-12);
        assert_eq!(cross_entropy(&[1.0, 1e-15], 1), -(1e-12f64).ln());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let shape = Shape { input: 63, hidden: 8, classes: 5 };
        let m = random_model(shape, 3);
        let (xs, labels) = random_batch(20, 63, 5, 4);
        let (_, g) = m.gradient(&xs, &labels).unwrap();
        let h = 1e-5;
        let mut worst = 0.0f64;
        for i in 0..shape.n_params() {
            let mut plus = m.clone();
            plus.params[i] += h;
            let mut minus = m.clone();
            minus.params[i] -= h;
            let fd = (plus.loss(&xs, &labels).unwrap() - minus.loss(&xs, &labels).unwrap()) / (2.0 * h);
            let rel = (fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-7);
            worst = worst.max(rel);
        }
        assert!(worst < 1e-4, "max relative error {worst:e}");
    }

    #[test]
    fn confident_correct_outputs_have_vanishing_gradient() {
        let shape = Shape { input: 2, hidden: 1, classes: 2 };
        let mut m = Mlp::<f64>::zeros(shape, names(2)).unwrap();
        // b₂ drives class 0 to probability 1 within round-off
        let [_, _, _, ob2] = shape.offsets();
        m.params[ob2] = 800.0;
        let xs = vec![vec![0.5, 0.5]; 4];
        let (loss, g) = m.gradient(&xs, &[0; 4]).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-9);
    }

    #[test]
    fn duplicated_batch_gives_same_gradient() {
        let shape = Shape { input: 63, hidden: 8, classes: 5 };
        let m = random_model(shape, 5);
        let (xs, labels) = random_batch(37, 63, 5, 6);
        let (_, g1) = m.gradient(&xs, &labels).unwrap();
        let xs2: Vec<_> = xs.iter().chain(&xs).cloned().collect();
        let l2: Vec<_> = labels.iter().chain(&labels).copied().collect();
        let (_, g2) = m.gradient(&xs2, &l2).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_is_bit_stable_across_thread_counts() {
        let shape = Shape { input: 63, hidden: 16, classes: 7 };
        let m = random_model(shape, 8);
        let (xs, labels) = random_batch(500, 63, 7, 9);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| m.gradient(&xs, &labels).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn rejects_malformed_batches_and_models() {
        let shape = Shape { input: 3, hidden: 2, classes: 2 };
        let m = Mlp::<f64>::zeros(shape, names(2)).unwrap();
        assert!(matches!(m.gradient(&[], &[]), Err(Error::Empty(_))));
        assert!(m.gradient(&[vec![0.0; 3]], &[2]).is_err());
        assert!(m.forward(&[0.0; 4]).is_err());
        assert!(Mlp::<f64>::zeros(shape, names(3)).is_err());
        let mut bad = m.clone();
        bad.params[0] = f64::NAN;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn model_file_round_trip() {
        let m = random_model(Shape { input: 63, hidden: 4, classes: 3 }, 1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        m.save(&path).unwrap();
        assert_eq!(Mlp::<f64>::load(&path).unwrap(), m);
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one_and_ignores_shifts(
            logits in prop::collection::vec(-50.0f64..50.0, 2..30),
            shift in -100.0f64..100.0,
        ) {
            let p = softmax(&logits);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let shifted: Vec<f64> = logits.iter().map(|v| v + shift).collect();
            for (a, b) in p.iter().zip(softmax(&shifted)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn forward_outputs_are_distributions(seed in any::<u64>()) {
            let m = random_model(Shape { input: 63, hidden: 8, classes: 5 }, seed);
            let (xs, _) = random_batch(3, 63, 5, seed ^ 1);
            for x in &xs {
                let p = m.forward(x).unwrap();
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
            }
        }
    }
}
