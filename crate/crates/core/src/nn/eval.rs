//! Classifier evaluation and modal cross-talk.

use std::fmt::Write as _;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use crate::channel::Channel;
use crate::dataset::{frame_purpose, sweep_len, ClassInfo};
use crate::field::{lg_field, LgBeam, Superposition};
use crate::pgm::GrayImage;
use crate::rng::stream;
use crate::{Error, Result, Scalar};

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax<T: Scalar>(p: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Square matrix with row and column labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl LabeledMatrix {
    pub fn mean_diagonal(&self) -> f64 {
        let n = self.values.len();
        (0..n).map(|i| self.values[i][i]).sum::<f64>() / n as f64
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.values.iter().map(|r| r.iter().sum()).collect()
    }

    /// Each non-empty row scaled to sum to 1.
    pub fn row_normalized(&self) -> Self {
        let values = self
            .values
            .iter()
            .map(|r| {
                let s: f64 = r.iter().sum();
                if s > 0.0 {
                    r.iter().map(|v| v / s).collect()
                } else {
                    r.clone()
                }
            })
            .collect();
        LabeledMatrix {
            labels: self.labels.clone(),
            values,
        }
    }

    /// Header row and first column carry the labels.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class");
        for l in &self.labels {
            let _ = write!(out, ",{}", csv_field(l));
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.values) {
            out.push_str(&csv_field(l));
            for &v in row {
                let _ = write!(out, ",{}", csv_number(v));
            }
            out.push('\n');
        }
        out
    }

    /// Grayscale picture of the matrix, `cell` pixels per entry, with the
    /// largest entry white.
    pub fn heatmap(&self, cell: usize) -> GrayImage {
        let n = self.values.len();
        let peak = self.values.iter().flatten().copied().fold(0.0, f64::max);
        let side = n * cell.max(1);
        let mut img = GrayImage::filled(side, side, 0);
        if peak > 0.0 {
            for row in 0..side {
                for col in 0..side {
                    let v = self.values[row / cell.max(1)][col / cell.max(1)] / peak;
                    img.pixels[row * side + col] = (v * 255.0).round() as u8;
                }
            }
        }
        img
    }
}

/// Shortest round-trip form, switching to exponent notation for tiny values.
fn csv_number(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-4 {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Counts of (true class, predicted class).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub class_names: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_predictions(
        class_names: Vec<String>,
        truth: &[usize],
        predicted: &[usize],
    ) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::LengthMismatch {
                expected: truth.len(),
                got: predicted.len(),
            });
        }
        let c = class_names.len();
        let mut counts = vec![vec![0u64; c]; c];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= c {
                return Err(Error::UnknownClass(t));
            }
            if p >= c {
                return Err(Error::UnknownClass(p));
            }
            counts[t][p] += 1;
        }
        Ok(ConfusionMatrix {
            class_names,
            counts,
        })
    }

    /// Classifies every sample of a non-empty test set.
    pub fn evaluate<T: Scalar>(model: &Mlp<T>, xs: &[Vec<T>], labels: &[usize]) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::Empty("test set"));
        }
        let predicted = xs
            .par_iter()
            .map(|x| model.forward(x).map(|p| argmax(&p)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_predictions(model.class_names.clone(), labels, &predicted)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Correct classifications over all classifications.
    pub fn accuracy(&self) -> f64 {
        let correct: u64 = (0..self.counts.len()).map(|i| self.counts[i][i]).sum();
        correct as f64 / self.total().max(1) as f64
    }

    pub fn normalized(&self) -> LabeledMatrix {
        LabeledMatrix {
            labels: self.class_names.clone(),
            values: self
                .counts
                .iter()
                .map(|r| r.iter().map(|&v| v as f64).collect())
                .collect(),
        }
        .row_normalized()
    }

    pub fn mean_diagonal(&self) -> f64 {
        self.normalized().mean_diagonal()
    }
}

/// Row `i` is the power that input class `i` leaves in each centred
/// receiver LG mode after the fiber, averaged over the displacement sweep
/// and normalised to sum 1. Frame `k` of class `i` sees the same channel
/// realisation as the corresponding dataset frame.
pub fn raw_crosstalk<T: Scalar>(
    channel: &Channel<T>,
    classes: &[ClassInfo],
    receivers: &[i32],
    step_mm: T,
) -> Result<LabeledMatrix> {
    if classes.len() != receivers.len() {
        return Err(Error::LengthMismatch {
            expected: classes.len(),
            got: receivers.len(),
        });
    }
    let sweep = sweep_len(channel.spec.max_displacement_mm, step_mm)?;
    let basis = channel.reference_basis();
    let waist = channel.spec.waist;
    // ⟨LG_j|LP_m⟩ on the reference grid
    let overlap = receivers
        .par_iter()
        .map(|&l| {
            let lg = lg_field(&LgBeam::new(l, 0, waist)?, &basis.grid);
            basis.fields.iter().map(|lp| lg.inner(lp)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let values = classes
        .par_iter()
        .map(|class| {
            let c_in = channel.couple(&Superposition::equal(&class.charges, waist)?)?;
            let mut row = vec![0.0; receivers.len()];
            for k in 0..sweep {
                let d = step_mm * T::from_usize_lossy(k);
                let mut rng = stream(channel.spec.seed, &frame_purpose(class), 0, k as u64);
                let c_out = channel.propagate(&c_in, d, &mut rng)?;
                for (acc, o) in row.iter_mut().zip(&overlap) {
                    let amp = o
                        .iter()
                        .zip(&c_out.coeffs)
                        .fold(Complex::new(T::zero(), T::zero()), |s, (a, c)| s + *a * c);
                    *acc += amp.norm_sqr().to_f64_lossy() / sweep as f64;
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LabeledMatrix {
        labels: classes.iter().map(|c| c.name.clone()).collect(),
        values,
    }
    .row_normalized())
}
