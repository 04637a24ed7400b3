//! Stratified train/validation/test partition.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng::stream;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.70,
            val: 0.15,
            test: 0.15,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let all = [self.train, self.val, self.test];
        if all.iter().any(|&f| !(f > 0.0)) || (all.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "split fractions must be positive and sum to 1, got {all:?}"
            )));
        }
        Ok(())
    }

    /// `(train, val, test)` counts for a class of `n` samples; each part
    /// gets at least one sample.
    pub fn counts(&self, n: usize) -> (usize, usize, usize) {
        let round = |f: f64| ((n as f64 * f).round() as usize).max(1);
        let val = round(self.val);
        let test = round(self.test);
        (n - val - test, val, test)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles each class with its own seeded stream and cuts it by
/// `fractions`. Every class must have the same number of samples, at
/// least three. Index lists come out sorted.
pub fn split_dataset(
    labels: &[usize],
    n_classes: usize,
    fractions: SplitFractions,
    seed: u64,
) -> Result<Split> {
    fractions.validate()?;
    let mut by_class = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class.get_mut(l).ok_or(Error::UnknownClass(l))?.push(i);
    }
    if let Some((c, members)) = by_class.iter().enumerate().find(|(_, m)| m.len() < 3) {
        return Err(Error::Dataset(format!(
            "class {c} has {} samples; at least 3 are needed",
            members.len()
        )));
    }
    if by_class.iter().any(|m| m.len() != by_class[0].len()) {
        return Err(Error::Dataset("classes are not balanced".into()));
    }
    let mut split = Split {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for (c, mut members) in by_class.into_iter().enumerate() {
        members.shuffle(&mut stream(seed, "split", c as u64, 0));
        let (tr, va, _) = fractions.counts(members.len());
        split.train.extend_from_slice(&members[..tr]);
        split.val.extend_from_slice(&members[tr..tr + va]);
        split.test.extend_from_slice(&members[tr + va..]);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}
