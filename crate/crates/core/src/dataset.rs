//! Labelled frame datasets: generation over a displacement sweep and the
//! on-disk layout (`manifest.json` plus one P5 file per frame).

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{CameraSpec, Channel, ChannelSpec};
use crate::codec::char_to_charges;
use crate::field::Superposition;
use crate::pgm::GrayImage;
use crate::rng::stream;
use crate::{Error, Result, Scalar};

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

/// A class: its display name and the LG charges superposed to make it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassInfo {
    pub id: usize,
    pub name: String,
    pub charges: Vec<i32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    SingleMode,
    Superposition,
}

/// One class per charge in `charges`, named `l=+3`, `l=0`, `l=-7`.
pub fn single_mode_classes(charges: impl IntoIterator<Item = i32>) -> Vec<ClassInfo> {
    charges
        .into_iter()
        .enumerate()
        .map(|(id, l)| ClassInfo {
            id,
            name: if l == 0 {
                "l=0".to_string()
            } else {
                format!("l={l:+}")
            },
            charges: vec![l],
        })
        .collect()
}

/// Inverse of the single-mode naming: `"l=+3"` → 3.
pub fn parse_charge_name(name: &str) -> Option<i32> {
    name.strip_prefix("l=")?.parse().ok()
}

/// One class per character, carrying its alphabet superposition.
pub fn character_classes(chars: &[u8]) -> Result<Vec<ClassInfo>> {
    chars
        .iter()
        .enumerate()
        .map(|(id, &c)| {
            let charges = char_to_charges(c);
            if charges.is_empty() {
                return Err(Error::InvalidParameter(
                    "the null byte has no superposition and cannot be a class".into(),
                ));
            }
            Ok(ClassInfo {
                id,
                name: (c as char).to_string(),
                charges,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub path: String,
    pub label: usize,
    pub displacement_mm: f64,
    pub frame_index: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest<T> {
    pub version: u32,
    pub kind: DatasetKind,
    pub classes: Vec<ClassInfo>,
    pub samples: Vec<SampleRecord>,
    pub channel: ChannelSpec<T>,
    pub camera: CameraSpec<T>,
    pub step_mm: T,
    pub seed: u64,
}

impl<T: Scalar> DatasetManifest<T> {
    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// Labels are `0..C` and every class has the same number of samples.
    pub fn check_balanced(&self) -> Result<usize> {
        let c = self.classes.len();
        if c == 0 {
            return Err(Error::Dataset("no classes".into()));
        }
        for (i, class) in self.classes.iter().enumerate() {
            if class.id != i {
                return Err(Error::Dataset("class ids are not a contiguous 0-based range".into()));
            }
        }
        let mut counts = vec![0usize; c];
        for s in &self.samples {
            *counts
                .get_mut(s.label)
                .ok_or_else(|| Error::Dataset(format!("label {} has no class", s.label)))? += 1;
        }
        if counts.iter().any(|&n| n != counts[0]) {
            return Err(Error::Dataset(format!(
                "unbalanced dataset: per-class counts {counts:?}"
            )));
        }
        Ok(counts[0])
    }
}

/// The channel, sensor and sweep a classifier's training frames came from;
/// a sender needs the same channel to produce frames the model can read.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataOrigin<T> {
    pub kind: DatasetKind,
    pub channel: ChannelSpec<T>,
    pub camera: CameraSpec<T>,
    pub step_mm: T,
}

impl<T: Scalar> DatasetManifest<T> {
    pub fn origin(&self) -> DataOrigin<T> {
        DataOrigin {
            kind: self.kind,
            channel: self.channel,
            camera: self.camera,
            step_mm: self.step_mm,
        }
    }

    pub fn class_names(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.name.clone()).collect()
    }
}

/// Manifest plus frames in sample order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub manifest: DatasetManifest<T>,
    pub frames: Vec<GrayImage>,
}

/// Number of sweep positions `{0, step, …, d_max − step}`.
pub fn sweep_len<T: Scalar>(max_mm: T, step_mm: T) -> Result<usize> {
    if !(step_mm > T::zero()) {
        return Err(Error::InvalidParameter("step must be positive".into()));
    }
    let ratio = max_mm / step_mm;
    let n = ratio.round();
    if n < T::one() || (ratio - n).abs() > T::lit(1e-9) * ratio.max(T::one()) {
        return Err(Error::InvalidParameter(format!(
            "step {step_mm} mm does not divide {max_mm} mm"
        )));
    }
    Ok(n.to_usize().unwrap())
}

/// Stream purpose for the frames of `class`.
pub fn frame_purpose(class: &ClassInfo) -> String {
    format!("dataset/{}", class.name)
}

/// Frames for every class at every sweep position. Each frame draws its
/// randomness from its own `(seed, class name, index)` stream, so the
/// result does not depend on scheduling.
pub fn generate_dataset<T: Scalar>(
    channel: &Channel<T>,
    kind: DatasetKind,
    classes: Vec<ClassInfo>,
    step_mm: T,
) -> Result<Dataset<T>> {
    let per_class = sweep_len(channel.spec.max_displacement_mm, step_mm)?;
    let coupled = classes
        .iter()
        .map(|c| {
            let source = Superposition::equal(&c.charges, channel.spec.waist)?;
            channel.couple(&source)
        })
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..classes.len())
        .flat_map(|c| (0..per_class).map(move |k| (c, k)))
        .collect();
    let frames = jobs
        .par_iter()
        .map(|&(c, k)| {
            let d = step_mm * T::from_usize_lossy(k);
            let mut rng = stream(channel.spec.seed, &frame_purpose(&classes[c]), 0, k as u64);
            channel.transmit_coupled(&coupled[c], d, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let samples = jobs
        .iter()
        .map(|&(c, k)| SampleRecord {
            path: format!("frames/c{c:02}/f{k:04}.pgm"),
            label: c,
            displacement_mm: (step_mm * T::from_usize_lossy(k)).to_f64_lossy(),
            frame_index: k as u64,
        })
        .collect();
    Ok(Dataset {
        manifest: DatasetManifest {
            version: MANIFEST_VERSION,
            kind,
            classes,
            samples,
            channel: channel.spec,
            camera: channel.camera,
            step_mm,
            seed: channel.spec.seed,
        },
        frames,
    })
}

pub fn generate_single_mode_dataset<T: Scalar>(
    channel: &Channel<T>,
    charges: std::ops::RangeInclusive<i32>,
    step_mm: T,
) -> Result<Dataset<T>> {
    generate_dataset(channel, DatasetKind::SingleMode, single_mode_classes(charges), step_mm)
}

pub fn generate_superposition_dataset<T: Scalar>(
    channel: &Channel<T>,
    chars: &[u8],
    step_mm: T,
) -> Result<Dataset<T>> {
    generate_dataset(
        channel,
        DatasetKind::Superposition,
        character_classes(chars)?,
        step_mm,
    )
}

impl<T: Scalar + Serialize> Dataset<T> {
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.manifest
            .samples
            .par_iter()
            .zip(&self.frames)
            .try_for_each(|(s, frame)| {
                let path = dir.join(&s.path);
                if let Some(parent) = path.parent() {
                    fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                }
                frame.write(&path)
            })?;
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&self.manifest)?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

impl<T: Scalar + for<'de> Deserialize<'de>> Dataset<T> {
    /// Loads and validates a dataset directory.
    pub fn read(dir: &Path) -> Result<Self> {
        let manifest = read_manifest::<T>(dir)?;
        manifest.check_balanced()?;
        let frames = manifest
            .samples
            .par_iter()
            .map(|s| GrayImage::read(&dir.join(&s.path)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset { manifest, frames })
    }
}

pub fn read_manifest<T: Scalar + for<'de> Deserialize<'de>>(
    dir: &Path,
) -> Result<DatasetManifest<T>> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: DatasetManifest<T> = serde_json::from_str(&text)?;
    if manifest.version != MANIFEST_VERSION {
        return Err(Error::Dataset(format!(
            "unsupported manifest version {}",
            manifest.version
        )));
    }
    Ok(manifest)
}
