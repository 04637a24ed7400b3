//! End-to-end transmission: encode, send through the channel, classify
//! each frame, decode, and report.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{capture, CameraSpec, Channel};
use crate::codec::{
    decode_bitwise, encode_bitwise, encode_bytewise, image_to_symbols, mse, symbols_to_image,
    SymbolKind, SymbolRecord, ZeroBitPolicy,
};
use crate::dataset::{parse_charge_name, single_mode_classes};
use crate::field::{sample, Superposition};
use crate::nn::{argmax, downsample_9x7, Mlp};
use crate::pgm::GrayImage;
use crate::rng::stream;
use crate::{Error, Result, Scalar};

/// Displacement applied to each transmitted frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrainSchedule {
    Fixed(f64),
    /// Uniform in `[0, d_max]`, drawn per frame from the run seed.
    #[default]
    Random,
    /// Linear from 0 to `d_max` across the transmission.
    Ramp,
}

impl FromStr for StrainSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(StrainSchedule::Random),
            "ramp" => Ok(StrainSchedule::Ramp),
            _ => {
                let mm = s
                    .strip_prefix("fixed:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        Error::InvalidParameter(format!(
                            "strain schedule must be fixed:<mm>, random or ramp, got {s:?}"
                        ))
                    })?;
                Ok(StrainSchedule::Fixed(mm))
            }
        }
    }
}

impl fmt::Display for StrainSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrainSchedule::Fixed(mm) => write!(f, "fixed:{mm}"),
            StrainSchedule::Random => f.write_str("random"),
            StrainSchedule::Ramp => f.write_str("ramp"),
        }
    }
}

impl StrainSchedule {
    pub fn displacement<T: Scalar>(&self, slot: usize, n_slots: usize, d_max: T, seed: u64) -> Result<T> {
        let d = match *self {
            StrainSchedule::Fixed(mm) => T::lit(mm),
            StrainSchedule::Random => {
                let u: f64 = stream(seed, "strain", 0, slot as u64).random();
                d_max * T::lit(u)
            }
            StrainSchedule::Ramp if n_slots > 1 => {
                d_max * T::from_usize_lossy(slot) / T::from_usize_lossy(n_slots - 1)
            }
            StrainSchedule::Ramp => T::zero(),
        };
        if !(d >= T::zero() && d <= d_max) {
            return Err(Error::DisplacementOutOfRange {
                d: d.to_f64_lossy(),
                max: d_max.to_f64_lossy(),
            });
        }
        Ok(d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransmissionMode {
    Bitwise,
    Bytewise,
}

impl FromStr for TransmissionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bitwise" => Ok(TransmissionMode::Bitwise),
            "bytewise" => Ok(TransmissionMode::Bytewise),
            _ => Err(Error::InvalidParameter(format!(
                "mode must be bitwise or bytewise, got {s:?}"
            ))),
        }
    }
}

/// How one frame fared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolOutcome {
    pub slot: usize,
    pub char_index: usize,
    pub kind: SymbolKind,
    pub charges: Vec<i32>,
    pub displacement_mm: f64,
    pub expected: String,
    pub predicted: String,
    pub confidence: f64,
    pub correct: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageInfo {
    pub width: usize,
    pub height: usize,
    /// The input had levels other than 0 and 255 and was thresholded.
    pub thresholded: bool,
}

/// Everything a transmission produced. `mse` is `mse(decoded, sent)` and is
/// absent for an empty payload. Wall-clock timing is deliberately not part
/// of the report so identical runs give identical reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionReport {
    pub mode: TransmissionMode,
    pub strain: StrainSchedule,
    pub seed: u64,
    pub sent: Vec<u8>,
    pub decoded: Vec<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sent_text: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decoded_text: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image: Option<ImageInfo>,
    pub symbols: Vec<SymbolOutcome>,
    pub symbol_accuracy: Option<f64>,
    pub mse: Option<f64>,
    pub warnings: Vec<String>,
}

impl TransmissionReport {
    pub fn exact(&self) -> bool {
        self.sent == self.decoded
    }
}

/// Name of the classifier class a record should be read as.
fn expected_class(record: &SymbolRecord) -> String {
    match record.kind {
        SymbolKind::SingleMode | SymbolKind::ZeroBit => {
            single_mode_classes(record.charges.iter().copied())[0].name.clone()
        }
        SymbolKind::Superposition => {
            let byte = crate::codec::charges_to_byte(&record.charges).expect("alphabet charges");
            (byte as char).to_string()
        }
        SymbolKind::Null => NULL_CLASS.to_string(),
    }
}

/// Label reported for a blank frame (the 0x00 character).
pub const NULL_CLASS: &str = "<null>";

/// Sends `records` one frame each and classifies what comes out.
fn transmit_records<T: Scalar>(
    channel: &Channel<T>,
    model: &Mlp<T>,
    records: &[SymbolRecord],
    strain: StrainSchedule,
    seed: u64,
) -> Result<Vec<SymbolOutcome>> {
    for r in records {
        let want = expected_class(r);
        if r.kind != SymbolKind::Null && !model.class_names.contains(&want) {
            return Err(Error::InvalidParameter(format!(
                "model has no class {want:?}; it was trained on {:?}",
                model.class_names
            )));
        }
    }
    let n = records.len();
    records
        .par_iter()
        .map(|r| {
            let d = strain.displacement(r.slot, n, channel.spec.max_displacement_mm, seed)?;
            let expected = expected_class(r);
            let (predicted, confidence) = if r.kind == SymbolKind::Null {
                // a blank frame is recognised without the classifier
                (NULL_CLASS.to_string(), 1.0)
            } else {
                let source = Superposition::equal(&r.charges, channel.spec.waist)?;
                let c_in = channel.couple(&source)?;
                let mut rng = stream(seed, "transmit", 0, r.slot as u64);
                let frame = channel.transmit_coupled(&c_in, d, &mut rng)?;
                let p = model.forward(&downsample_9x7(&frame)?)?;
                let k = argmax(&p);
                (model.class_names[k].clone(), p[k].to_f64_lossy())
            };
            Ok(SymbolOutcome {
                slot: r.slot,
                char_index: r.char_index,
                kind: r.kind,
                charges: r.charges.clone(),
                displacement_mm: d.to_f64_lossy(),
                correct: predicted == expected,
                expected,
                predicted,
                confidence,
            })
        })
        .collect()
}

fn symbol_accuracy(symbols: &[SymbolOutcome]) -> Option<f64> {
    (!symbols.is_empty())
        .then(|| symbols.iter().filter(|s| s.correct).count() as f64 / symbols.len() as f64)
}

/// Bytes recovered from bytewise outcomes; unreadable labels become 0x00.
fn decode_bytewise_outcomes(symbols: &[SymbolOutcome], warnings: &mut Vec<String>) -> Vec<u8> {
    symbols
        .iter()
        .map(|s| match s.predicted.as_bytes() {
            [b] => *b,
            _ if s.predicted == NULL_CLASS => 0,
            _ => {
                warnings.push(format!("slot {}: class {:?} is not a character", s.slot, s.predicted));
                0
            }
        })
        .collect()
}

/// Sends `text` through `channel` and decodes it with `model`.
pub fn send_text<T: Scalar>(
    channel: &Channel<T>,
    model: &Mlp<T>,
    text: &[u8],
    mode: TransmissionMode,
    strain: StrainSchedule,
    seed: u64,
) -> Result<TransmissionReport> {
    let mut warnings = Vec::new();
    let (symbols, decoded) = match mode {
        TransmissionMode::Bitwise => {
            let records = encode_bitwise(text, ZeroBitPolicy::Silent);
            let symbols = transmit_records(channel, model, &records, strain, seed)?;
            let mut classified = Vec::new();
            for s in &symbols {
                match parse_charge_name(&s.predicted) {
                    Some(c) if (0..=8).contains(&c) => classified.push((s.char_index, c)),
                    _ => warnings.push(format!(
                        "slot {}: class {:?} carries no bit",
                        s.slot, s.predicted
                    )),
                }
            }
            let out = decode_bitwise(&classified, text.len())?;
            warnings.extend(out.warnings);
            (symbols, out.bytes)
        }
        TransmissionMode::Bytewise => {
            let records = encode_bytewise(text);
            let symbols = transmit_records(channel, model, &records, strain, seed)?;
            let decoded = decode_bytewise_outcomes(&symbols, &mut warnings);
            (symbols, decoded)
        }
    };
    let mse_value = if text.is_empty() {
        warnings.push("empty message: MSE undefined".into());
        None
    } else {
        Some(mse::<f64>(&decoded, text)?)
    };
    Ok(TransmissionReport {
        mode,
        strain,
        seed,
        sent: text.to_vec(),
        sent_text: Some(String::from_utf8_lossy(text).into_owned()),
        decoded_text: Some(String::from_utf8_lossy(&decoded).into_owned()),
        decoded,
        image: None,
        symbol_accuracy: symbol_accuracy(&symbols),
        symbols,
        mse: mse_value,
        warnings,
    })
}

/// Sends a binary image pixel by pixel as `'1'`/`'0'` characters and
/// rebuilds it. `sent` and `decoded` hold pixel values (0 or 255).
pub fn send_image<T: Scalar>(
    channel: &Channel<T>,
    model: &Mlp<T>,
    img: &GrayImage,
    strain: StrainSchedule,
    seed: u64,
) -> Result<(GrayImage, TransmissionReport)> {
    let (symbols_in, thresholded) = image_to_symbols(img);
    let mut warnings = Vec::new();
    if thresholded {
        warnings.push("input is not two-level; thresholded at 128".into());
    }
    let sent = symbols_to_image(&symbols_in, img.width, img.height)?;
    let records = encode_bytewise(&symbols_in);
    let symbols = transmit_records(channel, model, &records, strain, seed)?;
    let symbols_out = decode_bytewise_outcomes(&symbols, &mut warnings);
    let received = symbols_to_image(&symbols_out, img.width, img.height)?;
    let mse_value = if sent.pixels.is_empty() {
        None
    } else {
        Some(mse::<f64>(&received.pixels, &sent.pixels)?)
    };
    let report = TransmissionReport {
        mode: TransmissionMode::Bytewise,
        strain,
        seed,
        sent: sent.pixels,
        decoded: received.pixels.clone(),
        sent_text: None,
        decoded_text: None,
        image: Some(ImageInfo {
            width: img.width,
            height: img.height,
            thresholded,
        }),
        symbol_accuracy: symbol_accuracy(&symbols),
        symbols,
        mse: mse_value,
        warnings,
    };
    Ok((received, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenderStage {
    /// The injected beam as the sensor would see it, noiseless.
    Input,
    /// The fiber output at displacement `d`, with sensor noise.
    Encrypted,
}

impl FromStr for RenderStage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "input" => Ok(RenderStage::Input),
            "encrypted" => Ok(RenderStage::Encrypted),
            _ => Err(Error::InvalidParameter(format!(
                "stage must be input or encrypted, got {s:?}"
            ))),
        }
    }
}

/// Intensity frame of the superposition of `charges` at `stage`.
pub fn render<T: Scalar>(
    channel: &Channel<T>,
    charges: &[i32],
    stage: RenderStage,
    d: T,
    seed: u64,
) -> Result<GrayImage> {
    let source = Superposition::equal(charges, channel.spec.waist)?;
    match stage {
        RenderStage::Input => {
            let camera = CameraSpec {
                noise_sigma: T::zero(),
                ..channel.camera
            };
            let field = sample(&source, &camera.grid()?);
            capture(&field, &camera, &mut stream(seed, "render", 0, 0))
        }
        RenderStage::Encrypted => {
            let c_in = channel.couple(&source)?;
            channel.transmit_coupled(&c_in, d, &mut stream(seed, "render", 0, 0))
        }
    }
}
