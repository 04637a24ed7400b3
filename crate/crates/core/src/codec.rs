//! ASCII ↔ OAM alphabet: bit position `k` (1 = MSB) is carried by the LG
//! charge `+k`. Characters travel either one mode per set bit (bit-by-bit)
//! or as a single equal-weight superposition of their modes (byte-by-byte).

use serde::{Deserialize, Serialize};

use crate::pgm::GrayImage;
use crate::{Error, Result, Scalar};

pub const BITS: u8 = 8;

/// Charge carrying bit position `k ∈ 1..=8` (1 = MSB).
pub fn charge_for_bit(k: u8) -> i32 {
    assert!((1..=BITS).contains(&k), "bit position {k} outside 1..=8");
    k as i32
}

/// Inverse of [`charge_for_bit`].
pub fn bit_for_charge(charge: i32) -> Option<u8> {
    (1..=BITS as i32).contains(&charge).then_some(charge as u8)
}

/// Charges of the set bits of `byte`, ascending.
pub fn char_to_charges(byte: u8) -> Vec<i32> {
    (1..=BITS)
        .filter(|&k| byte & (1 << (BITS - k)) != 0)
        .map(charge_for_bit)
        .collect()
}

/// Byte whose set bits are exactly `charges`. Duplicates are tolerated.
pub fn charges_to_byte(charges: &[i32]) -> Result<u8> {
    charges.iter().try_fold(0u8, |acc, &c| {
        let k = bit_for_charge(c)
            .ok_or_else(|| Error::InvalidParameter(format!("charge {c} is not a bit mode")))?;
        Ok(acc | (1 << (BITS - k)))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolKind {
    SingleMode,
    Superposition,
    /// Explicit ℓ = 0 marker for a cleared bit (optional bit-by-bit policy).
    ZeroBit,
    /// Blank frame standing in for 0x00 in byte-by-byte mode.
    Null,
}

/// One transmitted frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolRecord {
    pub slot: usize,
    pub kind: SymbolKind,
    pub charges: Vec<i32>,
    pub char_index: usize,
}

pub type SymbolSequence = Vec<SymbolRecord>;

/// What a cleared bit puts on the wire in bit-by-bit mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroBitPolicy {
    /// Nothing; character boundaries travel in record metadata.
    #[default]
    Silent,
    /// A dedicated ℓ = 0 frame per cleared bit.
    Symbol,
}

pub fn encode_bitwise(text: &[u8], policy: ZeroBitPolicy) -> SymbolSequence {
    let mut out = Vec::new();
    for (char_index, &byte) in text.iter().enumerate() {
        for k in 1..=BITS {
            let set = byte & (1 << (BITS - k)) != 0;
            let (kind, charges) = match (set, policy) {
                (true, _) => (SymbolKind::SingleMode, vec![charge_for_bit(k)]),
                (false, ZeroBitPolicy::Symbol) => (SymbolKind::ZeroBit, vec![0]),
                (false, ZeroBitPolicy::Silent) => continue,
            };
            out.push(SymbolRecord {
                slot: out.len(),
                kind,
                charges,
                char_index,
            });
        }
    }
    out
}

pub fn encode_bytewise(text: &[u8]) -> SymbolSequence {
    text.iter()
        .enumerate()
        .map(|(i, &byte)| {
            let charges = char_to_charges(byte);
            let kind = if charges.is_empty() {
                SymbolKind::Null
            } else {
                SymbolKind::Superposition
            };
            SymbolRecord {
                slot: i,
                kind,
                charges,
                char_index: i,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Decoded {
    pub bytes: Vec<u8>,
    pub warnings: Vec<String>,
}

/// Rebuilds `n_chars` bytes from `(char_index, charge)` classifications.
/// Charge 0 (the optional cleared-bit marker) sets nothing.
pub fn decode_bitwise(classified: &[(usize, i32)], n_chars: usize) -> Result<Decoded> {
    let mut bytes = vec![0u8; n_chars];
    let mut warnings = Vec::new();
    for &(idx, charge) in classified {
        if idx >= n_chars {
            return Err(Error::InvalidParameter(format!(
                "character index {idx} beyond message length {n_chars}"
            )));
        }
        if charge == 0 {
            continue;
        }
        let k = bit_for_charge(charge)
            .ok_or_else(|| Error::InvalidParameter(format!("charge {charge} is not a bit mode")))?;
        let mask = 1 << (BITS - k);
        if bytes[idx] & mask != 0 {
            warnings.push(format!("character {idx}: bit {k} already set"));
        }
        bytes[idx] |= mask;
    }
    Ok(Decoded { bytes, warnings })
}

/// Maps classifier outputs to characters via `alphabet[class_id]`.
pub fn decode_bytewise(class_ids: &[usize], alphabet: &[u8]) -> Result<Vec<u8>> {
    class_ids
        .iter()
        .map(|&id| alphabet.get(id).copied().ok_or(Error::UnknownClass(id)))
        .collect()
}

pub const WHITE_SYMBOL: u8 = b'1';
pub const BLACK_SYMBOL: u8 = b'0';

/// Binary image → one character per pixel, row-major. Pixels ≥ 128 are
/// white. The flag reports whether any pixel was neither 0 nor 255.
pub fn image_to_symbols(img: &GrayImage) -> (Vec<u8>, bool) {
    let thresholded = img.pixels.iter().any(|&p| p != 0 && p != 255);
    let bytes = img
        .pixels
        .iter()
        .map(|&p| if p >= 128 { WHITE_SYMBOL } else { BLACK_SYMBOL })
        .collect();
    (bytes, thresholded)
}

/// Inverse of [`image_to_symbols`]; anything other than `'1'` is black.
pub fn symbols_to_image(symbols: &[u8], width: usize, height: usize) -> Result<GrayImage> {
    let pixels = symbols
        .iter()
        .map(|&b| if b == WHITE_SYMBOL { 255 } else { 0 })
        .collect();
    GrayImage::new(width, height, pixels)
}

/// `(1/n)·Σ(ŷᵢ − yᵢ)²` over received `y_hat` and transmitted `y`.
pub fn mse<T: Scalar>(y_hat: &[u8], y: &[u8]) -> Result<T> {
    if y_hat.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: y.len(),
            got: y_hat.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::Empty("byte vectors"));
    }
    let sum: u64 = y_hat
        .iter()
        .zip(y)
        .map(|(&a, &b)| {
            let e = a as i64 - b as i64;
            (e * e) as u64
        })
        .sum();
    Ok(T::from_u64(sum).unwrap() / T::from_usize_lossy(y.len()))
}
