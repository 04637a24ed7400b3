//! Netpbm grayscale (PGM) and colour (PPM) images, 8-bit only.

use std::fs;
use std::path::Path;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    /// Interleaved R, G, B.
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::LengthMismatch {
                expected: width * height,
                got: pixels.len(),
            });
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        GrayImage {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn get(&self, col: usize, row: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    /// Binary P5 encoding.
    pub fn to_p5(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_p5()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&bytes)
    }

    /// Accepts P5 (binary) and P2 (ASCII) with maxval ≤ 255; values are
    /// rescaled to 0–255 when maxval < 255.
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let mut hdr = Header::new(bytes);
        let magic = hdr.token()?;
        let (w, h, maxval) = (hdr.number()?, hdr.number()?, hdr.number()?);
        if maxval == 0 || maxval > 255 {
            return Err(fmt_err(format!("unsupported maxval {maxval}")));
        }
        let n = w * h;
        let raw: Vec<usize> = match magic.as_str() {
            "P5" => {
                let start = hdr.pos + 1;
                let body = bytes
                    .get(start..start + n)
                    .ok_or_else(|| fmt_err("truncated pixel data".into()))?;
                body.iter().map(|&b| b as usize).collect()
            }
            "P2" => (0..n).map(|_| hdr.number()).collect::<Result<_>>()?,
            other => return Err(fmt_err(format!("not a PGM file (magic {other})"))),
        };
        let pixels = raw
            .into_iter()
            .map(|v| {
                if v > maxval {
                    Err(fmt_err(format!("sample {v} exceeds maxval {maxval}")))
                } else {
                    Ok(((v * 255 + maxval / 2) / maxval) as u8)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        GrayImage::new(w, h, pixels)
    }
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != 3 * width * height {
            return Err(Error::LengthMismatch {
                expected: 3 * width * height,
                got: pixels.len(),
            });
        }
        Ok(RgbImage {
            width,
            height,
            pixels,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&bytes)
    }

    /// Binary P6 with maxval 255.
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let mut hdr = Header::new(bytes);
        let magic = hdr.token()?;
        if magic != "P6" {
            return Err(fmt_err(format!("not a binary PPM file (magic {magic})")));
        }
        let (w, h, maxval) = (hdr.number()?, hdr.number()?, hdr.number()?);
        if maxval != 255 {
            return Err(fmt_err(format!("unsupported maxval {maxval}")));
        }
        let start = hdr.pos + 1;
        let body = bytes
            .get(start..start + 3 * w * h)
            .ok_or_else(|| fmt_err("truncated pixel data".into()))?;
        RgbImage::new(w, h, body.to_vec())
    }

    pub fn to_p6(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

fn fmt_err(detail: String) -> Error {
    Error::Format {
        kind: "netpbm",
        detail,
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Header<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Header { bytes, pos: 0 }
    }

    // leaves `pos` on the single whitespace byte that ends the token
    fn token(&mut self) -> Result<String> {
        loop {
            match self.bytes.get(self.pos) {
                Some(b'#') => {
                    while !matches!(self.bytes.get(self.pos), Some(b'\n') | None) {
                        self.pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(_) => break,
                None => return Err(fmt_err("unexpected end of header".into())),
            }
        }
        let start = self.pos;
        while matches!(self.bytes.get(self.pos), Some(b) if !b.is_ascii_whitespace()) {
            self.pos += 1;
        }
        if self.pos >= self.bytes.len() && self.pos == start {
            return Err(fmt_err("unexpected end of header".into()));
        }
        Ok(String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned())
    }

    fn number(&mut self) -> Result<usize> {
        let t = self.token()?;
        t.parse()
            .map_err(|_| fmt_err(format!("expected a number, found {t:?}")))
    }
}
