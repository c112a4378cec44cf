//! Binary PGM (P5) image files at 8 or 16 bits per pixel.
//!
//! In-memory images are column-major `f64` slices in `[0, 1]` indexed
//! as `data[col * height + row]`; the file raster is row-major with
//! 16-bit samples stored big-endian, so these functions transpose and
//! quantize at the boundary.

use std::fs;
use std::io::{self, Read as _};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a binary PGM file (expected magic 'P5')")]
    BadMagic,
    #[error("malformed header field: {0}")]
    BadHeader(String),
    #[error("unsupported maximum sample value {0} (expected 1..=65535)")]
    UnsupportedMaxval(u64),
    #[error("raster ended early: expected {expected} bytes, found {got}")]
    Truncated { expected: usize, got: usize },
    #[error("image dimensions must be positive")]
    EmptyImage,
    #[error("pixel buffer has length {got}, dimensions imply {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("pixel values must be finite")]
    NonFinitePixel,
}

/// Bytes per sample when writing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgmDepth {
    Eight,
    Sixteen,
}

impl PgmDepth {
    fn maxval(self) -> u32 {
        match self {
            PgmDepth::Eight => 255,
            PgmDepth::Sixteen => 65_535,
        }
    }
}

/// Writes a column-major image, clipping values into `[0, 1]` and
/// rounding to the nearest representable sample.
pub fn write_pgm(
    path: &Path,
    width: usize,
    height: usize,
    data: &[f64],
    depth: PgmDepth,
) -> Result<(), PgmError> {
    if width == 0 || height == 0 {
        return Err(PgmError::EmptyImage);
    }
    if data.len() != width * height {
        return Err(PgmError::SizeMismatch {
            expected: width * height,
            got: data.len(),
        });
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(PgmError::NonFinitePixel);
    }
    let maxval = depth.maxval();
    let mut bytes = Vec::with_capacity(
        32 + width
            * height
            * match depth {
                PgmDepth::Eight => 1,
                PgmDepth::Sixteen => 2,
            },
    );
    bytes.extend_from_slice(format!("P5\n{width} {height}\n{maxval}\n").as_bytes());
    for row in 0..height {
        for col in 0..width {
            let v = data[col * height + row].clamp(0.0, 1.0);
            let sample = (v * maxval as f64).round() as u32;
            match depth {
                PgmDepth::Eight => bytes.push(sample as u8),
                PgmDepth::Sixteen => bytes.extend_from_slice(&(sample as u16).to_be_bytes()),
            }
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// Reads a binary PGM file, returning `(width, height, data)` with the
/// samples rescaled into `[0, 1]` and arranged column-major.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<f64>), PgmError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut cursor = 0usize;

    if bytes.len() < 2 || &bytes[0..2] != b"P5" {
        return Err(PgmError::BadMagic);
    }
    cursor += 2;

    let width = parse_header_number(&bytes, &mut cursor)?;
    let height = parse_header_number(&bytes, &mut cursor)?;
    let maxval = parse_header_number(&bytes, &mut cursor)?;
    if width == 0 || height == 0 {
        return Err(PgmError::EmptyImage);
    }
    if maxval == 0 || maxval > 65_535 {
        return Err(PgmError::UnsupportedMaxval(maxval));
    }
    // Exactly one whitespace byte separates the header from the raster.
    cursor += 1;

    let (width, height) = (width as usize, height as usize);
    let bytes_per_sample = if maxval > 255 { 2 } else { 1 };
    let expected = width * height * bytes_per_sample;
    let raster = bytes
        .get(cursor..cursor + expected)
        .ok_or(PgmError::Truncated {
            expected,
            got: bytes.len().saturating_sub(cursor),
        })?;

    let scale = 1.0 / maxval as f64;
    let mut data = vec![0.0; width * height];
    for row in 0..height {
        for col in 0..width {
            let k = row * width + col;
            let sample = if bytes_per_sample == 2 {
                u16::from_be_bytes([raster[2 * k], raster[2 * k + 1]]) as f64
            } else {
                raster[k] as f64
            };
            data[col * height + row] = sample * scale;
        }
    }
    Ok((width, height, data))
}

/// Reads one ASCII integer, skipping whitespace and `#` comment lines.
fn parse_header_number(bytes: &[u8], cursor: &mut usize) -> Result<u64, PgmError> {
    loop {
        match bytes.get(*cursor) {
            Some(b) if b.is_ascii_whitespace() => *cursor += 1,
            Some(b'#') => {
                while let Some(&b) = bytes.get(*cursor) {
                    *cursor += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            }
            Some(_) => break,
            None => return Err(PgmError::BadHeader("unexpected end of header".into())),
        }
    }
    let start = *cursor;
    while bytes.get(*cursor).is_some_and(|b| b.is_ascii_digit()) {
        *cursor += 1;
    }
    if *cursor == start {
        return Err(PgmError::BadHeader(format!(
            "expected a digit at byte {start}"
        )));
    }
    let text = std::str::from_utf8(&bytes[start..*cursor]).expect("ascii digits are valid utf-8");
    text.parse::<u64>()
        .map_err(|_| PgmError::BadHeader(format!("number out of range: {text}")))
}
