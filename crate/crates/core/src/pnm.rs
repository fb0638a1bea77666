//! Binary PGM (P5) and PPM (P6) reading and writing.
//!
//! Samples wider than 8 bits are stored as 16-bit big-endian words, as the
//! Netpbm format requires.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::frame::{BitDepth, Frame};

pub fn encode(frame: &Frame) -> Result<Vec<u8>> {
    let n_bit = frame
        .n_bit()
        .ok_or_else(|| Error::Format("only quantized frames can be written as PNM".into()))?;
    let magic = match frame.channels() {
        1 => "P5",
        3 => "P6",
        c => return Err(Error::Format(format!("{c}-channel frames have no PNM encoding"))),
    };
    let maxval = (1u32 << n_bit) - 1;
    let mut out = Vec::with_capacity(frame.data().len() * 2 + 32);
    write!(out, "{magic}\n{} {}\n{maxval}\n", frame.width(), frame.height())?;
    if maxval < 256 {
        out.extend(frame.data().iter().map(|&v| v as u8));
    } else {
        for &v in frame.data() {
            out.extend_from_slice(&(v as u16).to_be_bytes());
        }
    }
    Ok(out)
}

pub fn write(path: impl AsRef<Path>, frame: &Frame) -> Result<()> {
    fs::write(path, encode(frame)?)?;
    Ok(())
}

pub fn read(path: impl AsRef<Path>) -> Result<Frame> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::Load { path: path.to_path_buf(), reason: e.to_string() })?;
    decode(&bytes)
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format(format!("bad {what} in PNM header")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Frame> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(Error::Format("expected binary PGM (P5) or PPM (P6)".into())),
    };
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")? as usize;
    let height = h.number("height")? as usize;
    let maxval = h.number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("maxval {maxval} outside 1..=65535")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(h.pos) {
        Some(b) if b.is_ascii_whitespace() => h.pos += 1,
        _ => return Err(Error::Format("missing whitespace after maxval".into())),
    }
    let n_bit = (32 - maxval.leading_zeros()) as u8;
    let count = width * height * channels;
    let raster = &bytes[h.pos..];
    let data: Vec<f64> = if maxval < 256 {
        if raster.len() < count {
            return Err(Error::Format("truncated raster".into()));
        }
        raster[..count].iter().map(|&b| b as f64).collect()
    } else {
        if raster.len() < 2 * count {
            return Err(Error::Format("truncated raster".into()));
        }
        raster[..2 * count]
            .chunks_exact(2)
            .map(|w| u16::from_be_bytes([w[0], w[1]]) as f64)
            .collect()
    };
    if let Some(v) = data.iter().find(|&&v| v > maxval as f64) {
        return Err(Error::Format(format!("sample {v} exceeds maxval {maxval}")));
    }
    Frame::new(width, height, channels, BitDepth::Quantized(n_bit), data)
}
