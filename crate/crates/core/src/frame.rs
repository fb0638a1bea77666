use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Sample representation of a [`Frame`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BitDepth {
    /// Integer digital numbers in `[0, 2^n_bit - 1]`.
    Quantized(u8),
    /// Real-valued intensities, not yet digitized.
    Real,
}

/// Interleaved image buffer, row-major, `channels` samples per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    channels: usize,
    depth: BitDepth,
    data: Vec<f64>,
}

impl Frame {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        depth: BitDepth,
        data: Vec<f64>,
    ) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return invalid(format!("frames carry 1 or 3 channels, got {channels}"));
        }
        if data.len() != width * height * channels {
            return invalid(format!(
                "frame data length {} does not match {width}x{height}x{channels}",
                data.len()
            ));
        }
        if let BitDepth::Quantized(n_bit) = depth {
            if !(1..=16).contains(&n_bit) {
                return invalid(format!("bit depth {n_bit} outside 1..=16"));
            }
            let max = max_level(n_bit);
            if let Some(v) = data.iter().find(|&&v| v.fract() != 0.0 || v < 0.0 || v > max) {
                return invalid(format!("value {v} is not a {n_bit}-bit digital number"));
            }
        }
        Ok(Self { width, height, channels, depth, data })
    }

    /// Constant frame.
    pub fn filled(width: usize, height: usize, channels: usize, depth: BitDepth, value: f64) -> Result<Self> {
        Self::new(width, height, channels, depth, vec![value; width * height * channels])
    }

    /// Grayscale real-valued frame built from a pixel function.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, channels: 1, depth: BitDepth::Real, data }
    }

    pub(crate) fn from_parts_unchecked(
        width: usize,
        height: usize,
        channels: usize,
        depth: BitDepth,
        data: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(data.len(), width * height * channels);
        Self { width, height, channels, depth, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn depth(&self) -> BitDepth {
        self.depth
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Bit depth when quantized.
    pub fn n_bit(&self) -> Option<u8> {
        match self.depth {
            BitDepth::Quantized(n) => Some(n),
            BitDepth::Real => None,
        }
    }

    /// `(width, height, channels)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.channels)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Copy out a `w`x`h` window whose top-left corner is `(x, y)`.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<Frame> {
        if x + w > self.width || y + h > self.height {
            return invalid(format!(
                "crop {w}x{h} at ({x},{y}) exceeds {}x{} frame",
                self.width, self.height
            ));
        }
        let c = self.channels;
        let mut data = Vec::with_capacity(w * h * c);
        for row in y..y + h {
            let start = (row * self.width + x) * c;
            data.extend_from_slice(&self.data[start..start + w * c]);
        }
        Ok(Frame { width: w, height: h, channels: c, depth: self.depth, data })
    }

    /// Samples scaled to `[0, 1]` by the full-scale value of the bit depth.
    /// Real frames are passed through unscaled.
    pub fn normalized(&self) -> Vec<f64> {
        match self.depth {
            BitDepth::Quantized(n) => {
                let scale = 1.0 / max_level(n);
                self.data.iter().map(|v| v * scale).collect()
            }
            BitDepth::Real => self.data.clone(),
        }
    }

    /// Same pixels tagged as real-valued.
    pub fn to_real(&self) -> Frame {
        Frame { depth: BitDepth::Real, ..self.clone() }
    }
}

/// Largest digital number at `n_bit`.
#[inline]
pub fn max_level(n_bit: u8) -> f64 {
    ((1u32 << n_bit) - 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_lengths_and_values() {
        assert!(Frame::new(2, 2, 1, BitDepth::Real, vec![0.0; 3]).is_err());
        assert!(Frame::new(1, 1, 2, BitDepth::Real, vec![0.0; 2]).is_err());
        assert!(Frame::new(1, 1, 1, BitDepth::Quantized(8), vec![256.0]).is_err());
        assert!(Frame::new(1, 1, 1, BitDepth::Quantized(8), vec![1.5]).is_err());
        assert!(Frame::new(1, 1, 1, BitDepth::Quantized(8), vec![255.0]).is_ok());
    }

    #[test]
    fn crop_copies_window() {
        let f = Frame::from_fn(4, 3, |x, y| (y * 4 + x) as f64);
        let c = f.crop(1, 1, 2, 2).unwrap();
        assert_eq!(c.data(), &[5.0, 6.0, 9.0, 10.0]);
        assert!(f.crop(3, 0, 2, 1).is_err());
    }
}
