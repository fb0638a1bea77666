use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Default per-block channel widths of the detector.
pub const DEFAULT_CHANNELS: [usize; 5] = [16, 32, 64, 128, 256];

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

/// VGG-like stack: each block is a stride-1 then a stride-2 3x3 convolution,
/// both followed by leaky ReLU; then global average pooling, one fully
/// connected unit and a sigmoid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub input_size: usize,
    pub input_channels: usize,
    /// Output channels of each block.
    pub blocks: Vec<usize>,
    pub leaky_slope: f64,
}

/// One convolution of the stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvShape {
    pub c_in: usize,
    pub c_out: usize,
    pub stride: usize,
    pub h_in: usize,
    pub h_out: usize,
}

impl ConvShape {
    pub fn fan_in(&self) -> usize {
        self.c_in * 9
    }
}

impl ArchitectureSpec {
    /// Five blocks with the default channel ladder.
    pub fn standard(input_size: usize, input_channels: usize) -> Self {
        Self {
            input_size,
            input_channels,
            blocks: DEFAULT_CHANNELS.to_vec(),
            leaky_slope: DEFAULT_LEAKY_SLOPE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_channels != 1 && self.input_channels != 3 {
            return invalid(format!("input channels must be 1 or 3, got {}", self.input_channels));
        }
        if self.blocks.is_empty() || self.blocks.contains(&0) {
            return invalid("every block needs at least one channel");
        }
        if self.blocks.len() >= usize::BITS as usize || self.input_size >> self.blocks.len() == 0 {
            return invalid(format!(
                "input size {} vanishes after {} halvings",
                self.input_size,
                self.blocks.len()
            ));
        }
        if !(0.0..1.0).contains(&self.leaky_slope) {
            return invalid(format!("leaky slope must lie in [0, 1), got {}", self.leaky_slope));
        }
        Ok(())
    }

    /// Spatial side after each block: `floor(input / 2^k)`.
    pub fn block_sizes(&self) -> Vec<usize> {
        (1..=self.blocks.len()).map(|k| self.input_size >> k).collect()
    }

    /// Spatial side of the last feature map, before pooling.
    pub fn final_size(&self) -> usize {
        self.input_size >> self.blocks.len()
    }

    pub fn final_channels(&self) -> usize {
        *self.blocks.last().expect("validated architecture has blocks")
    }

    pub fn convs(&self) -> Vec<ConvShape> {
        let mut out = Vec::with_capacity(2 * self.blocks.len());
        let (mut c, mut h) = (self.input_channels, self.input_size);
        for &width in &self.blocks {
            out.push(ConvShape { c_in: c, c_out: width, stride: 1, h_in: h, h_out: h });
            out.push(ConvShape { c_in: width, c_out: width, stride: 2, h_in: h, h_out: h / 2 });
            c = width;
            h /= 2;
        }
        out
    }
}
