use std::ops::Range;

use crate::error::{invalid, Result};
use crate::frame::{max_level, BitDepth, Frame};

/// Default number of rows averaged into one trace.
pub const TRACE_ROWS: usize = 20;

/// Column profile of rows `row..row + rows`, averaged, over `span`.
pub fn trace_profile(image: &Frame, row: usize, rows: usize, span: Range<usize>) -> Result<Vec<f64>> {
    if image.channels() != 1 {
        return invalid("trace needs a single-channel image");
    }
    if rows == 0 || row + rows > image.height() {
        return invalid(format!("rows {row}..{} outside image of height {}", row + rows, image.height()));
    }
    if span.is_empty() || span.end > image.width() {
        return invalid(format!("span {span:?} outside image of width {}", image.width()));
    }
    let inv = 1.0 / rows as f64;
    Ok(span.map(|x| (row..row + rows).map(|y| image.get(x, y, 0)).sum::<f64>() * inv).collect())
}

/// Peak-to-valley difference of a profile relative to `full_scale`.
pub fn profile_contrast(profile: &[f64], full_scale: f64) -> f64 {
    let max = profile.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = profile.iter().copied().fold(f64::INFINITY, f64::min);
    (max - min) / full_scale
}

/// Peak-to-valley contrast of a row-averaged trace, normalised by the
/// sensor's full scale `2^n_bit - 1`.
pub fn trace_contrast(image: &Frame, row: usize, rows: usize, span: Range<usize>) -> Result<f64> {
    let Some(n_bit) = image.n_bit() else {
        return invalid("trace contrast needs a quantized image to define full scale");
    };
    Ok(profile_contrast(&trace_profile(image, row, rows, span)?, max_level(n_bit)))
}

/// Vertical bars of `bar_width` pixels alternating `bright` and `dark`,
/// starting bright at column 0.
pub fn bar_target(width: usize, height: usize, bar_width: usize, bright: f64, dark: f64, n_bit: u8) -> Result<Frame> {
    if bar_width == 0 {
        return invalid("bar width must be at least 1");
    }
    let data = (0..height)
        .flat_map(|_| (0..width).map(|x| if (x / bar_width).is_multiple_of(2) { bright } else { dark }))
        .collect();
    Frame::new(width, height, 1, BitDepth::Quantized(n_bit), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bar_target_contrast() {
        let f = bar_target(64, 40, 8, 242.0, 13.0, 8).unwrap();
        let c = trace_contrast(&f, 0, TRACE_ROWS, 0..64).unwrap();
        assert!((c - 229.0 / 255.0).abs() < 1e-12);
        assert!((c - 0.898).abs() < 1e-3);
    }

    #[test]
    fn constant_image_has_no_contrast() {
        let f = Frame::filled(32, 32, 1, BitDepth::Quantized(8), 100.0).unwrap();
        assert_eq!(trace_contrast(&f, 5, TRACE_ROWS, 0..32).unwrap(), 0.0);
    }

    #[test]
    fn out_of_range_requests() {
        let f = Frame::filled(32, 32, 1, BitDepth::Quantized(8), 100.0).unwrap();
        assert!(trace_contrast(&f, 20, TRACE_ROWS, 0..32).is_err());
        assert!(trace_contrast(&f, 0, TRACE_ROWS, 10..40).is_err());
        assert!(trace_contrast(&f, 0, TRACE_ROWS, 5..5).is_err());
        assert!(trace_contrast(&f.to_real(), 0, TRACE_ROWS, 0..32).is_err());
    }
}
