use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::frame::{BitDepth, Frame};
use crate::nn::PatchScorer;
use crate::phantom::{Annotation, AnnotationClass};
use crate::pnm;

/// Window probabilities indexed by window top-left position, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub window: usize,
    pub step: usize,
    pub frame_width: usize,
    pub frame_height: usize,
    pub cols: usize,
    pub rows: usize,
    pub values: Vec<f64>,
}

/// Target detection tally for one heatmap.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HitRate {
    pub targets: usize,
    /// Targets lying inside some cell's display block.
    pub covered: usize,
    pub hits: usize,
}

impl HitRate {
    /// Share of covered targets that were hit.
    pub fn fraction(&self) -> f64 {
        self.hits as f64 / self.covered.max(1) as f64
    }
}

/// Number of window positions along an axis.
pub fn grid_len(frame: usize, window: usize, step: usize) -> usize {
    (frame - window) / step + 1
}

impl Heatmap {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    /// Offset of a cell's display block from its window origin: the
    /// `step`-sided block centred in the window.
    fn block_offset(&self) -> isize {
        (self.window as isize - self.step as isize) / 2
    }

    /// Cell whose centred display block contains pixel position `(x, y)`.
    pub fn cell_at(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let off = self.block_offset() as f64;
        let col = ((x - off) / self.step as f64).floor();
        let row = ((y - off) / self.step as f64).floor();
        if col < 0.0 || row < 0.0 || col as usize >= self.cols || row as usize >= self.rows {
            return None;
        }
        Some((row as usize, col as usize))
    }

    /// One pixel per cell, probabilities scaled to 16-bit.
    pub fn to_frame(&self) -> Frame {
        let data = self.values.iter().map(|v| (v * 65535.0).round()).collect();
        Frame::new(self.cols, self.rows, 1, BitDepth::Quantized(16), data).expect("heatmap shape")
    }

    /// Frame-sized map in which every cell paints its centred `step` block;
    /// pixels outside all blocks are zero.
    pub fn overlay(&self) -> Frame {
        let off = self.block_offset();
        let mut data = vec![0.0; self.frame_width * self.frame_height];
        for y in 0..self.frame_height {
            for x in 0..self.frame_width {
                let (cx, cy) = (x as isize - off, y as isize - off);
                if cx < 0 || cy < 0 {
                    continue;
                }
                let (col, row) = (cx as usize / self.step, cy as usize / self.step);
                if col < self.cols && row < self.rows {
                    data[y * self.frame_width + x] = (self.get(row, col) * 65535.0).round();
                }
            }
        }
        Frame::new(self.frame_width, self.frame_height, 1, BitDepth::Quantized(16), data).expect("overlay shape")
    }

    /// Writes `<stem>.pgm`, `<stem>_overlay.pgm` and the `<stem>.json` sidecar.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir)?;
        pnm::write(dir.join(format!("{stem}.pgm")), &self.to_frame())?;
        pnm::write(dir.join(format!("{stem}_overlay.pgm")), &self.overlay())?;
        fs::write(dir.join(format!("{stem}.json")), serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    /// Targets whose cell scores at or above `threshold`.
    pub fn hit_rate(&self, annotations: &[Annotation], threshold: f64) -> HitRate {
        let mut rate = HitRate::default();
        for a in annotations.iter().filter(|a| a.class == AnnotationClass::Target) {
            rate.targets += 1;
            if let Some((r, c)) = self.cell_at(a.x, a.y) {
                rate.covered += 1;
                if self.get(r, c) >= threshold {
                    rate.hits += 1;
                }
            }
        }
        rate
    }
}

/// Score every `window`-sided crop at multiples of `step`.
pub fn sliding_heatmap<S: PatchScorer + ?Sized>(scorer: &S, frame: &Frame, window: usize, step: usize) -> Result<Heatmap> {
    if step == 0 {
        return invalid("heatmap step must be at least 1");
    }
    if window == 0 || window > frame.width() || window > frame.height() {
        return invalid(format!("window {window} does not fit a {}x{} frame", frame.width(), frame.height()));
    }
    if window != scorer.arch().input_size {
        return invalid(format!("window {window} differs from detector input {}", scorer.arch().input_size));
    }
    let cols = grid_len(frame.width(), window, step);
    let rows = grid_len(frame.height(), window, step);
    let mut values = vec![0.0; rows * cols];
    values.par_chunks_mut(cols).enumerate().try_for_each(|(r, row)| -> Result<()> {
        let crops: Vec<Frame> = (0..cols).map(|c| frame.crop(c * step, r * step, window, window)).collect::<Result<_>>()?;
        let refs: Vec<&Frame> = crops.iter().collect();
        row.copy_from_slice(&scorer.score(&refs)?);
        Ok(())
    })?;
    Ok(Heatmap { window, step, frame_width: frame.width(), frame_height: frame.height(), cols, rows, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{build_model, ArchitectureSpec};

    fn zero_model(size: usize) -> crate::nn::DetectorModel {
        let arch = ArchitectureSpec { input_size: size, input_channels: 1, blocks: vec![2, 2], leaky_slope: 0.01 };
        let mut m = build_model(&arch, 0).unwrap();
        m.params.data.fill(0.0);
        m
    }

    fn frame(size: usize) -> Frame {
        Frame::new(size, size, 1, BitDepth::Quantized(8), (0..size * size).map(|i| (i % 256) as f64).collect()).unwrap()
    }

    #[test]
    fn grid_examples() {
        assert_eq!(grid_len(201, 201, 10), 1);
        assert_eq!(grid_len(401, 201, 10), 21);
    }

    #[test]
    fn zero_model_gives_uniform_half() {
        let h = sliding_heatmap(&zero_model(16), &frame(40), 16, 4).unwrap();
        assert_eq!((h.rows, h.cols), (7, 7));
        assert!(h.values.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn window_larger_than_frame() {
        assert_eq!(sliding_heatmap(&zero_model(16), &frame(12), 16, 4).unwrap_err().kind(), "invalid-argument");
        assert!(sliding_heatmap(&zero_model(16), &frame(40), 16, 0).is_err());
    }

    #[test]
    fn cell_lookup_matches_overlay() {
        let mut h = sliding_heatmap(&zero_model(16), &frame(40), 16, 4).unwrap();
        for (i, v) in h.values.iter_mut().enumerate() {
            *v = i as f64 / 100.0;
        }
        let overlay = h.overlay();
        for y in 0..40 {
            for x in 0..40 {
                let painted = overlay.get(x, y, 0);
                match h.cell_at(x as f64 + 0.5, y as f64 + 0.5) {
                    Some((r, c)) => assert_eq!(painted, (h.get(r, c) * 65535.0).round()),
                    None => assert_eq!(painted, 0.0),
                }
            }
        }
        // The cell holding a point has the point near its window centre.
        let (r, c) = h.cell_at(21.0, 13.0).unwrap();
        assert!(((c * 4 + 8) as f64 - 21.0).abs() <= 2.0);
        assert!(((r * 4 + 8) as f64 - 13.0).abs() <= 2.0);
    }

    #[test]
    fn hit_rate_counts_covered_targets() {
        let h = sliding_heatmap(&zero_model(16), &frame(40), 16, 4).unwrap();
        let t = |x, y| Annotation { x, y, radius: 3.0, class: AnnotationClass::Target };
        let d = Annotation { x: 20.0, y: 20.0, radius: 2.0, class: AnnotationClass::Distractor };
        let r = h.hit_rate(&[t(20.0, 20.0), t(1.0, 1.0), d], 0.5);
        assert_eq!(r, HitRate { targets: 2, covered: 1, hits: 1 });
        assert_eq!(h.hit_rate(&[t(20.0, 20.0)], 0.6).hits, 0);
    }

    #[test]
    fn sidecar_written() {
        let dir = tempfile::tempdir().unwrap();
        let h = sliding_heatmap(&zero_model(16), &frame(40), 16, 8).unwrap();
        h.write(dir.path(), "map").unwrap();
        let back: Heatmap = serde_json::from_slice(&fs::read(dir.path().join("map.json")).unwrap()).unwrap();
        assert_eq!(back, h);
        let img = pnm::read(dir.path().join("map.pgm")).unwrap();
        assert_eq!(img.shape(), (h.cols, h.rows, 1));
    }
}
