//! Procedural blood-smear-like specimens: a dense field of overlapping
//! red-cell discs with a few sparse, dark, slightly elliptical targets.
//!
//! Absorbers combine multiplicatively on a bright-field background, then the
//! frame is exposed with shot noise and digitized.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::frame::{max_level, BitDepth, Frame};
use crate::noise::quantize;
use crate::rng::{self, tag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundSpec {
    /// Bright-field level as a fraction of full scale.
    pub level: f64,
    /// Red-cell discs per mm² of specimen.
    pub disc_density: f64,
    /// Disc radius range (px).
    pub disc_radius: (f64, f64),
    /// Disc transmission range; lower is darker.
    pub disc_transmission: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    /// Targets per frame.
    pub count: usize,
    /// Mean radius range (px).
    pub radius: (f64, f64),
    /// Target transmission range.
    pub transmission: (f64, f64),
    /// Largest ratio of major to minor axis.
    pub max_eccentricity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    /// Side of the square frame (px).
    pub frame_size: usize,
    /// Object-plane pixel pitch (µm).
    pub pixel_size_um: f64,
    pub n_bit: u8,
    pub background: BackgroundSpec,
    pub targets: TargetSpec,
    /// Mid-contrast blobs that must not count as targets.
    pub distractors: TargetSpec,
    /// Well depth used for the exposure's own shot noise; `None` renders noise-free.
    pub well_depth: Option<f64>,
    /// Patch side against which target sparsity is checked (px).
    pub sparsity_patch: usize,
    pub group_id: u32,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            frame_size: 512,
            pixel_size_um: 0.5,
            n_bit: 8,
            background: BackgroundSpec {
                level: 0.85,
                disc_density: 10_000.0,
                disc_radius: (7.0, 9.5),
                disc_transmission: (0.72, 0.85),
            },
            targets: TargetSpec {
                count: 12,
                radius: (3.0, 4.5),
                transmission: (0.22, 0.38),
                max_eccentricity: 1.5,
            },
            distractors: TargetSpec {
                count: 6,
                radius: (1.5, 2.5),
                transmission: (0.55, 0.7),
                max_eccentricity: 1.3,
            },
            well_depth: Some(10_000.0),
            sparsity_patch: 96,
            group_id: 0,
        }
    }
}

impl PhantomSpec {
    /// Expected number of targets inside one `sparsity_patch`-sided patch.
    pub fn expected_targets_per_patch(&self) -> f64 {
        let area = (self.frame_size * self.frame_size) as f64;
        self.targets.count as f64 * (self.sparsity_patch * self.sparsity_patch) as f64 / area
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_size == 0 {
            return invalid("phantom frame size must be positive");
        }
        if !(1..=16).contains(&self.n_bit) {
            return invalid(format!("phantom bit depth {} outside 1..=16", self.n_bit));
        }
        if self.pixel_size_um.is_nan() || self.pixel_size_um <= 0.0 || self.background.disc_density < 0.0 {
            return invalid("pixel size must be positive and disc density non-negative");
        }
        for (what, t) in [("target", &self.targets), ("distractor", &self.distractors)] {
            if !(t.radius.0 > 0.0 && t.radius.0 <= t.radius.1) || t.max_eccentricity < 1.0 {
                return invalid(format!("bad {what} shape parameters"));
            }
            if 2.0 * t.radius.1 * t.max_eccentricity >= self.frame_size as f64 && t.count > 0 {
                return invalid(format!("{what}s do not fit in the frame"));
            }
        }
        let density = self.expected_targets_per_patch();
        if density >= 0.5 {
            return invalid(format!(
                "targets not sparse: {density:.3} expected per {}px patch (must be < 0.5)",
                self.sparsity_patch
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationClass {
    Target,
    Distractor,
}

impl AnnotationClass {
    pub fn as_str(self) -> &'static str {
        match self {
            AnnotationClass::Target => "target",
            AnnotationClass::Distractor => "distractor",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    pub class: AnnotationClass,
}

struct Absorber {
    cx: f64,
    cy: f64,
    // Semi-axes and orientation of the ellipse.
    a: f64,
    b: f64,
    cos: f64,
    sin: f64,
    transmission: f64,
    // Fractional brightening at the disc centre (red-cell central pallor).
    pallor: f64,
}

impl Absorber {
    fn reach(&self) -> f64 {
        self.a.max(self.b) + 1.0
    }

    /// Transmission at pixel centre `(px, py)`, with a one-pixel soft edge.
    fn transmission_at(&self, px: f64, py: f64) -> f64 {
        let dx = px - self.cx;
        let dy = py - self.cy;
        let u = (dx * self.cos + dy * self.sin) / self.a;
        let v = (-dx * self.sin + dy * self.cos) / self.b;
        let r = (u * u + v * v).sqrt();
        let edge = self.a.min(self.b);
        // Distance outside the boundary in pixels, roughly.
        let outside = (r - 1.0) * edge;
        let cover = (0.5 - outside).clamp(0.0, 1.0);
        if cover == 0.0 {
            return 1.0;
        }
        let absorb = (1.0 - self.transmission) * (1.0 - self.pallor * (1.0 - r * r).max(0.0));
        1.0 - cover * absorb
    }
}

fn uniform(rng: &mut impl Rng, range: (f64, f64)) -> f64 {
    if range.1 > range.0 {
        rng.random_range(range.0..range.1)
    } else {
        range.0
    }
}

fn random_blob(rng: &mut impl Rng, t: &TargetSpec, size: f64) -> Absorber {
    let r = uniform(rng, t.radius);
    let ecc = uniform(rng, (1.0, t.max_eccentricity));
    // Keep the area of the circle with radius r.
    let a = r * ecc.sqrt();
    let b = r / ecc.sqrt();
    let margin = a;
    let theta = rng.random_range(0.0..PI);
    Absorber {
        cx: rng.random_range(margin..size - margin),
        cy: rng.random_range(margin..size - margin),
        a,
        b,
        cos: theta.cos(),
        sin: theta.sin(),
        transmission: uniform(rng, t.transmission),
        pallor: 0.0,
    }
}

fn paint(canvas: &mut [f64], size: usize, ab: &Absorber) {
    let reach = ab.reach();
    let x0 = (ab.cx - reach).floor().max(0.0) as usize;
    let y0 = (ab.cy - reach).floor().max(0.0) as usize;
    let x1 = ((ab.cx + reach).ceil() as usize).min(size - 1);
    let y1 = ((ab.cy + reach).ceil() as usize).min(size - 1);
    for y in y0..=y1 {
        for x in x0..=x1 {
            canvas[y * size + x] *= ab.transmission_at(x as f64 + 0.5, y as f64 + 0.5);
        }
    }
}

/// Render one specimen frame and its annotations.
pub fn generate_phantom(spec: &PhantomSpec, seed: u64) -> Result<(Frame, Vec<Annotation>)> {
    spec.validate()?;
    let size = spec.frame_size;
    let sf = size as f64;
    let mut rng = rng::stream(seed, &[tag::PHANTOM, spec.group_id as u64]);
    let mut canvas = vec![1.0; size * size];

    let area_mm2 = sf * sf * (spec.pixel_size_um * 1e-3).powi(2);
    let bg = &spec.background;
    let discs = (bg.disc_density * area_mm2).round() as usize;
    for _ in 0..discs {
        let r = uniform(&mut rng, bg.disc_radius);
        let squash = uniform(&mut rng, (0.9, 1.0));
        let theta = rng.random_range(0.0..PI);
        let disc = Absorber {
            cx: rng.random_range(-r..sf + r),
            cy: rng.random_range(-r..sf + r),
            a: r,
            b: r * squash,
            cos: theta.cos(),
            sin: theta.sin(),
            transmission: uniform(&mut rng, bg.disc_transmission),
            pallor: 0.5,
        };
        paint(&mut canvas, size, &disc);
    }

    let mut annotations = Vec::with_capacity(spec.targets.count + spec.distractors.count);
    for (t, class) in [(&spec.distractors, AnnotationClass::Distractor), (&spec.targets, AnnotationClass::Target)] {
        for _ in 0..t.count {
            let blob = random_blob(&mut rng, t, sf);
            paint(&mut canvas, size, &blob);
            annotations.push(Annotation { x: blob.cx, y: blob.cy, radius: (blob.a * blob.b).sqrt(), class });
        }
    }

    let full = max_level(spec.n_bit);
    let level = bg.level * full;
    let gain = spec.well_depth.map(|v| (1u64 << spec.n_bit) as f64 / v);
    let data: Vec<f64> = canvas
        .iter()
        .map(|&t| {
            let x = level * t;
            match gain {
                Some(g) => x + rng.sample::<f64, _>(StandardNormal) * (x * g).sqrt(),
                None => x,
            }
        })
        .collect();
    let real = Frame::from_parts_unchecked(size, size, 1, BitDepth::Real, data);
    Ok((quantize(&real, spec.n_bit), annotations))
}

/// One annotation row of the CSV interchange format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub frame_id: String,
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    pub class: AnnotationClass,
}

pub fn write_annotations_csv<W: Write>(out: W, records: &[AnnotationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_annotations_csv<R: Read>(input: R) -> Result<Vec<AnnotationRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["frame_id", "x", "y", "radius", "class"] {
        return Err(Error::Format(format!("unexpected annotation columns {headers:?}")));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
