//! Design arithmetic and feasibility checks for an overlapped lens-array microscope.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wavelength used by the diffraction sanity check when none is given (µm).
pub const DEFAULT_WAVELENGTH_UM: f64 = 0.55;

/// Geometry of an `n`-lens array imaging disjoint sample regions onto one sensor.
///
/// Lengths are millimetres except `d_x`, which is micrometres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LensArrayDesign {
    pub n: u32,
    pub d_o: f64,
    pub d_i: f64,
    pub w: f64,
    pub a_o: f64,
    pub na: f64,
    pub d_x: f64,
    pub array_width: f64,
}

impl LensArrayDesign {
    /// Seven-lens hexagonal prototype: 25x sub-images, 3.7 mm pitch.
    pub fn prototype() -> Self {
        Self {
            n: 7,
            d_o: 1.2,
            d_i: 30.0,
            w: 3.7,
            a_o: 0.84,
            na: 0.25,
            d_x: 2.0,
            array_width: 11.1,
        }
    }
}

/// Image sensor parameters. `v` is the pixel well depth in photoelectrons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorModel {
    pub n_bit: u8,
    pub v: f64,
    /// Pixel pitch (µm).
    pub pixel_size: f64,
    /// Active width (mm).
    pub width_mm: f64,
    /// Megapixels.
    pub pixel_count: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self::prototype()
    }
}

impl SensorModel {
    /// 12.3 MP, 1.55 µm pixels, 8-bit readout, 10k e- well.
    pub fn prototype() -> Self {
        Self {
            n_bit: 8,
            v: 10_000.0,
            pixel_size: 1.55,
            width_mm: 6.287,
            pixel_count: 12.3,
        }
    }

    pub fn with_noise(n_bit: u8, v: f64) -> Self {
        Self { n_bit, v, ..Self::prototype() }
    }

    /// Total grayscale levels, `2^n_bit`.
    pub fn dynamic_range(&self) -> f64 {
        (1u64 << self.n_bit) as f64
    }

    /// Digital numbers per photoelectron, `2^n_bit / v`.
    pub fn gain(&self) -> f64 {
        self.dynamic_range() / self.v
    }

    pub fn validate(&self) -> Result<()> {
        if ![8, 10, 12, 16].contains(&self.n_bit) {
            return Err(Error::InvalidArgument(format!(
                "sensor bit depth must be 8, 10, 12 or 16, got {}",
                self.n_bit
            )));
        }
        if !(self.v > 0.0 && self.v.is_finite()) {
            return Err(Error::InvalidArgument(format!("well depth must be positive, got {}", self.v)));
        }
        Ok(())
    }
}

pub fn magnification(design: &LensArrayDesign) -> Result<f64> {
    if design.d_o.is_nan() || design.d_o <= 0.0 {
        return Err(Error::InvalidDesign(format!("object distance must be positive, got {}", design.d_o)));
    }
    Ok(design.d_i / design.d_o)
}

/// Sub-FOV diameter at the image plane (mm).
pub fn image_fov_diameter(design: &LensArrayDesign) -> Result<f64> {
    Ok(magnification(design)? * design.a_o)
}

/// Grayscale levels left to each of `n` superimposed sub-images.
pub fn sub_image_dynamic_range(sensor: &SensorModel, n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("overlap number must be at least 1".into()));
    }
    Ok(sensor.dynamic_range() / n as f64)
}

/// Per-sub-image SNR relative to a non-overlapped exposure.
pub fn snr_scale(n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("overlap number must be at least 1".into()));
    }
    Ok(1.0 / (n as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub name: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub magnification: f64,
    pub a_i: f64,
    pub sub_dynamic_range: f64,
    pub snr_scale: f64,
    pub fov_gain: f64,
    pub violations: Vec<Violation>,
}

impl DesignReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

pub mod violation {
    pub const INVALID_PARAMETERS: &str = "invalid parameters";
    pub const NOT_MAGNIFYING: &str = "magnification not above 1";
    pub const OBJECT_FOVS_OVERLAP: &str = "object FOVs overlap";
    pub const UNDER_COVERS_SENSOR: &str = "sub-image under-covers sensor";
    pub const ARRAY_WIDTH: &str = "array width is not 3w";
    pub const RESOLUTION: &str = "resolution inconsistent with NA";
}

/// Relative slack allowed between the declared array width and `3 w`.
const ARRAY_WIDTH_TOLERANCE: f64 = 0.05;

pub fn validate_design(design: &LensArrayDesign, sensor: &SensorModel) -> DesignReport {
    validate_design_at(design, sensor, DEFAULT_WAVELENGTH_UM)
}

/// Run every feasibility check and collect all failures.
pub fn validate_design_at(design: &LensArrayDesign, sensor: &SensorModel, wavelength_um: f64) -> DesignReport {
    let mut violations = Vec::new();
    let mut push = |name: &str, detail: String| violations.push(Violation { name: name.into(), detail });

    let mut bad = Vec::new();
    if design.n < 1 {
        bad.push("n < 1".to_string());
    }
    for (field, value) in [
        ("d_o", design.d_o),
        ("d_i", design.d_i),
        ("w", design.w),
        ("a_o", design.a_o),
        ("d_x", design.d_x),
        ("array_width", design.array_width),
    ] {
        if !(value > 0.0 && value.is_finite()) {
            bad.push(format!("{field} = {value} must be positive"));
        }
    }
    if !(design.na > 0.0 && design.na < 1.0) {
        bad.push(format!("na = {} must lie in (0, 1)", design.na));
    }
    if let Err(e) = sensor.validate() {
        bad.push(e.to_string());
    }
    if !bad.is_empty() {
        push(violation::INVALID_PARAMETERS, bad.join("; "));
    }

    let m = design.d_i / design.d_o;
    let a_i = m * design.a_o;
    let n = design.n.max(1) as f64;

    if bad.is_empty() {
        if m <= 1.0 {
            push(violation::NOT_MAGNIFYING, format!("M = {m}"));
        }
        if design.a_o >= design.w {
            push(
                violation::OBJECT_FOVS_OVERLAP,
                format!("a_o = {} mm is not below lens pitch w = {} mm", design.a_o, design.w),
            );
        }
        if a_i < sensor.width_mm {
            push(
                violation::UNDER_COVERS_SENSOR,
                format!("a_i = {a_i} mm is smaller than sensor width {} mm", sensor.width_mm),
            );
        }
        if design.n == 7 {
            let expected = 3.0 * design.w;
            if ((design.array_width - expected) / expected).abs() > ARRAY_WIDTH_TOLERANCE {
                push(
                    violation::ARRAY_WIDTH,
                    format!("array width {} mm, hexagonal layout needs {expected} mm", design.array_width),
                );
            }
        }
        let diffraction = wavelength_um / design.na;
        if diffraction > 2.0 * design.d_x || diffraction < 0.5 * design.d_x {
            push(
                violation::RESOLUTION,
                format!("lambda/NA = {diffraction:.3} um is not within 2x of d_x = {} um", design.d_x),
            );
        }
    }

    DesignReport {
        magnification: m,
        a_i,
        sub_dynamic_range: sensor.dynamic_range() / n,
        snr_scale: 1.0 / n.sqrt(),
        fov_gain: n,
        violations,
    }
}

/// JSON document accepted by the `design` command.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignDocument {
    pub design: LensArrayDesign,
    pub sensor: SensorModel,
    #[serde(default = "default_wavelength")]
    pub wavelength_um: f64,
}

fn default_wavelength() -> f64 {
    DEFAULT_WAVELENGTH_UM
}

impl DesignDocument {
    pub fn prototype() -> Self {
        Self {
            design: LensArrayDesign::prototype(),
            sensor: SensorModel::prototype(),
            wavelength_um: DEFAULT_WAVELENGTH_UM,
        }
    }

    pub fn report(&self) -> DesignReport {
        validate_design_at(&self.design, &self.sensor, self.wavelength_um)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names(r: &DesignReport) -> Vec<&str> {
        r.violations.iter().map(|v| v.name.as_str()).collect()
    }

    #[test]
    fn magnification_examples() {
        let mut d = LensArrayDesign::prototype();
        assert_eq!(magnification(&d).unwrap(), 25.0);
        d.d_i = 60.0;
        assert_eq!(magnification(&d).unwrap(), 50.0);
        d.d_i = 1.7;
        d.d_o = 1.7;
        assert_eq!(magnification(&d).unwrap(), 1.0);
        d.d_o = 0.0;
        assert!(matches!(magnification(&d), Err(Error::InvalidDesign(_))));
    }

    #[test]
    fn image_fov_examples() {
        let mut d = LensArrayDesign::prototype();
        assert!((image_fov_diameter(&d).unwrap() - 21.0).abs() < 1e-12);
        d.a_o = 0.5;
        assert!((image_fov_diameter(&d).unwrap() - 12.5).abs() < 1e-12);
        d.d_i = d.d_o;
        d.a_o = 0.84;
        assert_eq!(image_fov_diameter(&d).unwrap(), 0.84);
    }

    #[test]
    fn dynamic_range_and_snr() {
        let s8 = SensorModel::prototype();
        assert!((sub_image_dynamic_range(&s8, 7).unwrap() - 256.0 / 7.0).abs() < 1e-12);
        assert_eq!(sub_image_dynamic_range(&s8, 1).unwrap(), 256.0);
        assert_eq!(sub_image_dynamic_range(&SensorModel::with_noise(12, 1e4), 4).unwrap(), 1024.0);
        assert!(sub_image_dynamic_range(&s8, 0).is_err());

        assert_eq!(snr_scale(1).unwrap(), 1.0);
        assert_eq!(snr_scale(4).unwrap(), 0.5);
        assert!((snr_scale(7).unwrap() - 0.377_964_473_009_227_2).abs() < 1e-15);
        assert!(snr_scale(0).is_err());
    }

    #[test]
    fn prototype_is_feasible() {
        let r = validate_design(&LensArrayDesign::prototype(), &SensorModel::prototype());
        assert!(r.is_feasible(), "{:?}", r.violations);
        assert_eq!(r.fov_gain, 7.0);
    }

    #[test]
    fn reports_overlapping_object_fovs() {
        let d = LensArrayDesign { a_o: 4.0, ..LensArrayDesign::prototype() };
        let r = validate_design(&d, &SensorModel::prototype());
        assert!(names(&r).contains(&violation::OBJECT_FOVS_OVERLAP));
    }

    #[test]
    fn reports_under_coverage() {
        // a_i = 25 * 0.2 = 5 mm
        let d = LensArrayDesign { a_o: 0.2, ..LensArrayDesign::prototype() };
        let r = validate_design(&d, &SensorModel::prototype());
        assert_eq!(names(&r), vec![violation::UNDER_COVERS_SENSOR]);
    }

    #[test]
    fn reports_all_failures_at_once() {
        let d = LensArrayDesign { a_o: 0.2, w: 0.1, array_width: 20.0, d_x: 20.0, ..LensArrayDesign::prototype() };
        let r = validate_design(&d, &SensorModel::prototype());
        assert_eq!(r.violations.len(), 4, "{:?}", r.violations);
    }

    #[test]
    fn invalid_parameters_are_reported_not_thrown() {
        let d = LensArrayDesign { na: 1.5, d_o: -1.0, ..LensArrayDesign::prototype() };
        let r = validate_design(&d, &SensorModel::prototype());
        assert_eq!(names(&r), vec![violation::INVALID_PARAMETERS]);
    }

    #[test]
    fn document_json_uses_field_names() {
        let doc: DesignDocument = serde_json::from_str(
            r#"{"design":{"n":7,"d_o":1.2,"d_i":30,"w":3.7,"a_o":0.84,"na":0.25,"d_x":2,"array_width":11.1},
                "sensor":{"n_bit":8,"v":10000,"pixel_size":1.55,"width_mm":6.287,"pixel_count":12.3}}"#,
        )
        .unwrap();
        assert_eq!(doc.design, LensArrayDesign::prototype());
        assert!(doc.report().is_feasible());
    }

    proptest! {
        #[test]
        fn magnification_is_homogeneous(d_o in 0.01f64..100.0, d_i in 0.01f64..100.0, c in 0.001f64..1000.0) {
            let d = LensArrayDesign { d_o, d_i, ..LensArrayDesign::prototype() };
            let scaled = LensArrayDesign { d_o: c * d_o, d_i: c * d_i, ..d };
            let (a, b) = (magnification(&d).unwrap(), magnification(&scaled).unwrap());
            prop_assert!((a - b).abs() <= 1e-12 * a.abs());
        }

        #[test]
        fn dynamic_range_times_n_is_total(n in 1u32..10_000, n_bit in prop::sample::select(vec![8u8, 10, 12, 16])) {
            let s = SensorModel::with_noise(n_bit, 1e4);
            let d = sub_image_dynamic_range(&s, n).unwrap();
            prop_assert!((d * n as f64 - s.dynamic_range()).abs() <= 1e-9 * s.dynamic_range());
        }

        #[test]
        fn snr_scale_law(n in 1u32..100_000) {
            let s = snr_scale(n).unwrap();
            prop_assert!((s * s * n as f64 - 1.0).abs() < 1e-12);
            prop_assert!(snr_scale(n + 1).unwrap() < s);
        }
    }
}
