//! Patch extraction, labeling, class balancing, group-wise splits, overlap
//! composition, and the on-disk dataset layout.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::frame::Frame;
use crate::noise::synthesize_overlap;
use crate::optics::SensorModel;
use crate::phantom::{generate_phantom, Annotation, AnnotationClass, PhantomSpec};
use crate::pnm;
use crate::rng::{self, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }

    pub fn as_f64(self) -> f64 {
        if self.is_positive() {
            1.0
        } else {
            0.0
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l as u8
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            0 => Ok(Label::Negative),
            1 => Ok(Label::Positive),
            _ => Err(format!("label must be 0 or 1, got {v}")),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", *self as u8)
    }
}

/// Where a single-FOV patch was cut from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchSource {
    pub group_id: u32,
    pub frame_id: String,
    pub x: usize,
    pub y: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contributor {
    pub id: String,
    pub label: Label,
    pub source: PatchSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPatch {
    pub id: String,
    pub pixels: Frame,
    pub label: Label,
    pub source: PatchSource,
    /// Single-FOV patches superimposed to form this one; empty for raw patches.
    pub contributors: Vec<Contributor>,
}

impl LabeledPatch {
    fn as_contributor(&self) -> Contributor {
        Contributor { id: self.id.clone(), label: self.label, source: self.source.clone() }
    }
}

/// Patch grid and labeling rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchGrid {
    pub patch_size: usize,
    /// Side of the centred labeling region as a fraction of `patch_size`.
    pub inner_fraction: f64,
    pub stride: usize,
}

impl PatchGrid {
    pub fn new(patch_size: usize, inner_fraction: f64, stride: usize) -> Self {
        Self { patch_size, inner_fraction, stride }
    }

    /// Half-open `[lo, hi)` bounds of the inner region in patch coordinates.
    pub fn inner_bounds(&self) -> (f64, f64) {
        let p = self.patch_size as f64;
        let side = self.inner_fraction * p;
        let lo = (p - side) / 2.0;
        (lo, lo + side)
    }
}

/// Identifies the frame being cut into patches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameRef {
    pub group_id: u32,
    pub frame_id: String,
}

/// Cut `frame` into a grid of patches and label them.
///
/// A patch is positive when a target centroid falls in its inner region and
/// negative when no target centroid falls anywhere in it. Patches holding a
/// target only outside the inner region are ambiguous and dropped.
/// Distractor annotations never affect labels.
pub fn extract_patches(
    frame: &Frame,
    annotations: &[Annotation],
    grid: &PatchGrid,
    origin: &FrameRef,
) -> Result<Vec<LabeledPatch>> {
    let ps = grid.patch_size;
    if ps == 0 || ps > frame.width() || ps > frame.height() {
        return invalid(format!(
            "patch size {ps} does not fit a {}x{} frame",
            frame.width(),
            frame.height()
        ));
    }
    if !(grid.inner_fraction > 0.0 && grid.inner_fraction <= 1.0) {
        return invalid(format!("inner fraction must lie in (0, 1], got {}", grid.inner_fraction));
    }
    if grid.stride == 0 {
        return invalid("stride must be at least 1");
    }
    let targets: Vec<&Annotation> = annotations.iter().filter(|a| a.class == AnnotationClass::Target).collect();
    let (lo, hi) = grid.inner_bounds();
    let psf = ps as f64;
    let mut out = Vec::new();
    for y in (0..=frame.height() - ps).step_by(grid.stride) {
        for x in (0..=frame.width() - ps).step_by(grid.stride) {
            let (mut inner, mut outer) = (false, false);
            for t in &targets {
                let (u, v) = (t.x - x as f64, t.y - y as f64);
                if (lo..hi).contains(&u) && (lo..hi).contains(&v) {
                    inner = true;
                } else if (0.0..psf).contains(&u) && (0.0..psf).contains(&v) {
                    outer = true;
                }
            }
            let label = match (inner, outer) {
                (true, _) => Label::Positive,
                (false, false) => Label::Negative,
                (false, true) => continue,
            };
            out.push(LabeledPatch {
                id: format!("{}_x{x:04}_y{y:04}", origin.frame_id),
                pixels: frame.crop(x, y, ps, ps)?,
                label,
                source: PatchSource { group_id: origin.group_id, frame_id: origin.frame_id.clone(), x, y },
                contributors: Vec::new(),
            });
        }
    }
    Ok(out)
}

/// Subsample the majority class down to `positive : negative`.
///
/// The minority class is kept whole; positives count as the minority on a
/// tie. Membership keeps the input order.
pub fn balance(patches: Vec<LabeledPatch>, ratio: (usize, usize), seed: u64) -> Result<Vec<LabeledPatch>> {
    let (rp, rn) = ratio;
    if rp == 0 || rn == 0 {
        return invalid("balance ratio terms must be positive");
    }
    let pos: Vec<usize> = (0..patches.len()).filter(|&i| patches[i].label.is_positive()).collect();
    let neg: Vec<usize> = (0..patches.len()).filter(|&i| !patches[i].label.is_positive()).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::UnsatisfiableBalance(format!(
            "both classes are required ({} positive, {} negative)",
            pos.len(),
            neg.len()
        )));
    }
    let (keep, pool, wanted) = if pos.len() <= neg.len() {
        (pos, neg, 0)
    } else {
        (neg, pos, 1)
    };
    let need = if wanted == 0 { keep.len() * rn / rp } else { keep.len() * rp / rn };
    if need > pool.len() || need == 0 {
        return Err(Error::UnsatisfiableBalance(format!(
            "ratio {rp}:{rn} needs {need} of the majority class, {} available",
            pool.len()
        )));
    }
    let mut rng = rng::stream(seed, &[tag::BALANCE]);
    let mut chosen: Vec<usize> = pool.choose_multiple(&mut rng, need).copied().collect();
    chosen.extend(keep);
    let chosen: BTreeSet<usize> = chosen.into_iter().collect();
    Ok(patches.into_iter().enumerate().filter(|(i, _)| chosen.contains(i)).map(|(_, p)| p).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroupSplit {
    pub train: Vec<LabeledPatch>,
    pub val: Vec<LabeledPatch>,
    pub test: Vec<LabeledPatch>,
}

impl GroupSplit {
    pub fn get(&self, split: Split) -> &[LabeledPatch] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

/// Number of groups per split: largest-remainder rounding, with every split
/// of non-zero fraction receiving at least one group.
fn allocate_groups(groups: usize, fractions: [f64; 3]) -> Result<[usize; 3]> {
    if fractions.iter().any(|f| f.is_nan() || *f < 0.0) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return invalid(format!("split fractions must be non-negative and sum to 1, got {fractions:?}"));
    }
    let active = fractions.iter().filter(|&&f| f > 0.0).count();
    if groups < active {
        return invalid(format!("{groups} groups cannot populate {active} splits"));
    }
    let exact: Vec<f64> = fractions.iter().map(|f| f * groups as f64).collect();
    let mut counts = [0usize; 3];
    for i in 0..3 {
        counts[i] = exact[i].floor() as usize;
    }
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let mut left = groups - counts.iter().sum::<usize>();
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if fractions[i] > 0.0 {
            counts[i] += 1;
            left -= 1;
        }
    }
    for i in 0..3 {
        if fractions[i] > 0.0 && counts[i] == 0 {
            let donor = (0..3).max_by_key(|&j| (counts[j], std::cmp::Reverse(j))).expect("three splits");
            counts[donor] -= 1;
            counts[i] = 1;
        }
    }
    Ok(counts)
}

/// Partition patches by specimen group so that no group spans two splits.
pub fn split_by_group(patches: Vec<LabeledPatch>, fractions: [f64; 3], seed: u64) -> Result<GroupSplit> {
    let mut groups: Vec<u32> = patches.iter().map(|p| p.source.group_id).collect::<BTreeSet<_>>().into_iter().collect();
    let counts = allocate_groups(groups.len(), fractions)?;
    groups.shuffle(&mut rng::stream(seed, &[tag::SPLIT]));
    let mut assignment = BTreeMap::new();
    let mut it = groups.into_iter();
    for (split, &count) in Split::ALL.iter().zip(&counts) {
        for g in it.by_ref().take(count) {
            assignment.insert(g, *split);
        }
    }
    let mut out = GroupSplit::default();
    for p in patches {
        match assignment[&p.source.group_id] {
            Split::Train => out.train.push(p),
            Split::Val => out.val.push(p),
            Split::Test => out.test.push(p),
        }
    }
    Ok(out)
}

/// Build `count_per_class` positive and negative `n`-fold overlapped patches.
///
/// A positive superimposes one positive single with `n - 1` distinct
/// negatives; a negative superimposes `n` distinct negatives. Draws are
/// without replacement inside one example and with replacement across
/// examples. Example `i` depends only on `(seed, i)`.
pub fn compose_overlap_dataset(
    singles: &[LabeledPatch],
    n: usize,
    count_per_class: usize,
    sensor: &SensorModel,
    seed: u64,
) -> Result<Vec<LabeledPatch>> {
    if n == 0 {
        return invalid("overlap number must be at least 1");
    }
    let pos: Vec<&LabeledPatch> = singles.iter().filter(|p| p.label.is_positive()).collect();
    let neg: Vec<&LabeledPatch> = singles.iter().filter(|p| !p.label.is_positive()).collect();
    if count_per_class > 0 && (pos.is_empty() || neg.len() < n) {
        return invalid(format!(
            "need at least 1 positive and {n} negative singles, have {} and {}",
            pos.len(),
            neg.len()
        ));
    }
    (0..2 * count_per_class)
        .into_par_iter()
        .map(|i| {
            let example_seed = rng::derive_seed(seed, &[tag::COMPOSE, i as u64]);
            let mut rng = rng::stream(example_seed, &[]);
            let positive = i < count_per_class;
            let mut parts: Vec<&LabeledPatch> = Vec::with_capacity(n);
            if positive {
                parts.push(pos[rng.random_range(0..pos.len())]);
            }
            parts.extend(neg.choose_multiple(&mut rng, n - parts.len()).copied());
            let frames: Vec<Frame> = parts.iter().map(|p| p.pixels.clone()).collect();
            let pixels = synthesize_overlap(&frames, sensor, example_seed)?;
            let contributors: Vec<Contributor> = parts.iter().map(|p| p.as_contributor()).collect();
            let label = if contributors.iter().any(|c| c.label.is_positive()) { Label::Positive } else { Label::Negative };
            Ok(LabeledPatch {
                id: format!("n{n}_{}_{i:05}", label),
                pixels,
                label,
                source: parts[0].source.clone(),
                contributors,
            })
        })
        .collect()
}

/// One rendered specimen: a single frame per group.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomFrame {
    pub group_id: u32,
    pub frame_id: String,
    pub frame: Frame,
    pub annotations: Vec<Annotation>,
}

impl PhantomFrame {
    pub fn origin(&self) -> FrameRef {
        FrameRef { group_id: self.group_id, frame_id: self.frame_id.clone() }
    }
}

/// Render one frame per group id from a shared template.
pub fn render_groups(template: &PhantomSpec, groups: &[u32], seed: u64) -> Result<Vec<PhantomFrame>> {
    groups
        .par_iter()
        .map(|&g| {
            let spec = PhantomSpec { group_id: g, ..template.clone() };
            let (frame, annotations) = generate_phantom(&spec, seed)?;
            Ok(PhantomFrame { group_id: g, frame_id: format!("g{g:04}"), frame, annotations })
        })
        .collect()
}

/// Labeled patches from every frame, in frame order.
pub fn singles_from_frames(frames: &[PhantomFrame], grid: &PatchGrid) -> Result<Vec<LabeledPatch>> {
    let per_frame: Vec<Vec<LabeledPatch>> = frames
        .par_iter()
        .map(|f| extract_patches(&f.frame, &f.annotations, grid, &f.origin()))
        .collect::<Result<_>>()?;
    Ok(per_frame.concat())
}

/// Overlap whole frames and pool their annotations.
pub fn overlap_frames(frames: &[&PhantomFrame], sensor: &SensorModel, seed: u64) -> Result<(Frame, Vec<Annotation>)> {
    let pixels: Vec<Frame> = frames.iter().map(|f| f.frame.clone()).collect();
    let composed = synthesize_overlap(&pixels, sensor, seed)?;
    Ok((composed, frames.iter().flat_map(|f| f.annotations.iter().cloned()).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the manifest's directory.
    pub path: PathBuf,
    pub label: Label,
    pub source: PatchSource,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contributors: Vec<Contributor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub patch_size: usize,
    pub inner_fraction: f64,
    pub split: Split,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub entries: Vec<ManifestEntry>,
}

/// Write patches as `<dir>/<split>/<label>/<id>.pgm` and the manifest as
/// `<dir>/<split>.json`. Returns the manifest path.
pub fn write_split(
    dir: &Path,
    split: Split,
    patches: &[LabeledPatch],
    inner_fraction: f64,
    n: Option<usize>,
    seed: u64,
) -> Result<PathBuf> {
    let patch_size = patches.first().map(|p| p.pixels.width()).unwrap_or(0);
    let mut entries = Vec::with_capacity(patches.len());
    for p in patches {
        let rel = PathBuf::from(split.as_str()).join(p.label.to_string()).join(format!("{}.pgm", p.id));
        let full = dir.join(&rel);
        if let Some(parent) = full.parent() {
            fs::create_dir_all(parent)?;
        }
        pnm::write(&full, &p.pixels)?;
        entries.push(ManifestEntry {
            path: rel,
            label: p.label,
            source: p.source.clone(),
            contributors: p.contributors.clone(),
        });
    }
    let manifest = DatasetManifest { patch_size, inner_fraction, split, seed, n, entries };
    let path = dir.join(format!("{}.json", split.as_str()));
    fs::write(&path, serde_json::to_vec_pretty(&manifest)?)?;
    Ok(path)
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let load_err = |reason: String| Error::Load { path: path.to_path_buf(), reason };
    let text = fs::read_to_string(path).map_err(|e| load_err(e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| load_err(format!("malformed manifest: {e}")))
}

/// Load every patch a manifest lists.
pub fn load_external(path: &Path) -> Result<Vec<LabeledPatch>> {
    let manifest = read_manifest(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    manifest
        .entries
        .iter()
        .map(|e| {
            let file = base.join(&e.path);
            let pixels = pnm::read(&file).map_err(|err| match err {
                Error::Load { .. } => err,
                other => Error::Load { path: file.clone(), reason: other.to_string() },
            })?;
            if manifest.patch_size != 0 && (pixels.width() != manifest.patch_size || pixels.height() != manifest.patch_size) {
                return Err(Error::Load {
                    path: file,
                    reason: format!("expected {0}x{0} patch, found {1}x{2}", manifest.patch_size, pixels.width(), pixels.height()),
                });
            }
            let id = e.path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok(LabeledPatch {
                id,
                pixels,
                label: e.label,
                source: e.source.clone(),
                contributors: e.contributors.clone(),
            })
        })
        .collect()
}
