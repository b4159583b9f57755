//! Seeded synthetic datasets for exercising the calibration pipeline.
//!
//! All randomness comes from ChaCha8 seeded with [`rand_chacha::ChaCha8Rng::seed_from_u64`];
//! each stage draws from its own stream of the same seed, so generation,
//! perturbation and detection emission are pure functions of their inputs.

mod oracle;

pub use oracle::oracle_calibrate;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{
    AnnotationSet, Detection, DetectionSet, FaceAnnotation, ImageAnnotations, ImageDetections,
};
use crate::geometry::{iou, BBox};

const STREAM_GENERATE: u64 = 0;
const STREAM_PERTURB: u64 = 1;
const STREAM_EMIT: u64 = 2;
const STREAM_MIXED: u64 = 3;

/// Attempts per face when placing separated faces.
const PLACEMENT_ATTEMPTS: usize = 1000;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_images: usize,
    pub faces_per_image: (usize, usize),
    /// Image width and height in pixels.
    pub image_size: (u32, u32),
    /// Inclusive range of face widths and heights in pixels.
    pub box_size: (u32, u32),
    /// Keep faces far enough apart that a face shifted horizontally by up to
    /// its own width still overlaps no other face.
    pub separated: bool,
    /// Probability that a true face receives a detection.
    pub detect_fraction: f64,
    pub aligned_score: (f64, f64),
    pub distractors_per_image: (usize, usize),
    pub distractor_score: (f64, f64),
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 0,
            n_images: 10,
            faces_per_image: (1, 5),
            image_size: (1024, 768),
            box_size: (16, 96),
            separated: false,
            detect_fraction: 1.0,
            aligned_score: (0.9, 1.0),
            distractors_per_image: (0, 0),
            distractor_score: (0.0, 0.2),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SynthError {
    /// A `(min, max)` range has `min > max`.
    Range(&'static str),
    /// Faces cannot fit inside the image.
    BoxTooLarge,
    Probability(&'static str),
    /// Separated placement failed for an image.
    Placement { image: usize },
}

impl fmt::Display for SynthError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SynthError::Range(name) => write!(f, "range `{name}` has min > max"),
            SynthError::BoxTooLarge => f.write_str("box size exceeds the image size"),
            SynthError::Probability(name) => write!(f, "`{name}` must lie within [0, 1]"),
            SynthError::Placement { image } => {
                write!(f, "could not place separated faces in image {image}")
            }
        }
    }
}

fn unit(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.faces_per_image.0 > self.faces_per_image.1 {
            return Err(SynthError::Range("faces_per_image"));
        }
        if self.box_size.0 > self.box_size.1 || self.box_size.0 == 0 {
            return Err(SynthError::Range("box_size"));
        }
        if self.distractors_per_image.0 > self.distractors_per_image.1 {
            return Err(SynthError::Range("distractors_per_image"));
        }
        for (name, (lo, hi)) in [
            ("aligned_score", self.aligned_score),
            ("distractor_score", self.distractor_score),
        ] {
            if !unit(lo) || !unit(hi) {
                return Err(SynthError::Probability(name));
            }
            if lo > hi {
                return Err(SynthError::Range(name));
            }
        }
        if !unit(self.detect_fraction) {
            return Err(SynthError::Probability("detect_fraction"));
        }
        if self.box_size.1 > self.image_size.0 || self.box_size.1 > self.image_size.1 {
            return Err(SynthError::BoxTooLarge);
        }
        Ok(())
    }
}

/// Image key for the `i`-th synthetic image, laid out like WIDER event folders.
pub fn image_path(i: usize) -> String {
    let event = i % 10;
    format!("{event}--Synth/{event}_Synth_synth_{i}.jpg")
}

fn random_box(r: &mut ChaCha8Rng, image: (u32, u32), size: (u32, u32)) -> BBox {
    let w = r.random_range(size.0..=size.1);
    let h = r.random_range(size.0..=size.1);
    let x = r.random_range(0..=image.0 - w);
    let y = r.random_range(0..=image.1 - h);
    BBox::new(x as f64, y as f64, w as f64, h as f64)
}

// Horizontal reach of a face shifted by up to its own width either way.
fn reach(b: &BBox) -> BBox {
    BBox::new(b.x - b.w, b.y, 3.0 * b.w, b.h)
}

fn overlaps(a: &BBox, b: &BBox) -> bool {
    a.x < b.right() && b.x < a.right() && a.y < b.bottom() && b.y < a.bottom()
}

/// Integer-coordinate faces, deterministic in `spec.seed`.
pub fn generate_dataset(spec: &SynthSpec) -> Result<AnnotationSet, SynthError> {
    spec.validate()?;
    let mut r = rng(spec.seed, STREAM_GENERATE);
    let mut images = Vec::with_capacity(spec.n_images);
    for i in 0..spec.n_images {
        let n = r.random_range(spec.faces_per_image.0..=spec.faces_per_image.1);
        let mut faces: Vec<FaceAnnotation> = Vec::with_capacity(n);
        for _ in 0..n {
            let bbox = if spec.separated {
                let mut placed = None;
                for _ in 0..PLACEMENT_ATTEMPTS {
                    let cand = random_box(&mut r, spec.image_size, spec.box_size);
                    if faces.iter().all(|f| !overlaps(&reach(&f.bbox), &reach(&cand))) {
                        placed = Some(cand);
                        break;
                    }
                }
                placed.ok_or(SynthError::Placement { image: i })?
            } else {
                random_box(&mut r, spec.image_size, spec.box_size)
            };
            let mut face = FaceAnnotation::new(bbox);
            face.blur = r.random_range(0..=2);
            face.expression = r.random_range(0..=1);
            face.illumination = r.random_range(0..=1);
            face.occlusion = r.random_range(0..=2);
            face.pose = r.random_range(0..=1);
            faces.push(face);
        }
        images.push(ImageAnnotations::new(image_path(i), faces));
    }
    Ok(AnnotationSet::new(images))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbSpec {
    pub seed: u64,
    /// Share of all faces to misalign.
    pub fraction: f64,
    /// Inclusive range of target IoUs, within `(0, 1)`.
    pub iou_range: (f64, f64),
    /// Image width; shifts that would leave `[0, width]` go the other way.
    pub image_width: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PerturbEntry {
    pub image: String,
    pub ann_index: usize,
    pub true_box: BBox,
    pub perturbed_box: BBox,
    pub achieved_iou: f64,
}

pub type PerturbLedger = Vec<PerturbEntry>;

/// Horizontal offset that takes two equal boxes of width `w` to IoU `t`.
///
/// With overlap `w - d` and union `w + d`, the IoU is `(w - d) / (w + d)`.
pub fn shift_for_iou(w: f64, t: f64) -> f64 {
    w * (1.0 - t) / (1.0 + t)
}

/// Misaligns `floor(fraction * K)` faces by a horizontal shift with a known IoU.
pub fn perturb(set: &AnnotationSet, spec: &PerturbSpec) -> (AnnotationSet, PerturbLedger) {
    let (lo, hi) = spec.iou_range;
    assert!(lo > 0.0 && lo <= hi && hi < 1.0, "iou_range must satisfy 0 < lo <= hi < 1");
    let mut out = set.clone();
    let slots: Vec<(usize, usize)> = set
        .images
        .iter()
        .enumerate()
        .flat_map(|(i, img)| (0..img.faces.len()).map(move |k| (i, k)))
        .collect();
    let take = ((spec.fraction.clamp(0.0, 1.0) * slots.len() as f64) as usize).min(slots.len());
    let mut r = rng(spec.seed, STREAM_PERTURB);
    let mut chosen = index::sample(&mut r, slots.len(), take).into_vec();
    chosen.sort_unstable();

    let mut ledger = Vec::with_capacity(take);
    for s in chosen {
        let (i, k) = slots[s];
        let t = r.random_range(lo..=hi);
        let face = &mut out.images[i].faces[k];
        let truth = face.bbox;
        let d = shift_for_iou(truth.w, t);
        let dx = if truth.right() + d <= spec.image_width || truth.x - d < 0.0 { d } else { -d };
        face.bbox = truth.translated(dx, 0.0);
        ledger.push(PerturbEntry {
            image: set.images[i].path.clone(),
            ann_index: k,
            true_box: truth,
            perturbed_box: face.bbox,
            achieved_iou: iou(&truth, &face.bbox),
        });
    }
    (out, ledger)
}

/// One detection per true face (subject to `detect_fraction`) with the
/// true box, plus low-score distractors.
pub fn emit_detections(truth: &AnnotationSet, spec: &SynthSpec) -> DetectionSet {
    let mut r = rng(spec.seed, STREAM_EMIT);
    let images = truth
        .images
        .iter()
        .map(|img| {
            let mut dets = Vec::with_capacity(img.faces.len() + spec.distractors_per_image.1);
            for f in &img.faces {
                let keep = spec.detect_fraction >= 1.0 || r.random::<f64>() < spec.detect_fraction;
                let score = r.random_range(spec.aligned_score.0..=spec.aligned_score.1);
                if keep {
                    dets.push(Detection::new(f.bbox, score));
                }
            }
            let n = r.random_range(spec.distractors_per_image.0..=spec.distractors_per_image.1);
            for _ in 0..n {
                let b = random_box(&mut r, spec.image_size, spec.box_size);
                let score = r.random_range(spec.distractor_score.0..=spec.distractor_score.1);
                dets.push(Detection::new(b, score));
            }
            ImageDetections::new(img.path.clone(), dets)
        })
        .collect();
    DetectionSet::new(images)
}

/// Parameters for adversarial mixed fixtures: overlapping faces, detections
/// that are exact copies, jittered copies or unrelated boxes, and coarse
/// scores so ties are common.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedSpec {
    pub seed: u64,
    pub n_images: usize,
    pub max_faces: usize,
    pub max_dets: usize,
    pub image_size: u32,
}

impl Default for MixedSpec {
    fn default() -> Self {
        MixedSpec { seed: 0, n_images: 1000, max_faces: 8, max_dets: 12, image_size: 160 }
    }
}

/// Integer-coordinate annotations and detections for equivalence testing.
pub fn generate_mixed(spec: &MixedSpec) -> (AnnotationSet, DetectionSet) {
    let mut r = rng(spec.seed, STREAM_MIXED);
    let size = spec.image_size.max(16);
    let mut anns = Vec::with_capacity(spec.n_images);
    let mut dets = Vec::with_capacity(spec.n_images);
    for i in 0..spec.n_images {
        let path = image_path(i);
        let n_faces = r.random_range(0..=spec.max_faces);
        let faces: Vec<FaceAnnotation> = (0..n_faces)
            .map(|_| {
                let mut f = FaceAnnotation::new(random_box(&mut r, (size, size), (1, size / 3)));
                f.invalid = (r.random_range(0..10) == 0) as u8;
                f
            })
            .collect();
        let n_dets = r.random_range(0..=spec.max_dets);
        let mut ds = Vec::with_capacity(n_dets);
        for _ in 0..n_dets {
            let kind = r.random_range(0..10);
            let bbox = if faces.is_empty() || kind < 2 {
                random_box(&mut r, (size, size), (1, size / 3))
            } else {
                let base = faces[r.random_range(0..faces.len())].bbox;
                if kind < 4 {
                    base
                } else {
                    let jw = (base.w / 3.0) as i64 + 1;
                    let jh = (base.h / 3.0) as i64 + 1;
                    let x = base.x + r.random_range(-jw..=jw) as f64;
                    let y = base.y + r.random_range(-jh..=jh) as f64;
                    let w = (base.w + r.random_range(-jw..=jw) as f64).max(0.0);
                    let h = (base.h + r.random_range(-jh..=jh) as f64).max(0.0);
                    BBox::new(x, y, w, h)
                }
            };
            let score = r.random_range(0..=20) as f64 / 20.0;
            ds.push(Detection::new(bbox, score));
        }
        anns.push(ImageAnnotations::new(path.clone(), faces));
        // Leave some annotated images without a detection record.
        if r.random_range(0..20) != 0 {
            dets.push(ImageDetections::new(path, ds));
        }
    }
    (AnnotationSet::new(anns), DetectionSet::new(dets))
}
