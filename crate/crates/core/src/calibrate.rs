//! Misaligned-annotation detection and replacement.
//!
//! Per image, the high-confidence detections are matched against the
//! original annotation boxes. A detection whose best IoU lies in the closed
//! interval `[t_m, t_c]` claims its best annotation unless a higher-scored
//! detection already claimed it. After the scan every claimed annotation
//! takes the box of its claiming detection; flags are kept.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::adc::{compute_adc, select_hcdrs, AdcResult};
use crate::dataset::{align, AnnotationSet, Detection, DetectionSet, ImageAnnotations, ImagePair};
use crate::geometry::{iou_matrix, row_max_argmax, BBox};

pub const DEFAULT_T_M: f64 = 0.5;
pub const DEFAULT_T_C: f64 = 0.8;

/// How non-integral box coordinates are written out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Rounding {
    /// Two decimal places.
    #[default]
    TwoDecimals,
    /// Nearest integer, halves away from zero.
    Integer,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CalibrationConfig {
    /// Matching threshold, lower end of the calibration interval.
    pub t_m: f64,
    /// Calibration threshold, upper end of the calibration interval.
    pub t_c: f64,
    /// Fixed confidence threshold used instead of the computed average.
    pub adc_override: Option<f64>,
    pub rounding: Rounding,
    /// Whether annotations flagged invalid take part in matching.
    pub include_invalid: bool,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            t_m: DEFAULT_T_M,
            t_c: DEFAULT_T_C,
            adc_override: None,
            rounding: Rounding::default(),
            include_invalid: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConfigError {
    /// Thresholds are not `0 <= t_m < t_c <= 1`.
    Interval { t_m: f64, t_c: f64 },
    AdcOverride(f64),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Interval { t_m, t_c } => write!(
                f,
                "invalid calibration interval [{t_m}, {t_c}]: 0 <= t_m < t_c <= 1 and t_m < t_c required"
            ),
            ConfigError::AdcOverride(v) => write!(f, "confidence threshold override {v} is not finite"),
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let ok = self.t_m.is_finite()
            && self.t_c.is_finite()
            && self.t_m >= 0.0
            && self.t_m < self.t_c
            && self.t_c <= 1.0;
        if !ok {
            return Err(ConfigError::Interval { t_m: self.t_m, t_c: self.t_c });
        }
        if let Some(v) = self.adc_override {
            if !v.is_finite() {
                return Err(ConfigError::AdcOverride(v));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn in_interval(&self, iou: f64) -> bool {
        iou >= self.t_m && iou <= self.t_c
    }
}

/// One replaced annotation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MbpRecord {
    pub image: String,
    /// Position in the score-sorted detection list.
    pub det_index: usize,
    /// Position of the annotation within its image.
    pub ann_index: usize,
    pub iou: f64,
    pub score: f64,
    pub old_box: BBox,
    pub new_box: BBox,
}

/// Calibration outcome for a single image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageCalibration {
    pub annotations: ImageAnnotations,
    pub mbps: Vec<MbpRecord>,
    pub hcdrs: usize,
    pub out_of_interval: usize,
    pub already_claimed: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CalibrationCounters {
    pub images: usize,
    pub hcdrs: usize,
    pub skipped_out_of_interval: usize,
    pub skipped_already_claimed: usize,
    pub missing_detections: usize,
    pub unmatched_detections: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub calibrated: AnnotationSet,
    /// Replacement ledger ordered by image, then detection index.
    pub mbps: Vec<MbpRecord>,
    pub counters: CalibrationCounters,
    /// Threshold actually used to select high-confidence detections.
    pub effective_adc: f64,
    /// Computed average, `None` when an override was configured.
    pub adc: Option<AdcResult>,
    /// Seconds spent; set by callers that own a clock.
    pub wall_time: f64,
}

impl CalibrationResult {
    /// Collects per-image results, which must be in annotation order.
    pub fn from_images(
        images: Vec<ImageCalibration>,
        effective_adc: f64,
        adc: Option<AdcResult>,
    ) -> Self {
        let mut counters = CalibrationCounters { images: images.len(), ..Default::default() };
        let mut calibrated = Vec::with_capacity(images.len());
        let mut mbps = Vec::new();
        for img in images {
            counters.hcdrs += img.hcdrs;
            counters.skipped_out_of_interval += img.out_of_interval;
            counters.skipped_already_claimed += img.already_claimed;
            mbps.extend(img.mbps);
            calibrated.push(img.annotations);
        }
        CalibrationResult {
            calibrated: AnnotationSet::new(calibrated),
            mbps,
            counters,
            effective_adc,
            adc,
            wall_time: 0.0,
        }
    }
}

/// Runs matching and replacement on one image.
///
/// `hcdrs` must be sorted by descending score.
pub fn calibrate_image(
    anns: &ImageAnnotations,
    hcdrs: &[Detection],
    cfg: &CalibrationConfig,
) -> ImageCalibration {
    let mut out = ImageCalibration {
        annotations: anns.clone(),
        mbps: Vec::new(),
        hcdrs: hcdrs.len(),
        out_of_interval: 0,
        already_claimed: 0,
    };

    // Columns of the IoU matrix, as indices into `anns.faces`.
    let columns: Vec<usize> = anns
        .faces
        .iter()
        .enumerate()
        .filter(|(_, f)| cfg.include_invalid || !f.is_invalid())
        .map(|(k, _)| k)
        .collect();
    if hcdrs.is_empty() || columns.is_empty() {
        return out;
    }

    let pred_boxes: Vec<BBox> = hcdrs.iter().map(|d| d.bbox).collect();
    let ann_boxes: Vec<BBox> = columns.iter().map(|&k| anns.faces[k].bbox).collect();
    let overlaps = iou_matrix(&pred_boxes, &ann_boxes);
    let (max_overlaps, argmax_overlaps) =
        row_max_argmax(&overlaps).expect("columns checked non-empty");

    let mut c_index: Vec<Option<usize>> = argmax_overlaps.iter().copied().map(Some).collect();
    let mut a_status = vec![false; ann_boxes.len()];
    for j in 0..hcdrs.len() {
        if cfg.in_interval(max_overlaps[j]) {
            let col = argmax_overlaps[j];
            if !a_status[col] {
                a_status[col] = true;
                continue;
            }
            out.already_claimed += 1;
        } else {
            out.out_of_interval += 1;
        }
        c_index[j] = None;
    }

    for (j, target) in c_index.iter().enumerate() {
        let Some(col) = *target else { continue };
        let k = columns[col];
        let face = &mut out.annotations.faces[k];
        out.mbps.push(MbpRecord {
            image: anns.path.clone(),
            det_index: j,
            ann_index: k,
            iou: max_overlaps[j],
            score: hcdrs[j].score,
            old_box: face.bbox,
            new_box: hcdrs[j].bbox,
        });
        face.bbox = hcdrs[j].bbox;
    }
    out
}

/// Effective confidence threshold: the override if present, else the computed average.
pub fn effective_adc(pairs: &[ImagePair<'_>], cfg: &CalibrationConfig) -> (f64, Option<AdcResult>) {
    match cfg.adc_override {
        Some(v) => (v, None),
        None => {
            let r = compute_adc(pairs);
            (r.value, Some(r))
        }
    }
}

/// Calibrates one aligned image pair against an already-chosen threshold.
pub fn calibrate_pair(pair: &ImagePair<'_>, adc: f64, cfg: &CalibrationConfig) -> ImageCalibration {
    calibrate_image(pair.anns, select_hcdrs(pair.dets, adc), cfg)
}

/// Sequential whole-dataset calibration. `wall_time` is left at 0.
pub fn calibrate_dataset(
    anns: &AnnotationSet,
    dets: &DetectionSet,
    cfg: &CalibrationConfig,
) -> Result<CalibrationResult, ConfigError> {
    cfg.validate()?;
    let alignment = align(anns, dets);
    if alignment.pairs.is_empty() {
        log::warn!("calibrating an empty dataset");
    }
    let (adc, adc_result) = effective_adc(&alignment.pairs, cfg);
    let images = alignment
        .pairs
        .iter()
        .map(|p| calibrate_pair(p, adc, cfg))
        .collect();
    let mut result = CalibrationResult::from_images(images, adc, adc_result);
    result.counters.missing_detections = alignment.missing_detections;
    result.counters.unmatched_detections = alignment.unmatched_detections;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FaceAnnotation, ImageDetections};

    fn image(boxes: &[BBox]) -> ImageAnnotations {
        ImageAnnotations::new("img.jpg", boxes.iter().map(|&b| FaceAnnotation::new(b)).collect())
    }

    fn b(x: f64, y: f64, w: f64, h: f64) -> BBox {
        BBox::new(x, y, w, h)
    }

    #[test]
    fn no_hcdrs_leaves_image_unchanged() {
        let anns = image(&[b(0.0, 0.0, 10.0, 10.0)]);
        let out = calibrate_image(&anns, &[], &CalibrationConfig::default());
        assert_eq!(out.annotations, anns);
        assert!(out.mbps.is_empty());
    }

    #[test]
    fn aligned_detection_is_not_an_mbp() {
        let anns = image(&[b(0.0, 0.0, 10.0, 10.0)]);
        let dets = [Detection::new(b(0.0, 0.0, 10.0, 10.0), 0.9)];
        let out = calibrate_image(&anns, &dets, &CalibrationConfig::default());
        assert_eq!(out.annotations, anns);
        assert_eq!(out.out_of_interval, 1);
    }

    #[test]
    fn shifted_detection_replaces_box() {
        let mut anns = image(&[b(0.0, 0.0, 10.0, 10.0)]);
        anns.faces[0].blur = 2;
        anns.faces[0].occlusion = 1;
        let dets = [Detection::new(b(2.0, 0.0, 10.0, 10.0), 0.9)];
        let out = calibrate_image(&anns, &dets, &CalibrationConfig::default());
        assert_eq!(out.annotations.faces[0].bbox, b(2.0, 0.0, 10.0, 10.0));
        assert_eq!(out.annotations.faces[0].blur, 2);
        assert_eq!(out.annotations.faces[0].occlusion, 1);
        assert_eq!(out.mbps.len(), 1);
        let r = &out.mbps[0];
        // inter 80, union 120
        assert_eq!(r.iou, 80.0 / 120.0);
        assert_eq!((r.det_index, r.ann_index), (0, 0));
        assert_eq!(r.old_box, b(0.0, 0.0, 10.0, 10.0));
    }

    #[test]
    fn second_claim_is_discarded_without_fallback() {
        // Both detections have A as their best match; neither touches B.
        let a = b(0.0, 0.0, 100.0, 10.0);
        let bb = b(200.0, 0.0, 100.0, 10.0);
        let anns = image(&[a, bb]);
        let d1 = b(17.0, 0.0, 100.0, 10.0); // IoU 83/117
        let d2 = b(25.0, 0.0, 100.0, 10.0); // IoU 75/125 = 0.6
        let dets = [Detection::new(d1, 0.9), Detection::new(d2, 0.8)];
        let out = calibrate_image(&anns, &dets, &CalibrationConfig::default());
        assert_eq!(out.mbps.len(), 1);
        assert_eq!(out.mbps[0].det_index, 0);
        assert_eq!(out.annotations.faces[0].bbox, d1);
        assert_eq!(out.annotations.faces[1].bbox, bb);
        assert_eq!(out.already_claimed, 1);
    }

    #[test]
    fn below_matching_threshold_is_skipped() {
        let anns = image(&[b(0.0, 0.0, 10.0, 10.0)]);
        // inter 40, union 100 + 100 - 40 = 160 -> 0.25
        let dets = [Detection::new(b(6.0, 0.0, 10.0, 10.0), 0.9)];
        let out = calibrate_image(&anns, &dets, &CalibrationConfig::default());
        assert!(out.mbps.is_empty());
        assert_eq!(out.annotations, anns);
    }

    #[test]
    fn interval_is_closed_at_both_ends() {
        let cfg = CalibrationConfig::default();
        let anns = image(&[b(0.0, 0.0, 12.0, 12.0)]);
        // shift 4 of a 12-wide box: IoU exactly 0.5
        let at_tm = [Detection::new(b(4.0, 0.0, 12.0, 12.0), 0.9)];
        assert_eq!(calibrate_image(&anns, &at_tm, &cfg).mbps.len(), 1);
        // shift 1 of a 9-wide box: 8/10 = 0.8
        let anns = image(&[b(0.0, 0.0, 9.0, 9.0)]);
        let at_tc = [Detection::new(b(1.0, 0.0, 9.0, 9.0), 0.9)];
        assert_eq!(calibrate_image(&anns, &at_tc, &cfg).mbps.len(), 1);
    }

    #[test]
    fn invalid_annotations_can_be_excluded() {
        let mut anns = image(&[b(0.0, 0.0, 10.0, 10.0)]);
        anns.faces[0].invalid = 1;
        let dets = [Detection::new(b(2.0, 0.0, 10.0, 10.0), 0.9)];
        let mut cfg = CalibrationConfig::default();
        assert_eq!(calibrate_image(&anns, &dets, &cfg).mbps.len(), 1);
        cfg.include_invalid = false;
        assert!(calibrate_image(&anns, &dets, &cfg).mbps.is_empty());
    }

    #[test]
    fn config_validation() {
        let mut cfg = CalibrationConfig { t_m: 0.9, t_c: 0.5, ..Default::default() };
        assert!(cfg.validate().is_err());
        cfg = CalibrationConfig { t_m: 0.5, t_c: 0.5, ..Default::default() };
        assert!(cfg.validate().is_err());
        cfg = CalibrationConfig { t_m: 0.0, t_c: 1.0, ..Default::default() };
        assert!(cfg.validate().is_ok());
        cfg.adc_override = Some(f64::NAN);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn dataset_with_exact_detections_changes_nothing() {
        let anns = AnnotationSet::new(vec![
            image(&[b(0.0, 0.0, 10.0, 10.0), b(50.0, 50.0, 20.0, 20.0)]),
        ]);
        let dets = DetectionSet::new(vec![ImageDetections::new(
            "img.jpg",
            vec![
                Detection::new(b(0.0, 0.0, 10.0, 10.0), 0.9),
                Detection::new(b(50.0, 50.0, 20.0, 20.0), 0.95),
            ],
        )]);
        let cfg = CalibrationConfig { adc_override: Some(0.5), ..Default::default() };
        let r = calibrate_dataset(&anns, &dets, &cfg).unwrap();
        assert!(r.mbps.is_empty());
        assert_eq!(r.calibrated, anns);
        assert_eq!(r.counters.hcdrs, 2);
    }

    #[test]
    fn empty_dataset() {
        let r = calibrate_dataset(
            &AnnotationSet::default(),
            &DetectionSet::default(),
            &CalibrationConfig::default(),
        )
        .unwrap();
        assert!(r.calibrated.images.is_empty());
        assert!(r.mbps.is_empty());
        assert_eq!(r.effective_adc, 0.0);
    }
}
