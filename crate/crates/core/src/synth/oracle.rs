//! Brute-force reference calibration.
//!
//! Shares nothing with the production path beyond the data types: its own
//! image join, its own IoU arithmetic, selection by repeated maximum instead
//! of sorting, and a full scan over every (detection, annotation) pair.

use alloc::vec;
use alloc::vec::Vec;

use crate::adc::AdcResult;
use crate::calibrate::{
    CalibrationConfig, CalibrationCounters, CalibrationResult, ConfigError, MbpRecord,
};
use crate::dataset::{AnnotationSet, Detection, DetectionSet};
use crate::geometry::BBox;

fn corner_iou(p: &BBox, q: &BBox) -> f64 {
    if p.x == q.x && p.y == q.y && p.w == q.w && p.h == q.h && p.w > 0.0 && p.h > 0.0 {
        return 1.0;
    }
    let (px1, py1, px2, py2) = (p.x, p.y, p.x + p.w, p.y + p.h);
    let (qx1, qy1, qx2, qy2) = (q.x, q.y, q.x + q.w, q.y + q.h);
    let left = if px1 > qx1 { px1 } else { qx1 };
    let right = if px2 < qx2 { px2 } else { qx2 };
    let top = if py1 > qy1 { py1 } else { qy1 };
    let bottom = if py2 < qy2 { py2 } else { qy2 };
    if right <= left || bottom <= top {
        return 0.0;
    }
    let inter = (right - left) * (bottom - top);
    let union = p.w * p.h + q.w * q.h - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// Detection indices by descending score, ties to the lower index.
fn score_order(dets: &[Detection]) -> Vec<usize> {
    let mut taken = vec![false; dets.len()];
    let mut order = Vec::with_capacity(dets.len());
    for _ in 0..dets.len() {
        let mut best: Option<usize> = None;
        for j in 0..dets.len() {
            if taken[j] {
                continue;
            }
            match best {
                Some(b) if dets[j].score <= dets[b].score => {}
                _ => best = Some(j),
            }
        }
        let b = best.expect("an untaken detection remains");
        taken[b] = true;
        order.push(b);
    }
    order
}

fn find_detections<'a>(dets: &'a DetectionSet, path: &str) -> Option<&'a [Detection]> {
    for img in &dets.images {
        if img.path == path {
            return Some(&img.dets);
        }
    }
    None
}

/// Reference implementation of the whole-dataset calibration.
pub fn oracle_calibrate(
    anns: &AnnotationSet,
    dets: &DetectionSet,
    cfg: &CalibrationConfig,
) -> Result<CalibrationResult, ConfigError> {
    cfg.validate()?;
    let empty: [Detection; 0] = [];
    let joined: Vec<&[Detection]> = anns
        .images
        .iter()
        .map(|img| find_detections(dets, &img.path).unwrap_or(&empty))
        .collect();

    let mut counters = CalibrationCounters { images: anns.images.len(), ..Default::default() };
    for img in &anns.images {
        if find_detections(dets, &img.path).is_none() {
            counters.missing_detections += 1;
        }
    }
    let mut seen_paths: Vec<&str> = Vec::new();
    for d in &dets.images {
        if seen_paths.contains(&d.path.as_str()) {
            continue;
        }
        seen_paths.push(&d.path);
        if !anns.images.iter().any(|a| a.path == d.path) {
            counters.unmatched_detections += 1;
        }
    }

    let (threshold, adc) = match cfg.adc_override {
        Some(v) => (v, None),
        None => {
            let mut r = AdcResult::default();
            for (img, ds) in anns.images.iter().zip(&joined) {
                let order = score_order(ds);
                let k = img.faces.len().min(ds.len());
                let mut image_sum = 0.0;
                for &j in &order[..k] {
                    image_sum += ds[j].score;
                }
                r.numerator += image_sum;
                r.denominator += k;
                if k > 0 {
                    r.images_used += 1;
                }
                if ds.len() < img.faces.len() {
                    r.shortfall_images += 1;
                }
            }
            if r.denominator > 0 {
                r.value = r.numerator / r.denominator as f64;
            }
            (r.value, Some(r))
        }
    };

    let mut calibrated = anns.clone();
    let mut mbps = Vec::new();
    for (i, img) in anns.images.iter().enumerate() {
        let ds = joined[i];
        let order = score_order(ds);
        let mut claimed = vec![false; img.faces.len()];
        let mut replacements: Vec<(usize, usize, f64)> = Vec::new();
        for &j in &order {
            if ds[j].score <= threshold {
                continue;
            }
            counters.hcdrs += 1;
            let mut best: Option<(usize, f64)> = None;
            for (k, face) in img.faces.iter().enumerate() {
                if !cfg.include_invalid && face.invalid != 0 {
                    continue;
                }
                let v = corner_iou(&ds[j].bbox, &face.bbox);
                match best {
                    Some((_, bv)) if v <= bv => {}
                    _ => best = Some((k, v)),
                }
            }
            let Some((k, v)) = best else { continue };
            if v < cfg.t_m || v > cfg.t_c {
                counters.skipped_out_of_interval += 1;
            } else if claimed[k] {
                counters.skipped_already_claimed += 1;
            } else {
                claimed[k] = true;
                replacements.push((j, k, v));
            }
        }
        for (j, k, v) in replacements {
            let old = img.faces[k].bbox;
            calibrated.images[i].faces[k].bbox = ds[j].bbox;
            mbps.push(MbpRecord {
                image: img.path.clone(),
                det_index: j,
                ann_index: k,
                iou: v,
                score: ds[j].score,
                old_box: old,
                new_box: ds[j].bbox,
            });
        }
    }

    Ok(CalibrationResult {
        calibrated,
        mbps,
        counters,
        effective_adc: threshold,
        adc,
        wall_time: 0.0,
    })
}
