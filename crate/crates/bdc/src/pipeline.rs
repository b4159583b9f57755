//! Threaded, timed calibration over a whole dataset.

use std::time::Instant;

use bdc_core::calibrate::{calibrate_pair, effective_adc};
use bdc_core::{align, AnnotationSet, CalibrationConfig, CalibrationResult, DetectionSet, ImageCalibration};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Runs `f` on a pool of `threads` workers, or inline when `threads <= 1`.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads <= 1 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start {threads} worker threads: {e}")))?;
    Ok(pool.install(f))
}

/// Aligns, thresholds and calibrates. Per-image work is spread over
/// `threads` workers; results keep annotation order, so the output does not
/// depend on the thread count.
pub fn calibrate_dataset(
    anns: &AnnotationSet,
    dets: &DetectionSet,
    cfg: &CalibrationConfig,
    threads: usize,
) -> Result<CalibrationResult> {
    cfg.validate().map_err(|e| Error::invalid(e.to_string()))?;
    let start = Instant::now();
    let alignment = align(anns, dets);
    if alignment.pairs.is_empty() {
        log::warn!("calibrating an empty dataset");
    }
    let (adc, adc_result) = effective_adc(&alignment.pairs, cfg);
    let pairs = &alignment.pairs;
    let images: Vec<ImageCalibration> = if threads <= 1 {
        pairs.iter().map(|p| calibrate_pair(p, adc, cfg)).collect()
    } else {
        with_threads(threads, || pairs.par_iter().map(|p| calibrate_pair(p, adc, cfg)).collect())?
    };
    let mut result = CalibrationResult::from_images(images, adc, adc_result);
    result.counters.missing_detections = alignment.missing_detections;
    result.counters.unmatched_detections = alignment.unmatched_detections;
    result.wall_time = start.elapsed().as_secs_f64();
    Ok(result)
}
