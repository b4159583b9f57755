//! Average detection confidence and high-confidence prefix selection.

use crate::dataset::{Detection, ImagePair};

/// Dataset-level average detection confidence.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdcResult {
    pub value: f64,
    /// Sum of the scores that entered the average.
    pub numerator: f64,
    /// Number of scores that entered the average.
    pub denominator: usize,
    /// Images that contributed at least one score.
    pub images_used: usize,
    /// Images with fewer detections than annotations.
    pub shortfall_images: usize,
}

/// Averages, over all images, the `min(K_a, K_p)` highest scores of each image.
///
/// Per-image sums are accumulated first and then added in image order, so
/// the numerator does not depend on how the per-image work was scheduled.
/// Detections must already be sorted by descending score.
pub fn compute_adc(pairs: &[ImagePair<'_>]) -> AdcResult {
    let mut out = AdcResult::default();
    for p in pairs {
        let (sum, used) = image_top_scores(p);
        if p.dets.len() < p.anns.faces.len() {
            out.shortfall_images += 1;
        }
        if used > 0 {
            out.images_used += 1;
        }
        out.numerator += sum;
        out.denominator += used;
    }
    if out.denominator > 0 {
        out.value = out.numerator / out.denominator as f64;
    } else {
        log::warn!("no detection scores available for the average detection confidence; using 0");
    }
    if out.shortfall_images > 0 {
        log::warn!(
            "{} image(s) have fewer detections than annotations",
            out.shortfall_images
        );
    }
    out
}

/// Sum and count of the scores one image contributes.
pub fn image_top_scores(pair: &ImagePair<'_>) -> (f64, usize) {
    let k = pair.anns.faces.len().min(pair.dets.len());
    let sum = pair.dets[..k].iter().fold(0.0, |acc, d| acc + d.score);
    (sum, k)
}

/// Longest prefix of `dets` whose scores are all strictly above `adc`.
///
/// Scanning stops at the first score `<= adc`.
pub fn select_hcdrs(dets: &[Detection], adc: f64) -> &[Detection] {
    let end = dets.iter().position(|d| d.score <= adc).unwrap_or(dets.len());
    &dets[..end]
}
