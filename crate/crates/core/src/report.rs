//! Localization histograms, run summaries and the regression-loss diagnostic.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::adc::{select_hcdrs, AdcResult};
use crate::calibrate::{CalibrationConfig, CalibrationCounters, CalibrationResult, MbpRecord};
use crate::dataset::ImagePair;
use crate::geometry::{diou_loss, iou};

pub const DEFAULT_EDGES: [f64; 6] = [0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
pub const DEFAULT_AGGREGATES: [(f64, f64); 2] = [(0.5, 0.8), (0.5, 1.0)];

/// `100 * count / total`, rounded to three decimals. 0 when `total` is 0.
pub fn percentage(count: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = 100.0 * count as f64 / total as f64;
    // p >= 0, so truncating after +0.5 rounds half up.
    ((p * 1000.0 + 0.5) as u64) as f64 / 1000.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub percentage: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LocalizationHistogram {
    /// Partition bins, `[lo, hi)` except the last which is `[lo, hi]`.
    pub bins: Vec<HistogramBin>,
    /// Unions of consecutive partition bins.
    pub aggregates: Vec<HistogramBin>,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EdgeError {
    TooFew,
    NotIncreasing,
    OutOfRange,
    /// An aggregate range does not start and end on bin edges.
    AggregateMisaligned(f64, f64),
}

impl fmt::Display for EdgeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeError::TooFew => f.write_str("at least two bin edges are required"),
            EdgeError::NotIncreasing => f.write_str("bin edges must be strictly increasing"),
            EdgeError::OutOfRange => f.write_str("bin edges must lie within [0, 1]"),
            EdgeError::AggregateMisaligned(lo, hi) => {
                write!(f, "aggregate [{lo}, {hi}] does not fall on bin edges")
            }
        }
    }
}

pub fn validate_edges(edges: &[f64]) -> Result<(), EdgeError> {
    if edges.len() < 2 {
        return Err(EdgeError::TooFew);
    }
    if edges.iter().any(|e| !e.is_finite() || *e < 0.0 || *e > 1.0) {
        return Err(EdgeError::OutOfRange);
    }
    if edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EdgeError::NotIncreasing);
    }
    Ok(())
}

impl LocalizationHistogram {
    /// Builds a histogram from partition counts whose percentages are taken
    /// against `total`.
    pub fn from_counts(edges: &[f64], counts: &[usize], total: usize) -> Result<Self, EdgeError> {
        validate_edges(edges)?;
        assert_eq!(counts.len() + 1, edges.len(), "one count per bin");
        let bins = edges
            .windows(2)
            .zip(counts)
            .map(|(w, &count)| HistogramBin {
                lower: w[0],
                upper: w[1],
                count,
                percentage: percentage(count, total),
            })
            .collect();
        Ok(LocalizationHistogram { bins, aggregates: Vec::new(), total })
    }

    /// Adds an aggregate row spanning the bins from `lo` to `hi`.
    pub fn push_aggregate(&mut self, lo: f64, hi: f64) -> Result<(), EdgeError> {
        let start = self.bins.iter().position(|b| b.lower == lo);
        let end = self.bins.iter().position(|b| b.upper == hi);
        match (start, end) {
            (Some(s), Some(e)) if s <= e => {
                let count = self.bins[s..=e].iter().map(|b| b.count).sum();
                self.aggregates.push(HistogramBin {
                    lower: lo,
                    upper: hi,
                    count,
                    percentage: percentage(count, self.total),
                });
                Ok(())
            }
            _ => Err(EdgeError::AggregateMisaligned(lo, hi)),
        }
    }

    pub fn bin_for(&self, value: f64) -> Option<usize> {
        bin_index(&self.edges(), value)
    }

    fn edges(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.bins.iter().map(|b| b.lower).collect();
        if let Some(last) = self.bins.last() {
            e.push(last.upper);
        }
        e
    }
}

fn bin_index(edges: &[f64], v: f64) -> Option<usize> {
    let n = edges.len() - 1;
    if v < edges[0] || v > edges[n] {
        return None;
    }
    if v == edges[n] {
        return Some(n - 1);
    }
    // last edge with edges[i] <= v
    Some(edges.partition_point(|&e| e <= v) - 1)
}

/// Best IoU of each high-confidence detection against its image's annotations.
///
/// Images without annotations contribute nothing.
pub fn hcdr_max_ious(pairs: &[ImagePair<'_>], adc: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for p in pairs {
        if p.anns.faces.is_empty() {
            continue;
        }
        for d in select_hcdrs(p.dets, adc) {
            let best = p
                .anns
                .faces
                .iter()
                .map(|f| iou(&d.bbox, &f.bbox))
                .fold(0.0, f64::max);
            out.push(best);
        }
    }
    out
}

/// Distribution of best-match IoU over high-confidence detections.
///
/// Detections whose best IoU is below the first edge are not counted;
/// `aggregates` that do not fall on the edges are rejected.
pub fn localization_histogram(
    pairs: &[ImagePair<'_>],
    adc: f64,
    edges: &[f64],
    aggregates: &[(f64, f64)],
) -> Result<LocalizationHistogram, EdgeError> {
    validate_edges(edges)?;
    let mut counts = alloc::vec![0usize; edges.len() - 1];
    for v in hcdr_max_ious(pairs, adc) {
        if let Some(i) = bin_index(edges, v) {
            counts[i] += 1;
        }
    }
    let total = counts.iter().sum();
    let mut hist = LocalizationHistogram::from_counts(edges, &counts, total)?;
    for &(lo, hi) in aggregates {
        hist.push_aggregate(lo, hi)?;
    }
    Ok(hist)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunSummary {
    pub predictor: String,
    pub adc: f64,
    pub adc_overridden: bool,
    pub adc_detail: Option<AdcResult>,
    pub interval: (f64, f64),
    pub calibrated: usize,
    pub wall_time: f64,
    pub counters: CalibrationCounters,
}

pub fn run_summary(
    predictor: &str,
    result: &CalibrationResult,
    cfg: &CalibrationConfig,
) -> RunSummary {
    RunSummary {
        predictor: String::from(predictor),
        adc: result.effective_adc,
        adc_overridden: result.adc.is_none(),
        adc_detail: result.adc,
        interval: (cfg.t_m, cfg.t_c),
        calibrated: result.mbps.len(),
        wall_time: result.wall_time,
        counters: result.counters,
    }
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "predictor {} | ADC {:.6}{} | interval [{}, {}] | calibrated {} | time {:.2}s",
            self.predictor,
            self.adc,
            if self.adc_overridden { " (fixed)" } else { "" },
            self.interval.0,
            self.interval.1,
            self.calibrated,
            self.wall_time
        )
    }
}

pub const LOSS_NAME: &str = "diou";
pub const LOSS_NOTE: &str = "regression loss evaluated with the predictor's box standing in for the training detector's prediction";

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossDeltaRecord {
    pub image: String,
    pub ann_index: usize,
    /// Loss against the original annotation box.
    pub l_orig: f64,
    /// Loss against the calibrated box.
    pub l_calib: f64,
    pub delta: f64,
}

pub fn loss_delta_report(mbps: &[MbpRecord]) -> Vec<LossDeltaRecord> {
    mbps.iter()
        .map(|m| {
            let l_orig = diou_loss(&m.new_box, &m.old_box);
            let l_calib = diou_loss(&m.new_box, &m.new_box);
            LossDeltaRecord {
                image: m.image.clone(),
                ann_index: m.ann_index,
                l_orig,
                l_calib,
                delta: l_orig - l_calib,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossSummary {
    pub count: usize,
    pub mean_l_orig: f64,
    pub mean_l_calib: f64,
    pub min_delta: f64,
    pub max_delta: f64,
}

pub fn summarize_losses(records: &[LossDeltaRecord]) -> LossSummary {
    if records.is_empty() {
        return LossSummary::default();
    }
    let n = records.len() as f64;
    LossSummary {
        count: records.len(),
        mean_l_orig: records.iter().map(|r| r.l_orig).sum::<f64>() / n,
        mean_l_calib: records.iter().map(|r| r.l_calib).sum::<f64>() / n,
        min_delta: records.iter().map(|r| r.delta).fold(f64::INFINITY, f64::min),
        max_delta: records.iter().map(|r| r.delta).fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Ledger entries ordered by ascending IoU; equal IoUs keep ledger order.
pub fn mbps_by_iou(mbps: &[MbpRecord]) -> Vec<&MbpRecord> {
    let mut rows: Vec<&MbpRecord> = mbps.iter().collect();
    rows.sort_by(|a, b| a.iou.total_cmp(&b.iou));
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Detection, FaceAnnotation, ImageAnnotations};
    use crate::geometry::BBox;
    use alloc::vec;

    #[test]
    fn percentage_rounding() {
        assert_eq!(percentage(1, 3), 33.333);
        assert_eq!(percentage(2, 3), 66.667);
        assert_eq!(percentage(5, 0), 0.0);
        assert_eq!(percentage(7, 7), 100.0);
    }

    #[test]
    fn bins_are_half_open_with_closed_last() {
        let e = DEFAULT_EDGES;
        assert_eq!(bin_index(&e, 0.55), Some(0));
        assert_eq!(bin_index(&e, 0.6), Some(1));
        assert_eq!(bin_index(&e, 0.8), Some(3));
        assert_eq!(bin_index(&e, 1.0), Some(4));
        assert_eq!(bin_index(&e, 0.49), None);
    }

    #[test]
    fn three_hcdrs_fall_in_expected_bins() {
        // 10x10 annotation; detections of height 10 at widths chosen so the
        // IoU is exactly 0.55, 0.8 and 1.0.
        let ann = ImageAnnotations::new(
            "a",
            vec![FaceAnnotation::new(BBox::new(0.0, 0.0, 20.0, 10.0))],
        );
        let dets = vec![
            Detection::new(BBox::new(0.0, 0.0, 11.0, 10.0), 0.9),
            Detection::new(BBox::new(0.0, 0.0, 16.0, 10.0), 0.9),
            Detection::new(BBox::new(0.0, 0.0, 20.0, 10.0), 0.9),
        ];
        let pairs = [ImagePair { anns: &ann, dets: &dets }];
        let h = localization_histogram(&pairs, 0.5, &DEFAULT_EDGES, &DEFAULT_AGGREGATES).unwrap();
        let counts: Vec<usize> = h.bins.iter().map(|b| b.count).collect();
        assert_eq!(counts, vec![1, 0, 0, 1, 1]);
        assert_eq!(h.total, 3);
        assert_eq!(h.aggregates[0].count, 1);
        assert_eq!(h.aggregates[1].count, 3);
    }

    #[test]
    fn empty_histogram_is_all_zero() {
        let h = localization_histogram(&[], 0.5, &DEFAULT_EDGES, &DEFAULT_AGGREGATES).unwrap();
        assert!(h.bins.iter().all(|b| b.count == 0 && b.percentage == 0.0));
        assert_eq!(h.total, 0);
    }

    #[test]
    fn bad_edges_are_rejected() {
        assert_eq!(validate_edges(&[0.5]), Err(EdgeError::TooFew));
        assert_eq!(validate_edges(&[0.5, 0.5, 0.9]), Err(EdgeError::NotIncreasing));
        assert_eq!(validate_edges(&[0.5, 1.2]), Err(EdgeError::OutOfRange));
        let h = localization_histogram(&[], 0.5, &[0.5, 0.7, 1.0], &[(0.5, 0.8)]);
        assert_eq!(h, Err(EdgeError::AggregateMisaligned(0.5, 0.8)));
    }

    #[test]
    fn loss_delta_worked_example() {
        let m = MbpRecord {
            image: "a".into(),
            det_index: 0,
            ann_index: 0,
            iou: 2.0 / 3.0,
            score: 0.9,
            old_box: BBox::new(0.0, 0.0, 10.0, 10.0),
            new_box: BBox::new(2.0, 0.0, 10.0, 10.0),
        };
        let r = &loss_delta_report(core::slice::from_ref(&m))[0];
        assert_eq!(r.l_calib, 0.0);
        assert!((r.l_orig - 0.349_726_775_956_284_15).abs() < 1e-9);
        assert!((r.delta - r.l_orig).abs() < 1e-15);

        let same = MbpRecord { old_box: m.new_box, ..m };
        let r = &loss_delta_report(&[same])[0];
        assert_eq!((r.l_orig, r.delta), (0.0, 0.0));
    }
}
