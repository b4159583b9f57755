//! Report files and the replacement listing.

use std::fmt::Write as _;

use bdc_core::report::{
    mbps_by_iou, summarize_losses, LocalizationHistogram, LossDeltaRecord, LossSummary, RunSummary,
    LOSS_NAME, LOSS_NOTE,
};
use bdc_core::MbpRecord;
use serde::Serialize;

/// Column order of the tab-separated replacement listing.
pub const MBP_HEADER: &str =
    "image\tann_index\told_x\told_y\told_w\told_h\tnew_x\tnew_y\tnew_w\tnew_h\tiou\tscore";

/// Tab-separated listing, lowest IoU first.
pub fn mbp_tsv(mbps: &[MbpRecord]) -> String {
    let mut out = String::with_capacity(64 * (mbps.len() + 1));
    out.push_str(MBP_HEADER);
    out.push('\n');
    for m in mbps_by_iou(mbps) {
        let (o, n) = (&m.old_box, &m.new_box);
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            m.image, m.ann_index, o.x, o.y, o.w, o.h, n.x, n.y, n.w, n.h, m.iou, m.score
        );
    }
    out
}

#[derive(Serialize)]
struct MbpRow<'a> {
    image: &'a str,
    ann_index: usize,
    old_box: [f64; 4],
    new_box: [f64; 4],
    iou: f64,
    score: f64,
}

/// JSON array with the same rows and order as [`mbp_tsv`].
pub fn mbp_json(mbps: &[MbpRecord]) -> String {
    let rows: Vec<MbpRow<'_>> = mbps_by_iou(mbps)
        .into_iter()
        .map(|m| MbpRow {
            image: &m.image,
            ann_index: m.ann_index,
            old_box: [m.old_box.x, m.old_box.y, m.old_box.w, m.old_box.h],
            new_box: [m.new_box.x, m.new_box.y, m.new_box.w, m.new_box.h],
            iou: m.iou,
            score: m.score,
        })
        .collect();
    serde_json::to_string_pretty(&rows).expect("rows serialize") + "\n"
}

#[derive(Debug, Serialize)]
pub struct LossSection {
    pub name: &'static str,
    pub note: &'static str,
    pub summary: LossSummary,
}

impl LossSection {
    pub fn new(records: &[LossDeltaRecord]) -> Self {
        LossSection { name: LOSS_NAME, note: LOSS_NOTE, summary: summarize_losses(records) }
    }
}

/// Structured calibration report.
#[derive(Debug, Serialize)]
pub struct CalibrationReport<'a> {
    #[serde(flatten)]
    pub summary: &'a RunSummary,
    /// Seconds spent in matching and replacement alone.
    pub calibrate_time: f64,
    pub histogram: &'a LocalizationHistogram,
    pub loss: LossSection,
}

impl CalibrationReport<'_> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

fn interval(lo: f64, hi: f64, closed: bool) -> String {
    format!("[{lo},{hi}{}", if closed { "]" } else { ")" })
}

/// Plain-text histogram table: partition rows, then aggregate rows.
pub fn histogram_table(h: &LocalizationHistogram) -> String {
    let mut out = String::from("index\tinterval\tnumber\tpercentage\n");
    let last = h.bins.len().saturating_sub(1);
    for (i, b) in h.bins.iter().enumerate() {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{:.3}",
            i + 1,
            interval(b.lower, b.upper, i == last),
            b.count,
            b.percentage
        );
    }
    for (i, b) in h.aggregates.iter().enumerate() {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{:.3}",
            h.bins.len() + i + 1,
            interval(b.lower, b.upper, true),
            b.count,
            b.percentage
        );
    }
    let _ = writeln!(out, "total\t\t{}\t", h.total);
    out
}
