//! In-memory annotation and detection sets, and their per-image join.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::geometry::BBox;

/// Ground-truth face box plus the six WIDER attribute flags.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FaceAnnotation {
    pub bbox: BBox,
    pub blur: u8,
    pub expression: u8,
    pub illumination: u8,
    pub invalid: u8,
    pub occlusion: u8,
    pub pose: u8,
}

impl FaceAnnotation {
    pub fn new(bbox: BBox) -> Self {
        FaceAnnotation { bbox, ..Default::default() }
    }

    pub fn is_invalid(&self) -> bool {
        self.invalid != 0
    }

    /// Names of flags outside their documented ranges.
    pub fn out_of_range_flags(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let checks: [(&'static str, u8, u8); 6] = [
            ("blur", self.blur, 2),
            ("expression", self.expression, 1),
            ("illumination", self.illumination, 1),
            ("invalid", self.invalid, 1),
            ("occlusion", self.occlusion, 2),
            ("pose", self.pose, 1),
        ];
        for (name, value, max) in checks {
            if value > max {
                out.push(name);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ImageAnnotations {
    pub path: String,
    pub faces: Vec<FaceAnnotation>,
}

impl ImageAnnotations {
    pub fn new(path: impl Into<String>, faces: Vec<FaceAnnotation>) -> Self {
        ImageAnnotations { path: path.into(), faces }
    }
}

/// Per-image annotations in file order.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AnnotationSet {
    pub images: Vec<ImageAnnotations>,
}

impl AnnotationSet {
    pub fn new(images: Vec<ImageAnnotations>) -> Self {
        AnnotationSet { images }
    }

    pub fn face_count(&self) -> usize {
        self.images.iter().map(|i| i.faces.len()).sum()
    }

    /// First path that occurs more than once, if any.
    pub fn duplicate_path(&self) -> Option<&str> {
        let mut seen = BTreeMap::new();
        for img in &self.images {
            if seen.insert(img.path.as_str(), ()).is_some() {
                return Some(img.path.as_str());
            }
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Detection {
    pub bbox: BBox,
    pub score: f64,
}

impl Detection {
    pub fn new(bbox: BBox, score: f64) -> Self {
        Detection { bbox, score }
    }
}

/// Detections for one image, kept sorted by descending score.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ImageDetections {
    pub path: String,
    pub dets: Vec<Detection>,
}

impl ImageDetections {
    /// Builds the list and sorts it. Equal scores keep their input order.
    pub fn new(path: impl Into<String>, mut dets: Vec<Detection>) -> Self {
        sort_by_score(&mut dets);
        ImageDetections { path: path.into(), dets }
    }

    pub fn empty(path: impl Into<String>) -> Self {
        ImageDetections { path: path.into(), dets: Vec::new() }
    }

    pub fn is_sorted(&self) -> bool {
        self.dets.windows(2).all(|w| w[0].score >= w[1].score)
    }
}

/// Stable descending sort by score.
pub fn sort_by_score(dets: &mut [Detection]) {
    dets.sort_by(|a, b| b.score.total_cmp(&a.score));
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DetectionSet {
    pub images: Vec<ImageDetections>,
}

impl DetectionSet {
    pub fn new(images: Vec<ImageDetections>) -> Self {
        DetectionSet { images }
    }

    pub fn detection_count(&self) -> usize {
        self.images.iter().map(|i| i.dets.len()).sum()
    }

    pub fn duplicate_path(&self) -> Option<&str> {
        let mut seen = BTreeMap::new();
        for img in &self.images {
            if seen.insert(img.path.as_str(), ()).is_some() {
                return Some(img.path.as_str());
            }
        }
        None
    }
}

/// One image's annotations next to its detections.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePair<'a> {
    pub anns: &'a ImageAnnotations,
    pub dets: &'a [Detection],
}

/// Output of [`align`].
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment<'a> {
    pub pairs: Vec<ImagePair<'a>>,
    /// Annotated images without any detection record.
    pub missing_detections: usize,
    /// Detection records whose image is not annotated.
    pub unmatched_detections: usize,
}

/// Joins annotations with detections by exact path, in annotation order.
///
/// Images without detections get an empty list; detection records for
/// unknown images are dropped. Both cases are counted and logged.
pub fn align<'a>(anns: &'a AnnotationSet, dets: &'a DetectionSet) -> Alignment<'a> {
    let mut by_path: BTreeMap<&str, &[Detection]> = BTreeMap::new();
    for img in &dets.images {
        by_path.entry(img.path.as_str()).or_insert(img.dets.as_slice());
    }
    let mut used = 0usize;
    let mut missing = 0usize;
    let mut pairs = Vec::with_capacity(anns.images.len());
    for img in &anns.images {
        let d = match by_path.get(img.path.as_str()) {
            Some(d) => {
                used += 1;
                *d
            }
            None => {
                missing += 1;
                &[][..]
            }
        };
        pairs.push(ImagePair { anns: img, dets: d });
    }
    let unmatched = by_path.len() - used;
    if missing > 0 {
        log::warn!("{missing} annotated image(s) have no detections");
    }
    if unmatched > 0 {
        log::warn!("{unmatched} detection record(s) do not match any annotated image; ignored");
    }
    Alignment {
        pairs,
        missing_detections: missing,
        unmatched_detections: unmatched,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn img(path: &str, n: usize) -> ImageAnnotations {
        ImageAnnotations::new(path, vec![FaceAnnotation::new(BBox::new(0.0, 0.0, 4.0, 4.0)); n])
    }

    fn dets(path: &str, scores: &[f64]) -> ImageDetections {
        ImageDetections::new(
            path,
            scores.iter().map(|&s| Detection::new(BBox::new(0.0, 0.0, 1.0, 1.0), s)).collect(),
        )
    }

    #[test]
    fn missing_detections_get_empty_lists() {
        let anns = AnnotationSet::new(vec![img("a", 1), img("b", 2), img("c", 3)]);
        let d = DetectionSet::new(vec![dets("c", &[0.5]), dets("a", &[0.9, 0.1])]);
        let al = align(&anns, &d);
        assert_eq!(al.pairs.len(), 3);
        assert_eq!(al.missing_detections, 1);
        assert_eq!(al.unmatched_detections, 0);
        assert_eq!(al.pairs[0].anns.path, "a");
        assert_eq!(al.pairs[0].dets.len(), 2);
        assert!(al.pairs[1].dets.is_empty());
        assert_eq!(al.pairs[2].dets.len(), 1);
    }

    #[test]
    fn extra_detection_images_are_ignored() {
        let anns = AnnotationSet::new(vec![img("a", 1)]);
        let d = DetectionSet::new(vec![dets("a", &[0.5]), dets("zzz", &[0.7])]);
        let al = align(&anns, &d);
        assert_eq!(al.pairs.len(), 1);
        assert_eq!(al.unmatched_detections, 1);
        assert_eq!(al.missing_detections, 0);
    }

    #[test]
    fn detections_sort_stably_descending() {
        let d = ImageDetections::new(
            "x",
            vec![
                Detection::new(BBox::new(1.0, 0.0, 1.0, 1.0), 0.1),
                Detection::new(BBox::new(2.0, 0.0, 1.0, 1.0), 0.5),
                Detection::new(BBox::new(3.0, 0.0, 1.0, 1.0), 0.5),
                Detection::new(BBox::new(4.0, 0.0, 1.0, 1.0), 0.9),
            ],
        );
        let xs: Vec<f64> = d.dets.iter().map(|d| d.bbox.x).collect();
        assert_eq!(xs, vec![4.0, 2.0, 3.0, 1.0]);
        assert!(d.is_sorted());
    }

    #[test]
    fn flag_ranges() {
        let mut f = FaceAnnotation::new(BBox::default());
        assert!(f.out_of_range_flags().is_empty());
        f.blur = 3;
        f.pose = 2;
        assert_eq!(f.out_of_range_flags(), vec!["blur", "pose"]);
    }
}
