//! Bounding-box calibration core.
//!
//! Finds face annotations that a confident detector localizes differently
//! and replaces their boxes with the detector's boxes. The crate is `no_std`
//! and only needs `alloc`; file formats, timing and the command-line tool
//! live in the `bdc` crate.
//!
//! Pipeline:
//!
//! 1. [`adc::compute_adc`] averages the top detection scores of every image.
//! 2. [`adc::select_hcdrs`] keeps, per image, the detections scoring above it.
//! 3. [`calibrate::calibrate_image`] matches those detections to annotations
//!    and replaces the boxes whose best IoU falls in the calibration interval.

#![no_std]

extern crate alloc;

pub mod adc;
pub mod calibrate;
pub mod dataset;
pub mod geometry;
pub mod report;
pub mod synth;

pub use adc::{compute_adc, select_hcdrs, AdcResult};
pub use calibrate::{
    calibrate_dataset, calibrate_image, CalibrationConfig, CalibrationCounters, CalibrationResult,
    ConfigError, ImageCalibration, MbpRecord, Rounding,
};
pub use dataset::{
    align, Alignment, AnnotationSet, Detection, DetectionSet, FaceAnnotation, ImageAnnotations,
    ImageDetections, ImagePair,
};
pub use geometry::{iou, iou_matrix, row_max_argmax, BBox, IouMatrix};
