//! WIDER FACE ground-truth files.
//!
//! ```text
//! 0--Parade/0_Parade_marchingband_1_849.jpg
//! 1
//! 449 330 122 149 0 0 0 0 0 0
//! ```
//!
//! Each record is a path line, a face count `K`, then `K` lines of
//! `x y w h blur expression illumination invalid occlusion pose`. Records
//! with `K = 0` are followed by one all-zero placeholder line, which is
//! consumed on input and emitted on output.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use bdc_core::{AnnotationSet, BBox, FaceAnnotation, ImageAnnotations, Rounding};

use super::{format_coord, LineReader};
use crate::error::{Error, Result};

const FIELDS: usize = 10;
const PLACEHOLDER: &str = "0 0 0 0 0 0 0 0 0 0";

fn is_placeholder(line: &str) -> bool {
    let fields: Vec<&str> = line.split_whitespace().collect();
    fields.len() == FIELDS && fields.iter().all(|f| f.parse::<f64>() == Ok(0.0))
}

fn parse_face(lines: &LineReader<'_>, line: &str) -> Result<FaceAnnotation> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != FIELDS {
        return Err(lines.error(format!(
            "expected {FIELDS} fields per face, found {}",
            fields.len()
        )));
    }
    let mut coords = [0.0f64; 4];
    for (c, f) in coords.iter_mut().zip(&fields[..4]) {
        *c = f
            .parse()
            .map_err(|_| lines.error(format!("invalid box coordinate `{f}`")))?;
    }
    let bbox = BBox::try_new(coords[0], coords[1], coords[2], coords[3])
        .map_err(|e| lines.error(e.to_string()))?;
    let mut flags = [0u8; 6];
    for (v, f) in flags.iter_mut().zip(&fields[4..]) {
        *v = f
            .parse()
            .map_err(|_| lines.error(format!("invalid attribute flag `{f}`")))?;
    }
    let face = FaceAnnotation {
        bbox,
        blur: flags[0],
        expression: flags[1],
        illumination: flags[2],
        invalid: flags[3],
        occlusion: flags[4],
        pose: flags[5],
    };
    let bad = face.out_of_range_flags();
    if !bad.is_empty() {
        log::warn!("{}:{}: flag(s) out of range: {}", lines.origin, lines.line_no, bad.join(", "));
    }
    Ok(face)
}

/// Parses a ground-truth file. `origin` names the input in error messages.
pub fn parse_wider_gt(text: &str, origin: &str) -> Result<AnnotationSet> {
    let mut lines = LineReader::new(text, origin);
    let mut images = Vec::new();
    let mut seen = HashSet::new();
    while let Some(path_line) = lines.next_record_start() {
        let path = path_line.trim().to_string();
        if !seen.insert(path.clone()) {
            return Err(lines.error(format!("duplicate image path `{path}`")));
        }
        let count_line = lines
            .next_line()
            .ok_or_else(|| lines.error_eof(format!("missing face count for `{path}`")))?;
        let count: usize = count_line
            .trim()
            .parse()
            .map_err(|_| lines.error(format!("invalid face count `{}`", count_line.trim())))?;
        let mut faces = Vec::with_capacity(count);
        if count == 0 {
            if lines.peek().is_some_and(is_placeholder) {
                lines.next_line();
            }
        } else {
            for k in 0..count {
                let line = lines.next_line().ok_or_else(|| {
                    lines.error_eof(format!("`{path}` declares {count} faces, found {k}"))
                })?;
                faces.push(parse_face(&lines, line)?);
            }
        }
        images.push(ImageAnnotations::new(path, faces));
    }
    Ok(AnnotationSet::new(images))
}

pub fn read_wider_gt(path: &Path) -> Result<AnnotationSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_wider_gt(&text, &path.display().to_string())
}

/// Serializes `set` in input order. Integral coordinates are written bare.
pub fn write_wider_gt(set: &AnnotationSet, rounding: Rounding) -> String {
    let mut out = String::with_capacity(set.images.len() * 64 + set.face_count() * 32);
    for img in &set.images {
        out.push_str(&img.path);
        out.push('\n');
        let _ = writeln!(out, "{}", img.faces.len());
        if img.faces.is_empty() {
            out.push_str(PLACEHOLDER);
            out.push('\n');
        }
        for f in &img.faces {
            let b = &f.bbox;
            let _ = writeln!(
                out,
                "{} {} {} {} {} {} {} {} {} {}",
                format_coord(b.x, rounding),
                format_coord(b.y, rounding),
                format_coord(b.w, rounding),
                format_coord(b.h, rounding),
                f.blur,
                f.expression,
                f.illumination,
                f.invalid,
                f.occlusion,
                f.pose
            );
        }
    }
    out
}

pub fn save_wider_gt(path: &Path, set: &AnnotationSet, rounding: Rounding) -> Result<()> {
    super::write_file(path, write_wider_gt(set, rounding).as_bytes())
}
