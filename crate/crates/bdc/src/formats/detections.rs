//! Detection lists in the WIDER submission layout.
//!
//! A detection directory mirrors the image tree: `0--Parade/x.jpg` has its
//! detections in `0--Parade/x.txt`, which holds a name line, a count line and
//! one `x y w h score` line per detection. The consolidated variant
//! concatenates such records into one file, with the image key as the name
//! line.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use bdc_core::{BBox, Detection, DetectionSet, ImageDetections, Rounding};
use walkdir::WalkDir;

use super::{format_coord, write_file, LineReader};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum DetectionsFormat {
    /// Directory when the path is a directory, consolidated file otherwise.
    #[default]
    Auto,
    Dir,
    File,
}

fn parse_detection(lines: &LineReader<'_>, line: &str) -> Result<Detection> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 5 {
        return Err(lines.error(format!(
            "expected `x y w h score`, found {} fields",
            fields.len()
        )));
    }
    let mut v = [0.0f64; 5];
    for (slot, f) in v.iter_mut().zip(&fields) {
        *slot = f.parse().map_err(|_| lines.error(format!("invalid number `{f}`")))?;
    }
    let bbox = BBox::try_new(v[0], v[1], v[2], v[3]).map_err(|e| lines.error(e.to_string()))?;
    if !v[4].is_finite() {
        return Err(lines.error("score is not finite"));
    }
    if !(0.0..=1.0).contains(&v[4]) {
        log::warn!("{}:{}: score {} outside [0, 1]", lines.origin, lines.line_no, v[4]);
    }
    Ok(Detection::new(bbox, v[4]))
}

/// Reads one record; `None` at end of input.
fn parse_record<'a>(lines: &mut LineReader<'a>) -> Result<Option<(&'a str, Vec<Detection>)>> {
    let Some(name) = lines.next_record_start() else { return Ok(None) };
    let count_line = lines
        .next_line()
        .ok_or_else(|| lines.error_eof("missing detection count"))?;
    let count: usize = count_line
        .trim()
        .parse()
        .map_err(|_| lines.error(format!("invalid detection count `{}`", count_line.trim())))?;
    let mut dets = Vec::with_capacity(count);
    for k in 0..count {
        let line = lines.next_line().ok_or_else(|| {
            lines.error_eof(format!("count mismatch: declared {count}, found {k}"))
        })?;
        dets.push(parse_detection(lines, line)?);
    }
    Ok(Some((name.trim(), dets)))
}

/// Parses one per-image file; the key comes from the caller.
pub fn parse_detections_text(text: &str, origin: &str, key: &str) -> Result<ImageDetections> {
    let mut lines = LineReader::new(text, origin);
    let Some((_, dets)) = parse_record(&mut lines)? else {
        return Err(lines.error_eof("empty detection file"));
    };
    if lines.next_record_start().is_some() {
        return Err(lines.error("count mismatch: more detection lines than declared"));
    }
    Ok(ImageDetections::new(key, dets))
}

/// Parses the consolidated single-file variant.
pub fn parse_detections_file(text: &str, origin: &str) -> Result<DetectionSet> {
    let mut lines = LineReader::new(text, origin);
    let mut images = Vec::new();
    let mut seen = HashSet::new();
    while let Some((key, dets)) = parse_record(&mut lines)? {
        if !seen.insert(key.to_string()) {
            return Err(lines.error(format!("duplicate image key `{key}`")));
        }
        images.push(ImageDetections::new(key, dets));
    }
    Ok(DetectionSet::new(images))
}

fn key_for(rel: &Path, image_ext: &str) -> String {
    let parts: Vec<String> = rel
        .with_extension(image_ext)
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect();
    parts.join("/")
}

/// Loads every `.txt` file under `root`, keyed by its relative path with the
/// extension replaced by `image_ext`. Files are visited in sorted order.
pub fn parse_detections_dir(root: &Path, image_ext: &str) -> Result<DetectionSet> {
    let mut images = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            Error::io(path, e.into())
        })?;
        let path = entry.path();
        if !entry.file_type().is_file() || path.extension().is_none_or(|e| e != "txt") {
            continue;
        }
        let rel = path.strip_prefix(root).expect("walkdir yields paths under root");
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let key = key_for(rel, image_ext);
        images.push(parse_detections_text(&text, &path.display().to_string(), &key)?);
    }
    Ok(DetectionSet::new(images))
}

pub fn read_detections(path: &Path, format: DetectionsFormat, image_ext: &str) -> Result<DetectionSet> {
    let as_dir = match format {
        DetectionsFormat::Dir => true,
        DetectionsFormat::File => false,
        DetectionsFormat::Auto => path.is_dir(),
    };
    if as_dir {
        if !path.is_dir() {
            return Err(Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "detection directory not found"),
            ));
        }
        parse_detections_dir(path, image_ext)
    } else {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_detections_file(&text, &path.display().to_string())
    }
}

fn write_record(out: &mut String, name: &str, dets: &[Detection]) {
    out.push_str(name);
    out.push('\n');
    let _ = writeln!(out, "{}", dets.len());
    for d in dets {
        let b = &d.bbox;
        let _ = writeln!(
            out,
            "{} {} {} {} {}",
            format_coord(b.x, Rounding::TwoDecimals),
            format_coord(b.y, Rounding::TwoDecimals),
            format_coord(b.w, Rounding::TwoDecimals),
            format_coord(b.h, Rounding::TwoDecimals),
            d.score
        );
    }
}

pub fn write_detections_text(set: &DetectionSet) -> String {
    let mut out = String::new();
    for img in &set.images {
        write_record(&mut out, &img.path, &img.dets);
    }
    out
}

/// Writes one `.txt` per image under `root`, mirroring the image keys.
pub fn write_detections_dir(set: &DetectionSet, root: &Path) -> Result<()> {
    for img in &set.images {
        let file: PathBuf = root.join(Path::new(&img.path).with_extension("txt"));
        let name = Path::new(&img.path)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut out = String::new();
        write_record(&mut out, &name, &img.dets);
        write_file(&file, out.as_bytes())?;
    }
    Ok(())
}
