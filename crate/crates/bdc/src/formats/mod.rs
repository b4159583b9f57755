//! Text formats: WIDER ground truth and per-image detection lists.
//!
//! Input may use LF or CRLF line endings; output always uses LF.

pub mod detections;
pub mod wider;

use std::fs;
use std::iter::Peekable;
use std::path::Path;
use std::str::Lines;

use bdc_core::Rounding;

use crate::error::{Error, Result};

pub use detections::{
    parse_detections_dir, parse_detections_file, parse_detections_text, read_detections,
    write_detections_dir, write_detections_text, DetectionsFormat,
};
pub use wider::{parse_wider_gt, read_wider_gt, save_wider_gt, write_wider_gt};

/// Integral values bare, others per `rounding`.
pub fn format_coord(v: f64, rounding: Rounding) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        return format!("{}", v as i64);
    }
    match rounding {
        Rounding::TwoDecimals => format!("{v:.2}"),
        Rounding::Integer => format!("{}", v.round() as i64),
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Line cursor that tracks 1-based line numbers for diagnostics.
pub(crate) struct LineReader<'a> {
    lines: Peekable<Lines<'a>>,
    pub origin: &'a str,
    pub line_no: usize,
}

impl<'a> LineReader<'a> {
    pub fn new(text: &'a str, origin: &'a str) -> Self {
        LineReader { lines: text.lines().peekable(), origin, line_no: 0 }
    }

    pub fn next_line(&mut self) -> Option<&'a str> {
        let l = self.lines.next()?;
        self.line_no += 1;
        Some(l)
    }

    pub fn peek(&mut self) -> Option<&'a str> {
        self.lines.peek().copied()
    }

    /// Skips blank lines and returns the next non-blank one.
    pub fn next_record_start(&mut self) -> Option<&'a str> {
        loop {
            let l = self.next_line()?;
            if !l.trim().is_empty() {
                return Some(l);
            }
        }
    }

    pub fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse { origin: self.origin.to_string(), line: self.line_no, message: message.into() }
    }

    pub fn error_eof(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            origin: self.origin.to_string(),
            line: self.line_no + 1,
            message: format!("unexpected end of input: {}", message.into()),
        }
    }
}
