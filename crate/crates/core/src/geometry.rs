//! Axis-aligned box arithmetic.
//!
//! Boxes are stored as `(x, y, w, h)` in pixels and treated as the continuous
//! rectangle `[x, x + w) × [y, y + h)`. A box with zero width or height is
//! degenerate: it has area 0 and IoU 0 against everything, itself included.

use alloc::vec::Vec;
use core::fmt;

/// Axis-aligned bounding box in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

/// Why a box was rejected by [`BBox::try_new`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxError {
    NonFinite,
    NegativeExtent,
}

impl fmt::Display for BoxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoxError::NonFinite => f.write_str("box coordinate is not finite"),
            BoxError::NegativeExtent => f.write_str("box width or height is negative"),
        }
    }
}

impl BBox {
    #[inline]
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        BBox { x, y, w, h }
    }

    /// Builds a box, checking that every field is finite and the extent is non-negative.
    pub fn try_new(x: f64, y: f64, w: f64, h: f64) -> Result<Self, BoxError> {
        if !(x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite()) {
            return Err(BoxError::NonFinite);
        }
        if w < 0.0 || h < 0.0 {
            return Err(BoxError::NegativeExtent);
        }
        Ok(BBox { x, y, w, h })
    }

    #[inline]
    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    #[inline]
    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    #[inline]
    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w * 0.5, self.y + self.h * 0.5)
    }

    #[inline]
    pub fn is_degenerate(&self) -> bool {
        self.w == 0.0 || self.h == 0.0
    }

    #[inline]
    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Same box shifted by `(dx, dy)`.
    #[inline]
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        BBox::new(self.x + dx, self.y + dy, self.w, self.h)
    }
}

#[inline]
pub fn area(b: &BBox) -> f64 {
    b.area()
}

/// Area of the overlap of `a` and `b`, zero when they do not touch.
#[inline]
pub fn intersection(a: &BBox, b: &BBox) -> f64 {
    let iw = a.right().min(b.right()) - a.x.max(b.x);
    let ih = a.bottom().min(b.bottom()) - a.y.max(b.y);
    if iw <= 0.0 || ih <= 0.0 {
        0.0
    } else {
        iw * ih
    }
}

/// Intersection over union. Returns 0 when the union is empty.
///
/// Identical non-degenerate boxes give exactly 1; the edge subtraction
/// alone can lose the last bit for non-integer coordinates.
#[inline]
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    if a == b {
        return if a.is_degenerate() { 0.0 } else { 1.0 };
    }
    let inter = intersection(a, b);
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).min(1.0)
}

/// Smallest axis-aligned box containing both `a` and `b`.
pub fn enclosing(a: &BBox, b: &BBox) -> BBox {
    let x = a.x.min(b.x);
    let y = a.y.min(b.y);
    BBox::new(x, y, a.right().max(b.right()) - x, a.bottom().max(b.bottom()) - y)
}

/// Distance-IoU loss: `1 - IoU(p, g) + ρ² / c²`, where `ρ` is the distance
/// between the box centers and `c` the diagonal of their enclosing box.
///
/// The penalty term is taken as 0 when the enclosing box has zero diagonal.
pub fn diou_loss(pred: &BBox, target: &BBox) -> f64 {
    let (pcx, pcy) = pred.center();
    let (tcx, tcy) = target.center();
    let rho2 = (pcx - tcx) * (pcx - tcx) + (pcy - tcy) * (pcy - tcy);
    let enc = enclosing(pred, target);
    let c2 = enc.w * enc.w + enc.h * enc.h;
    let penalty = if c2 > 0.0 { rho2 / c2 } else { 0.0 };
    1.0 - iou(pred, target) + penalty
}

/// Dense row-major IoU table: one row per predicted box, one column per annotated box.
#[derive(Debug, Clone, PartialEq)]
pub struct IouMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl IouMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        assert!(row < self.rows && col < self.cols, "IoU matrix index out of range");
        self.values[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }
}

pub fn iou_matrix(preds: &[BBox], anns: &[BBox]) -> IouMatrix {
    let mut values = Vec::with_capacity(preds.len() * anns.len());
    for p in preds {
        values.extend(anns.iter().map(|a| iou(p, a)));
    }
    IouMatrix {
        rows: preds.len(),
        cols: anns.len(),
        values,
    }
}

/// Returned by [`row_max_argmax`] for a matrix without columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoColumns;

impl fmt::Display for NoColumns {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("row max/argmax requested on a matrix with no columns")
    }
}

/// Per-row maximum and the first column that attains it.
pub fn row_max_argmax(m: &IouMatrix) -> Result<(Vec<f64>, Vec<usize>), NoColumns> {
    if m.cols == 0 {
        return Err(NoColumns);
    }
    let mut maxes = Vec::with_capacity(m.rows);
    let mut args = Vec::with_capacity(m.rows);
    for r in 0..m.rows {
        let row = m.row(r);
        let mut best = 0;
        for (c, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = c;
            }
        }
        maxes.push(row[best]);
        args.push(best);
    }
    Ok((maxes, args))
}
