//! Axis-aligned boxes in pixel units.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("invalid box: width {w} and height {h} must both be positive and finite")]
pub struct InvalidBox {
    pub w: f64,
    pub h: f64,
}

/// Top-left corner plus width/height, sub-pixel precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self, InvalidBox> {
        let ok = x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite();
        if !ok || w <= 0.0 || h <= 0.0 {
            return Err(InvalidBox { w, h });
        }
        Ok(Self { x, y, w, h })
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self, InvalidBox> {
        Self::new(cx - w / 2.0, cy - h / 2.0, w, h)
    }

    pub fn is_valid(&self) -> bool {
        Self::new(self.x, self.y, self.w, self.h).is_ok()
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self { x: self.x + dx, y: self.y + dy, ..*self }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { x: self.x * factor, y: self.y * factor, w: self.w * factor, h: self.h * factor }
    }

    /// Area of the overlap with `other`, zero when disjoint.
    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let iw = self.right().min(other.right()) - self.x.max(other.x);
        let ih = self.bottom().min(other.bottom()) - self.y.max(other.y);
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih
        }
    }
}

/// Intersection over union.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// L1 distance between the (center x, center y, width, height) vectors of two
/// boxes. Used to pick the re-initialization candidate nearest to the box the
/// tracker last reported.
pub fn c_box(prev: &BBox, cand: &BBox) -> f64 {
    let (pcx, pcy) = prev.center();
    let (ccx, ccy) = cand.center();
    (pcx - ccx).abs() + (prev.w - cand.w).abs() + (pcy - ccy).abs() + (prev.h - cand.h).abs()
}
