//! Template matching by exhaustive normalized cross-correlation.

use alloc::vec::Vec;

use crate::geometry::BBox;
use crate::image::Frame;

#[derive(Debug, Clone)]
pub struct NccModel {
    tw: usize,
    th: usize,
    /// Zero-mean template.
    template: Vec<f64>,
    template_energy: f64,
}

fn top_left(b: &BBox) -> (i64, i64) {
    (libm::round(b.x) as i64, libm::round(b.y) as i64)
}

/// Copies a `w`x`h` block with top-left `(x, y)`, subtracting its mean.
/// Returns the block and its energy (sum of squares after centering).
fn centered_block(frame: &Frame, x: i64, y: i64, w: usize, h: usize, buf: &mut Vec<f64>) -> f64 {
    buf.clear();
    let mut sum = 0.0;
    for dy in 0..h as i64 {
        for dx in 0..w as i64 {
            let v = frame.get_clamped(x + dx, y + dy) as f64;
            sum += v;
            buf.push(v);
        }
    }
    let mean = sum / buf.len() as f64;
    let mut energy = 0.0;
    for v in buf.iter_mut() {
        *v -= mean;
        energy += *v * *v;
    }
    energy
}

impl NccModel {
    pub fn new(frame: &Frame, bbox: &BBox) -> Self {
        let tw = (libm::round(bbox.w) as usize).max(1);
        let th = (libm::round(bbox.h) as usize).max(1);
        let (x, y) = top_left(bbox);
        let mut template = Vec::with_capacity(tw * th);
        let template_energy = centered_block(frame, x, y, tw, th, &mut template);
        Self { tw, th, template, template_energy }
    }

    /// Searches every integer offset inside a window twice the box size.
    pub(super) fn step(&mut self, frame: &Frame, prev: &BBox) -> (BBox, f64) {
        let (x0, y0) = top_left(prev);
        let (rx, ry) = ((self.tw / 2) as i64, (self.th / 2) as i64);
        let mut block = Vec::with_capacity(self.tw * self.th);
        let mut best = (f64::NEG_INFINITY, 0i64, 0i64);
        for dy in -ry..=ry {
            for dx in -rx..=rx {
                let energy = centered_block(frame, x0 + dx, y0 + dy, self.tw, self.th, &mut block);
                let denom = libm::sqrt(self.template_energy * energy);
                let score = if denom > 0.0 {
                    let dot: f64 = self.template.iter().zip(&block).map(|(a, b)| a * b).sum();
                    dot / denom
                } else {
                    0.0
                };
                let closer = dx * dx + dy * dy < best.1 * best.1 + best.2 * best.2;
                if score > best.0 || (score == best.0 && closer) {
                    best = (score, dx, dy);
                }
            }
        }
        let (score, dx, dy) = best;
        (prev.translated(dx as f64, dy as f64), (score.clamp(-1.0, 1.0) + 1.0) / 2.0)
    }
}
