//! Grayscale frames and cropped patches.

use alloc::vec::Vec;
use thiserror::Error;

use crate::geometry::BBox;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ImageError {
    #[error("pixel buffer holds {actual} bytes, expected {width}x{height}")]
    BufferSize { width: u32, height: u32, actual: usize },
    #[error("box does not overlap the {width}x{height} frame")]
    NoOverlap { width: u32, height: u32 },
}

/// One camera frame as a row-major 8-bit grayscale buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: u64,
    /// Seconds since mission start.
    pub timestamp: f64,
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl Frame {
    pub fn new(index: u64, timestamp: f64, width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, ImageError> {
        if pixels.len() != width as usize * height as usize {
            return Err(ImageError::BufferSize { width, height, actual: pixels.len() });
        }
        Ok(Self { index, timestamp, width, height, pixels })
    }

    pub fn filled(index: u64, timestamp: f64, width: u32, height: u32, value: u8) -> Self {
        Self { index, timestamp, width, height, pixels: alloc::vec![value; width as usize * height as usize] }
    }

    /// Builds a frame from interleaved 8-bit RGB.
    pub fn from_rgb(index: u64, timestamp: f64, width: u32, height: u32, rgb: &[u8]) -> Result<Self, ImageError> {
        if rgb.len() != width as usize * height as usize * 3 {
            return Err(ImageError::BufferSize { width, height, actual: rgb.len() / 3 });
        }
        let pixels = rgb.chunks_exact(3).map(|p| luminance(p[0], p[1], p[2])).collect();
        Self::new(index, timestamp, width, height, pixels)
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    /// Pixel lookup with edge replication outside the frame.
    #[inline]
    pub fn get_clamped(&self, x: i64, y: i64) -> u8 {
        let x = x.clamp(0, self.width as i64 - 1) as u32;
        let y = y.clamp(0, self.height as i64 - 1) as u32;
        self.get(x, y)
    }

    pub fn bounds(&self) -> BBox {
        BBox { x: 0.0, y: 0.0, w: self.width as f64, h: self.height as f64 }
    }

    pub fn overlaps(&self, b: &BBox) -> bool {
        self.bounds().intersection_area(b) > 0.0
    }
}

/// Integer luminance `(299 R + 587 G + 114 B) / 1000`, rounded to nearest.
pub fn luminance(r: u8, g: u8, b: u8) -> u8 {
    let sum = 299 * r as u32 + 587 * g as u32 + 114 * b as u32;
    ((sum + 500) / 1000) as u8
}

/// A cropped, integer-aligned region of a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePatch {
    pub source_frame: u64,
    pub region: BBox,
    pub pixels: Vec<u8>,
}

impl ImagePatch {
    pub fn width(&self) -> u32 {
        self.region.w as u32
    }

    pub fn height(&self) -> u32 {
        self.region.h as u32
    }
}

/// Crops `bbox` grown by `margin` pixels on every side, clamped to the frame
/// and rounded outward to whole pixels.
pub fn crop_with_margin(frame: &Frame, bbox: &BBox, margin: f64) -> Result<ImagePatch, ImageError> {
    if !frame.overlaps(bbox) {
        return Err(ImageError::NoOverlap { width: frame.width, height: frame.height });
    }
    let (fw, fh) = (frame.width as f64, frame.height as f64);
    let x0 = libm::floor((bbox.x - margin).max(0.0));
    let y0 = libm::floor((bbox.y - margin).max(0.0));
    let x1 = libm::ceil((bbox.right() + margin).min(fw));
    let y1 = libm::ceil((bbox.bottom() + margin).min(fh));
    let (ix0, iy0, ix1, iy1) = (x0 as u32, y0 as u32, x1 as u32, y1 as u32);

    let mut pixels = Vec::with_capacity(((ix1 - ix0) * (iy1 - iy0)) as usize);
    for y in iy0..iy1 {
        let row = y as usize * frame.width as usize;
        pixels.extend_from_slice(&frame.pixels[row + ix0 as usize..row + ix1 as usize]);
    }
    Ok(ImagePatch { source_frame: frame.index, region: BBox { x: x0, y: y0, w: x1 - x0, h: y1 - y0 }, pixels })
}
