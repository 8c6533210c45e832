use std::path::Path;

use image::{GrayImage, RgbImage};
use skytrack_core::Frame;

use crate::dataset::DatasetError;

/// Decodes any supported image into a grayscale frame.
pub fn load_frame(path: &Path, index: u64, timestamp: f64) -> Result<Frame, DatasetError> {
    let img = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => DatasetError::io(path, io),
        other => DatasetError::Image { path: path.to_path_buf(), message: other.to_string() },
    })?;
    let rgb = img.to_rgb8();
    Frame::from_rgb(index, timestamp, rgb.width(), rgb.height(), rgb.as_raw())
        .map_err(|e| DatasetError::Image { path: path.to_path_buf(), message: e.to_string() })
}

pub fn save_gray(path: &Path, frame: &Frame) -> Result<(), DatasetError> {
    let img =
        GrayImage::from_raw(frame.width, frame.height, frame.pixels.clone()).expect("frame buffer matches its size");
    img.save(path).map_err(|e| DatasetError::Image { path: path.to_path_buf(), message: e.to_string() })
}

pub fn save_rgb(path: &Path, img: &RgbImage) -> Result<(), DatasetError> {
    img.save(path).map_err(|e| DatasetError::Image { path: path.to_path_buf(), message: e.to_string() })
}
