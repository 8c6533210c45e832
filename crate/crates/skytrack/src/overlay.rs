//! Per-frame overlay images: ground truth in green, the reported box in a
//! phase-dependent color, and a text label in the top-left corner.

use image::{Rgb, RgbImage};
use skytrack_core::orchestrator::{FrameRecord, Phase};
use skytrack_core::{BBox, Frame};

const GT: Rgb<u8> = Rgb([40, 220, 40]);
const TRACK: Rgb<u8> = Rgb([230, 40, 40]);
const REINIT: Rgb<u8> = Rgb([250, 170, 0]);
const TEXT: Rgb<u8> = Rgb([255, 255, 255]);

pub fn render(frame: &Frame, record: &FrameRecord, gt: Option<BBox>) -> RgbImage {
    let mut img = RgbImage::from_fn(frame.width, frame.height, |x, y| {
        let v = frame.pixels[(y * frame.width + x) as usize];
        Rgb([v, v, v])
    });
    if let Some(b) = gt {
        rect(&mut img, &b, GT);
    }
    if let Some(b) = record.bbox {
        rect(&mut img, &b, if record.phase == Phase::Reinit { REINIT } else { TRACK });
    }
    let conf = record.confidence.map(|c| format!(" {c:.2}")).unwrap_or_default();
    let label = format!("F{} {}{}", record.frame, record.phase.to_string().to_ascii_uppercase(), conf);
    text(&mut img, 2, 2, &label, TEXT);
    img
}

fn rect(img: &mut RgbImage, b: &BBox, color: Rgb<u8>) {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let x0 = b.x.round() as i64;
    let y0 = b.y.round() as i64;
    let x1 = (b.x + b.w).round() as i64 - 1;
    let y1 = (b.y + b.h).round() as i64 - 1;
    let mut put = |x: i64, y: i64| {
        if (0..w).contains(&x) && (0..h).contains(&y) {
            img.put_pixel(x as u32, y as u32, color);
        }
    };
    for x in x0..=x1 {
        put(x, y0);
        put(x, y1);
    }
    for y in y0..=y1 {
        put(x0, y);
        put(x1, y);
    }
}

/// 5x7 glyphs, one byte per row, low five bits used with bit 4 leftmost.
fn glyph(c: char) -> [u8; 7] {
    match c {
        'A' => [0x0e, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11],
        'C' => [0x0e, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0e],
        'E' => [0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x1f],
        'F' => [0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x10],
        'G' => [0x0e, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0f],
        'H' => [0x11, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11],
        'I' => [0x0e, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0e],
        'K' => [0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11],
        'N' => [0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11],
        'R' => [0x1e, 0x11, 0x11, 0x1e, 0x14, 0x12, 0x11],
        'S' => [0x0f, 0x10, 0x10, 0x0e, 0x01, 0x01, 0x1e],
        'T' => [0x1f, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04],
        '0' => [0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e],
        '1' => [0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e],
        '2' => [0x0e, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1f],
        '3' => [0x1e, 0x01, 0x01, 0x0e, 0x01, 0x01, 0x1e],
        '4' => [0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02],
        '5' => [0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e],
        '6' => [0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e],
        '7' => [0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e],
        '9' => [0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c],
        '.' => [0, 0, 0, 0, 0, 0x0c, 0x0c],
        _ => [0; 7],
    }
}

fn text(img: &mut RgbImage, x: u32, y: u32, s: &str, color: Rgb<u8>) {
    for (i, c) in s.chars().enumerate() {
        for (row, bits) in glyph(c).iter().enumerate() {
            for col in 0..5u32 {
                let (px, py) = (x + i as u32 * 6 + col, y + row as u32);
                if bits & (0x10 >> col) != 0 && px < img.width() && py < img.height() {
                    img.put_pixel(px, py, color);
                }
            }
        }
    }
}
