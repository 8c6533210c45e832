//! Deterministic synthetic sequences: a textured rectangle moving linearly
//! over a textured background, optionally hidden during declared windows,
//! plus static distractor people.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attrs::{PersonAttrs, Pose, Predicate, SemanticQuery};
use crate::eval::DetectionSample;
use crate::geometry::BBox;
use crate::image::Frame;
use crate::orchestrator::{FrameSource, SourceError};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("spec out of bounds: {0}")]
    SpecOutOfBounds(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonLook {
    pub pose: Pose,
    pub shirt_color: String,
    #[serde(default)]
    pub injured: bool,
}

impl Default for PersonLook {
    fn default() -> Self {
        Self { pose: Pose::Standing, shirt_color: "gray".into(), injured: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    /// `[w, h]` in pixels.
    pub size: [f64; 2],
    /// Top-left at frame 0.
    pub start: [f64; 2],
    /// Pixels per frame.
    #[serde(default)]
    pub velocity: [f64; 2],
    #[serde(default)]
    pub look: PersonLook,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistractorSpec {
    /// `[x, y, w, h]`.
    pub bbox: [f64; 4],
    #[serde(default)]
    pub look: PersonLook,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub name: String,
    pub width: u32,
    pub height: u32,
    pub frames: usize,
    pub fps: f64,
    pub seed: u64,
    pub target: TargetSpec,
    /// Inclusive `[first, last]` frame windows in which the target is hidden.
    #[serde(default)]
    pub occlusions: Vec<[usize; 2]>,
    /// How much of the target an occluder hides, 1.0 hides it completely.
    /// Lower values leave a faded target behind a canopy-like cover that
    /// the detector ignores but a tracker may still latch onto.
    #[serde(default = "full_cover")]
    pub occluder_opacity: f64,
    #[serde(default)]
    pub distractors: Vec<DistractorSpec>,
    pub query: SemanticQuery,
}

impl SynthSpec {
    /// 160x120 at 10 fps, 24x24 target moving +2 px/frame in x, no occlusion.
    pub fn linear(name: &str, frames: usize, seed: u64) -> Self {
        Self {
            name: name.into(),
            width: 160,
            height: 120,
            frames,
            fps: 10.0,
            seed,
            target: TargetSpec {
                size: [24.0, 24.0],
                start: [10.0, 48.0],
                velocity: [2.0, 0.0],
                look: PersonLook::default(),
            },
            occlusions: Vec::new(),
            occluder_opacity: 1.0,
            distractors: Vec::new(),
            query: SemanticQuery::new(
                "person",
                Predicate { shirt_color: Some("gray".into()), ..Default::default() },
                "Locate the person in a gray shirt.",
            )
            .unwrap(),
        }
    }

    /// 60 linear frames; for frames 30 to 39 the target sits behind a cover
    /// with opacity 0.8 and has no ground truth.
    pub fn occlusion(name: &str, seed: u64) -> Self {
        let mut s = Self::linear(name, 60, seed);
        s.occlusions.push([30, 39]);
        s.occluder_opacity = 0.8;
        s
    }

    /// A motionless target captured at 2 fps.
    pub fn stationary(name: &str, frames: usize, seed: u64) -> Self {
        let mut s = Self::linear(name, frames, seed);
        s.target.velocity = [0.0, 0.0];
        s.fps = 2.0;
        s
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let oob = |m: String| Err(SynthError::SpecOutOfBounds(m));
        if self.width == 0 || self.height == 0 || self.frames == 0 {
            return oob("frame size and count must be positive".into());
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return oob(alloc::format!("fps {} must be positive", self.fps));
        }
        let [w, h] = self.target.size;
        if !(0.0..=1.0).contains(&self.occluder_opacity) {
            return oob(alloc::format!("occluder opacity {} outside [0, 1]", self.occluder_opacity));
        }
        if !(w >= 1.0 && h >= 1.0) {
            return oob(alloc::format!("target size {w}x{h} must be at least 1x1"));
        }
        for occ in &self.occlusions {
            if occ[0] > occ[1] {
                return oob(alloc::format!("occlusion window {occ:?} is reversed"));
            }
        }
        let frame = BBox { x: 0.0, y: 0.0, w: self.width as f64, h: self.height as f64 };
        let inside = |b: &BBox| b.x >= frame.x && b.y >= frame.y && b.right() <= frame.w && b.bottom() <= frame.h;
        for i in 0..self.frames {
            let b = self.ground_truth_unoccluded(i);
            if !inside(&b) {
                return oob(alloc::format!("target leaves the frame at frame {i}: {b:?}"));
            }
        }
        for (i, d) in self.distractors.iter().enumerate() {
            let Ok(b) = BBox::new(d.bbox[0], d.bbox[1], d.bbox[2], d.bbox[3]) else {
                return oob(alloc::format!("distractor {i} box is degenerate"));
            };
            if !inside(&b) {
                return oob(alloc::format!("distractor {i} lies outside the frame"));
            }
        }
        Ok(())
    }

    pub fn occluded(&self, i: usize) -> bool {
        self.occlusions.iter().any(|o| (o[0]..=o[1]).contains(&i))
    }

    /// Analytic target box at frame `i`, absent while occluded.
    pub fn ground_truth(&self, i: usize) -> Option<BBox> {
        (!self.occluded(i)).then(|| self.ground_truth_unoccluded(i))
    }

    fn ground_truth_unoccluded(&self, i: usize) -> BBox {
        let t = &self.target;
        BBox {
            x: t.start[0] + t.velocity[0] * i as f64,
            y: t.start[1] + t.velocity[1] * i as f64,
            w: t.size[0],
            h: t.size[1],
        }
    }

    pub fn timestamp(&self, i: usize) -> f64 {
        i as f64 / self.fps
    }

    /// Everyone visible in frame `i`, target first.
    pub fn persons(&self, i: usize) -> Vec<PersonAttrs> {
        let to_attrs = |bbox: BBox, look: &PersonLook| PersonAttrs {
            bbox,
            pose: look.pose,
            shirt_color: look.shirt_color.clone(),
            injured: look.injured,
        };
        let mut out = Vec::new();
        if let Some(b) = self.ground_truth(i) {
            out.push(to_attrs(b, &self.target.look));
        }
        for d in &self.distractors {
            out.push(to_attrs(BBox { x: d.bbox[0], y: d.bbox[1], w: d.bbox[2], h: d.bbox[3] }, &d.look));
        }
        out
    }

    pub fn render(&self, i: usize) -> Frame {
        let (w, h) = (self.width as usize, self.height as usize);
        let mut pixels = background(self.seed, w, h);
        for (k, d) in self.distractors.iter().enumerate() {
            paint(&mut pixels, w, h, d.bbox[0], d.bbox[1], d.bbox[2], d.bbox[3], self.seed, 1 + k as u64);
        }
        if let Some(b) = self.ground_truth(i) {
            paint(&mut pixels, w, h, b.x, b.y, b.w, b.h, self.seed, 0);
        } else if self.occluder_opacity < 1.0 {
            let b = self.ground_truth_unoccluded(i);
            let mut hidden = pixels.clone();
            paint(&mut hidden, w, h, b.x, b.y, b.w, b.h, self.seed, 0);
            let op = self.occluder_opacity;
            for (p, t) in pixels.iter_mut().zip(&hidden) {
                *p = libm::round(op * *p as f64 + (1.0 - op) * *t as f64) as u8;
            }
        }
        Frame { index: i as u64, timestamp: self.timestamp(i), width: self.width, height: self.height, pixels }
    }
}

fn full_cover() -> f64 {
    1.0
}

/// Low-contrast blocky noise, values in 40..80.
fn background(seed: u64, w: usize, h: usize) -> Vec<u8> {
    const BLOCK: usize = 4;
    let (bw, bh) = (w.div_ceil(BLOCK), h.div_ceil(BLOCK));
    let mut r = rng::stream(seed, &[0xb9]);
    let grid: Vec<u8> = (0..bw * bh).map(|_| r.random_range(40..80)).collect();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            out.push(grid[(y / BLOCK) * bw + x / BLOCK]);
        }
    }
    out
}

/// Paints a high-contrast texture anchored to the rectangle's own corner, so
/// integer translations of the rectangle translate its pixels exactly.
#[allow(clippy::too_many_arguments)]
fn paint(pixels: &mut [u8], w: usize, h: usize, x: f64, y: f64, bw: f64, bh: f64, seed: u64, id: u64) {
    const CELL: i64 = 3;
    let (x0, y0) = (libm::round(x) as i64, libm::round(y) as i64);
    let (tw, th) = (libm::round(bw) as i64, libm::round(bh) as i64);
    let (cw, ch) = ((tw + CELL - 1) / CELL, (th + CELL - 1) / CELL);
    let mut r = rng::stream(seed, &[0x7e, id]);
    let cells: Vec<u8> = (0..(cw * ch).max(1)).map(|_| r.random_range(110..=255)).collect();
    for ty in 0..th {
        for tx in 0..tw {
            let (px, py) = (x0 + tx, y0 + ty);
            if px < 0 || py < 0 || px >= w as i64 || py >= h as i64 {
                continue;
            }
            // dark 1 px rim makes the outline distinct from the background
            let rim = tx == 0 || ty == 0 || tx == tw - 1 || ty == th - 1;
            pixels[py as usize * w + px as usize] =
                if rim { 10 } else { cells[((ty / CELL) * cw + tx / CELL) as usize] };
        }
    }
}

/// Shirt colors drawn by [`random_scene`].
pub const SHIRT_COLORS: [&str; 5] = ["gray", "green", "blue", "red", "yellow"];

/// One still image with up to `max_persons` non-overlapping people of random
/// size, pose, shirt color and injury state. Injured people always have a pose
/// that admits the injured label.
pub fn random_scene(seed: u64, index: u64, width: u32, height: u32, max_persons: usize) -> DetectionSample {
    let mut r = rng::stream(seed, &[0x5ce, index]);
    let (w, h) = (width as usize, height as usize);
    let mut pixels = background(rng::mix(seed ^ rng::mix(index)), w, h);
    let count = r.random_range(0..=max_persons);
    let mut persons: Vec<PersonAttrs> = Vec::with_capacity(count);
    for k in 0..count {
        for _ in 0..20 {
            let (pw, ph) = (r.random_range(12..=32) as f64, r.random_range(16..=40) as f64);
            if pw >= width as f64 || ph >= height as f64 {
                break;
            }
            let x = r.random_range(0..=(width as i64 - pw as i64)) as f64;
            let y = r.random_range(0..=(height as i64 - ph as i64)) as f64;
            let bbox = BBox { x, y, w: pw, h: ph };
            if persons.iter().any(|p| p.bbox.intersection_area(&bbox) > 0.0) {
                continue;
            }
            let pose = Pose::ALL[r.random_range(0..Pose::ALL.len())];
            let injured = pose.is_injury_candidate() && r.random_bool(0.4);
            let shirt_color = SHIRT_COLORS[r.random_range(0..SHIRT_COLORS.len())].into();
            paint(&mut pixels, w, h, x, y, pw, ph, rng::mix(seed ^ rng::mix(index)), 1 + k as u64);
            persons.push(PersonAttrs { bbox, pose, shirt_color, injured });
            break;
        }
    }
    DetectionSample { frame: Frame { index, timestamp: 0.0, width, height, pixels }, persons }
}

/// A synthetic sequence rendered on demand.
#[derive(Debug, Clone)]
pub struct SynthSequence {
    pub spec: SynthSpec,
}

impl SynthSequence {
    pub fn new(spec: SynthSpec) -> Result<Self, SynthError> {
        spec.validate()?;
        Ok(Self { spec })
    }

    pub fn annotations(&self) -> Vec<Vec<PersonAttrs>> {
        (0..self.spec.frames).map(|i| self.spec.persons(i)).collect()
    }
}

impl FrameSource for SynthSequence {
    fn len(&self) -> usize {
        self.spec.frames
    }

    fn timestamp(&self, index: usize) -> f64 {
        self.spec.timestamp(index)
    }

    fn frame(&self, index: usize) -> Result<Frame, SourceError> {
        if index >= self.spec.frames {
            return Err(SourceError(alloc::format!("frame {index} out of range")));
        }
        Ok(self.spec.render(index))
    }

    fn ground_truth(&self, index: usize) -> Option<BBox> {
        self.spec.ground_truth(index)
    }
}
