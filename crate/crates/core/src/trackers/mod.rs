//! Single-object trackers behind one init/step contract.
//!
//! Every tracker reports a confidence in `[0, 1]`. Translation only: the box
//! keeps the size it was initialized with, scale changes are left to
//! re-initialization from the back-end.

mod mosse;
mod ncc;

use alloc::boxed::Box;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BBox;
use crate::image::Frame;

pub use mosse::{MosseModel, MosseParams};
pub use ncc::NccModel;

/// Smallest box side a tracker accepts, in pixels.
pub const MIN_BOX_SIDE: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackerError {
    #[error("box {w}x{h} is smaller than the {min}x{min} minimum", min = MIN_BOX_SIDE)]
    BoxTooSmall { w: f64, h: f64 },
    #[error("box does not overlap the frame")]
    NoOverlap,
    #[error("tracker is lost and must be re-initialized")]
    NotTracking,
    #[error("invalid tracker parameters: {0}")]
    InvalidParams(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackerKind {
    Mosse,
    Ncc,
    Static,
}

impl TrackerKind {
    pub const ALL: [TrackerKind; 3] = [TrackerKind::Mosse, TrackerKind::Ncc, TrackerKind::Static];

    pub fn as_str(self) -> &'static str {
        match self {
            TrackerKind::Mosse => "mosse",
            TrackerKind::Ncc => "ncc",
            TrackerKind::Static => "static",
        }
    }
}

impl fmt::Display for TrackerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TrackerKind {
    type Err = alloc::string::String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TrackerKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| alloc::format!("unknown tracker {s:?} (expected mosse, ncc or static)"))
    }
}

/// Whether the tracker's confidence is a genuine self-evaluation. The static
/// baseline always reports 1.0, which says nothing about the track.
pub fn tracker_is_score_enabled(kind: TrackerKind) -> bool {
    match kind {
        TrackerKind::Mosse | TrackerKind::Ncc => true,
        TrackerKind::Static => false,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackerParams {
    #[serde(default)]
    pub mosse: MosseParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrackStatus {
    Tracking,
    Lost,
}

#[derive(Debug, Clone)]
pub enum TrackerModel {
    Mosse(Box<MosseModel>),
    Ncc(NccModel),
    Static,
}

#[derive(Debug, Clone)]
pub struct TrackState {
    pub kind: TrackerKind,
    pub bbox: BBox,
    pub confidence: f64,
    pub status: TrackStatus,
    pub model: TrackerModel,
    pub frames_tracked: u64,
}

impl TrackState {
    pub fn mark_lost(&mut self) {
        self.status = TrackStatus::Lost;
    }
}

/// Builds a tracker on `frame` at `bbox`.
pub fn tracker_init(
    kind: TrackerKind,
    frame: &Frame,
    bbox: BBox,
    params: &TrackerParams,
) -> Result<TrackState, TrackerError> {
    if !frame.overlaps(&bbox) {
        return Err(TrackerError::NoOverlap);
    }
    if bbox.w < MIN_BOX_SIDE || bbox.h < MIN_BOX_SIDE {
        return Err(TrackerError::BoxTooSmall { w: bbox.w, h: bbox.h });
    }
    let model = match kind {
        TrackerKind::Mosse => TrackerModel::Mosse(Box::new(MosseModel::train(frame, &bbox, &params.mosse)?)),
        TrackerKind::Ncc => TrackerModel::Ncc(NccModel::new(frame, &bbox)),
        TrackerKind::Static => TrackerModel::Static,
    };
    Ok(TrackState { kind, bbox, confidence: 1.0, status: TrackStatus::Tracking, model, frames_tracked: 0 })
}

/// Advances the tracker by one frame, returning the new box and confidence.
/// A vanished target shows up as low confidence, not as an error.
pub fn tracker_step(state: &mut TrackState, frame: &Frame) -> Result<(BBox, f64), TrackerError> {
    if state.status != TrackStatus::Tracking {
        return Err(TrackerError::NotTracking);
    }
    let (bbox, confidence) = match &mut state.model {
        TrackerModel::Mosse(m) => m.step(frame, &state.bbox),
        TrackerModel::Ncc(m) => m.step(frame, &state.bbox),
        TrackerModel::Static => (state.bbox, 1.0),
    };
    let confidence = if confidence.is_finite() { confidence.clamp(0.0, 1.0) } else { 0.0 };
    state.bbox = bbox;
    state.confidence = confidence;
    state.frames_tracked += 1;
    Ok((bbox, confidence))
}
