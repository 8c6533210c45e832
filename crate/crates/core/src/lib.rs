//! Core of the skytrack pipeline: a two-stage (propose, then verify) detection
//! service, lightweight single-object trackers, the front-end mission loop that
//! re-initializes them from the service, the wire format between the two, and
//! the evaluation metrics.
//!
//! The crate is `no_std` and only needs `alloc`. Anything touching files,
//! sockets or the wall clock lives in the `skytrack` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod attrs;
pub mod backend;
pub mod eval;
pub mod fft;
pub mod geometry;
pub mod image;
pub mod orchestrator;
pub mod protocol;
pub mod rng;
pub mod synth;
pub mod trackers;

pub use attrs::{PersonAttrs, Pose, Predicate, SemanticQuery};
pub use backend::{BackendTimings, Detection, OracleNoise};
pub use geometry::{c_box, iou, BBox};
pub use image::{crop_with_margin, Frame, ImagePatch};
pub use orchestrator::{MissionConfig, MissionLog, ReinitPolicy};
pub use trackers::{TrackState, TrackerKind};
