//! Front-end mission loop.
//!
//! Search with the back-end, track locally, ask the back-end again when the
//! tracker's confidence falls under the threshold, and log every frame.
//!
//! Time is virtual. Frames become available at their capture timestamps, the
//! edge spends whatever the [`EdgeClock`] charges for its work, and back-end
//! exchanges take the link's transmission time plus the service's reported
//! `t_f`. A response is picked up at the first frame boundary at or after its
//! arrival; when that happens before the next frame is captured, it applies to
//! the current frame. At most one request is in flight at any time and frames
//! are never queued.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attrs::SemanticQuery;
use crate::backend::{Detection, OracleConfig, OracleNoise, OracleService, DEFAULT_MARGIN};
use crate::geometry::{c_box, BBox};
use crate::image::Frame;
use crate::protocol::{decode, encode, DetectRequest, Link, LinkModel, WireError, WireMessage};
use crate::trackers::{
    tracker_init, tracker_is_score_enabled, tracker_step, TrackState, TrackerError, TrackerKind, TrackerParams,
};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{0}")]
pub struct SourceError(pub String);

/// Frames plus their annotations, in capture order.
pub trait FrameSource {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Capture time of frame `index`, seconds since mission start.
    fn timestamp(&self, index: usize) -> f64;

    fn frame(&self, index: usize) -> Result<Frame, SourceError>;

    fn ground_truth(&self, index: usize) -> Option<BBox>;
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{0}")]
pub struct TransportError(pub String);

/// Carries one framed request to a detection service and returns its framed
/// reply. The in-process oracle and TCP clients implement this identically.
pub trait DetectionBackend {
    fn exchange(&mut self, request: &[u8]) -> Result<Vec<u8>, TransportError>;
}

impl<B: DetectionBackend + ?Sized> DetectionBackend for alloc::boxed::Box<B> {
    fn exchange(&mut self, request: &[u8]) -> Result<Vec<u8>, TransportError> {
        (**self).exchange(request)
    }
}

impl DetectionBackend for OracleService {
    fn exchange(&mut self, request: &[u8]) -> Result<Vec<u8>, TransportError> {
        Ok(self.handle_payload(request.get(4..).unwrap_or_default()))
    }
}

impl DetectionBackend for &OracleService {
    fn exchange(&mut self, request: &[u8]) -> Result<Vec<u8>, TransportError> {
        Ok(self.handle_payload(request.get(4..).unwrap_or_default()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeWork {
    /// Fetching the frame from the camera or disk.
    Capture,
    TrackerInit,
    TrackerStep,
    Encode,
    Decode,
}

/// Charges time for work done on the edge device.
pub trait EdgeClock {
    fn timed<R>(&mut self, work: EdgeWork, f: impl FnOnce() -> R) -> (R, f64);
}

/// Fixed per-work-unit costs, seconds. Makes mission logs reproducible bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModeledClock {
    pub capture_s: f64,
    pub init_s: f64,
    pub step_s: f64,
    pub encode_s: f64,
    pub decode_s: f64,
}

impl Default for ModeledClock {
    fn default() -> Self {
        Self { capture_s: 0.0005, init_s: 0.02, step_s: 0.005, encode_s: 0.002, decode_s: 0.0005 }
    }
}

impl EdgeClock for ModeledClock {
    fn timed<R>(&mut self, work: EdgeWork, f: impl FnOnce() -> R) -> (R, f64) {
        let cost = match work {
            EdgeWork::Capture => self.capture_s,
            EdgeWork::TrackerInit => self.init_s,
            EdgeWork::TrackerStep => self.step_s,
            EdgeWork::Encode => self.encode_s,
            EdgeWork::Decode => self.decode_s,
        };
        (f(), cost)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CandidateSelection {
    /// Minimum box cost against the last tracked box.
    ArgminCBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReinitPolicy {
    pub t_c: f64,
    pub enabled: bool,
    pub candidate_selection: CandidateSelection,
}

impl ReinitPolicy {
    /// Enabled exactly when the tracker's score is a self-evaluation.
    pub fn for_tracker(kind: TrackerKind, t_c: f64) -> Self {
        Self { t_c, enabled: tracker_is_score_enabled(kind), candidate_selection: CandidateSelection::ArgminCBox }
    }

    pub fn validate(&self, kind: TrackerKind) -> Result<(), MissionError> {
        if !(0.0..=1.0).contains(&self.t_c) {
            return Err(MissionError::Config(alloc::format!("t_c {} outside [0, 1]", self.t_c)));
        }
        if self.enabled && !tracker_is_score_enabled(kind) {
            return Err(MissionError::Config(alloc::format!(
                "re-initialization needs a score-enabled tracker, {kind} is not"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionConfig {
    pub tracker: TrackerKind,
    #[serde(default)]
    pub tracker_params: TrackerParams,
    pub policy: ReinitPolicy,
    pub query: SemanticQuery,
    #[serde(default)]
    pub link: LinkModel,
    #[serde(default)]
    pub noise: OracleNoise,
    #[serde(default = "default_margin")]
    pub margin: f64,
}

fn default_margin() -> f64 {
    DEFAULT_MARGIN
}

impl MissionConfig {
    pub fn new(tracker: TrackerKind, t_c: f64, query: SemanticQuery) -> Self {
        Self {
            tracker,
            tracker_params: TrackerParams::default(),
            policy: ReinitPolicy::for_tracker(tracker, t_c),
            query,
            link: LinkModel::default(),
            noise: OracleNoise::none(),
            margin: DEFAULT_MARGIN,
        }
    }

    /// Back-end settings for an in-process oracle.
    pub fn oracle(&self) -> OracleConfig {
        OracleConfig { noise: self.noise.clone(), margin: self.margin, ..OracleConfig::default() }
    }

    /// Same mission with a different threshold.
    pub fn with_threshold(&self, t_c: f64) -> Self {
        let mut c = self.clone();
        c.policy.t_c = t_c;
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Searching,
    Tracking,
    Reinit,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Searching => "Searching",
            Phase::Tracking => "Tracking",
            Phase::Reinit => "Reinit",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: u64,
    pub phase: Phase,
    #[serde(rename = "box")]
    pub bbox: Option<BBox>,
    pub confidence: Option<f64>,
    /// Round trip of the exchange that completed at this frame.
    pub t_b: Option<f64>,
    /// Edge compute charged to this frame: capture, codec and tracker work.
    pub edge_step_time: f64,
    /// The tracker's share of `edge_step_time` (initialization and steps).
    pub tracker_time: f64,
    /// Virtual time at which this frame's output was final.
    pub t_done: f64,
    /// Back-end box the tracker was (re)initialized at during this frame.
    pub init_box: Option<BBox>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MissionSummary {
    pub frames_total: u64,
    pub backend_calls: u64,
    /// Tracker initializations after the first acquisition.
    pub reacquisitions: u64,
    /// Virtual time from mission start until the last frame was done.
    pub elapsed: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MissionLog {
    pub records: Vec<FrameRecord>,
    pub summary: MissionSummary,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MissionError {
    #[error("no candidates to select from")]
    EmptyCandidates,
    #[error("invalid mission config: {0}")]
    Config(String),
    #[error("frame {frame}: {source}")]
    Source { frame: usize, source: SourceError },
    #[error("frame {frame}: protocol error: {source}")]
    Protocol { frame: usize, source: WireError },
    #[error("frame {frame}: transport error: {source}")]
    Transport { frame: usize, source: TransportError },
    #[error("frame {frame}: tracker error: {source}")]
    Tracker { frame: usize, source: TrackerError },
}

/// The candidate closest to `prev` under the box cost; ties go to the earliest.
pub fn select_reinit_candidate<'a>(prev: &BBox, candidates: &'a [Detection]) -> Result<&'a Detection, MissionError> {
    let mut best: Option<(&Detection, f64)> = None;
    for c in candidates {
        let cost = c_box(prev, &c.bbox);
        if best.is_none_or(|(_, b)| cost < b) {
            best = Some((c, cost));
        }
    }
    best.map(|(d, _)| d).ok_or(MissionError::EmptyCandidates)
}

/// Highest detector score; ties go to the earliest. Used before any box exists.
pub fn select_initial_candidate(candidates: &[Detection]) -> Result<&Detection, MissionError> {
    let mut best: Option<&Detection> = None;
    for c in candidates {
        if best.is_none_or(|b| c.detector_score > b.detector_score) {
            best = Some(c);
        }
    }
    best.ok_or(MissionError::EmptyCandidates)
}

pub fn should_reinit(state: &TrackState, policy: &ReinitPolicy) -> bool {
    policy.enabled && state.confidence < policy.t_c
}

struct Pending {
    request_frame: Frame,
    request_id: u64,
    sent_at: f64,
    arrives_at: f64,
    reply: Vec<u8>,
}

enum Mode {
    Searching,
    Tracking(TrackState),
    Reinit(TrackState),
}

struct Mission<'a, B, C> {
    config: &'a MissionConfig,
    backend: B,
    clock: C,
    link: Link,
    next_request_id: u64,
    backend_calls: u64,
    acquisitions: u64,
}

impl<B: DetectionBackend, C: EdgeClock> Mission<'_, B, C> {
    /// Encodes and sends `frame`; returns the exchange and the edge time spent.
    fn send(&mut self, frame: &Frame, now: f64, index: usize) -> Result<(Pending, f64), MissionError> {
        let request_id = self.next_request_id;
        self.next_request_id += 1;
        let msg = WireMessage::DetectRequest(DetectRequest::from_frame(request_id, self.config.query.clone(), frame));
        let (bytes, dt) = self.clock.timed(EdgeWork::Encode, || encode(&msg));
        let bytes = bytes.map_err(|source| MissionError::Protocol { frame: index, source })?;
        let sent_at = now + dt;
        let reply = self.backend.exchange(&bytes).map_err(|source| MissionError::Transport { frame: index, source })?;
        // service time is reported by the back-end itself
        let t_f = match decode(&reply) {
            Ok(WireMessage::DetectResponse(r)) => r.timings.t_f.max(0.0),
            _ => 0.0,
        };
        let at_service = self.link.up.transmit(bytes.len(), sent_at);
        let arrives_at = self.link.down.transmit(reply.len(), at_service + t_f);
        self.backend_calls += 1;
        Ok((Pending { request_frame: frame.clone(), request_id, sent_at, arrives_at, reply }, dt))
    }
}

/// Runs the mission over every frame of `source`.
pub fn run_mission<S, B, C>(
    source: &S,
    config: &MissionConfig,
    backend: B,
    clock: C,
) -> Result<MissionLog, MissionError>
where
    S: FrameSource + ?Sized,
    B: DetectionBackend,
    C: EdgeClock,
{
    config.policy.validate(config.tracker)?;
    config.link.validate().map_err(|e| MissionError::Config(e.into()))?;
    let mut m = Mission {
        config,
        backend,
        clock,
        link: Link::new(&config.link),
        next_request_id: 1,
        backend_calls: 0,
        acquisitions: 0,
    };

    let n = source.len();
    let mut records = Vec::with_capacity(n);
    let mut mode = Mode::Searching;
    let mut pending: Option<Pending> = None;
    let mut last_box: Option<BBox> = None;
    let mut now = 0.0f64;

    for i in 0..n {
        let (frame, dt) = m.clock.timed(EdgeWork::Capture, || source.frame(i));
        let frame = frame.map_err(|source| MissionError::Source { frame: i, source })?;
        now = now.max(source.timestamp(i)) + dt;
        let mut edge = dt;
        let mut tracking = 0.0;
        let mut rec = FrameRecord {
            frame: frame.index,
            phase: Phase::Searching,
            bbox: None,
            confidence: None,
            t_b: None,
            edge_step_time: 0.0,
            tracker_time: 0.0,
            t_done: 0.0,
            init_box: None,
        };

        match &mut mode {
            Mode::Searching => {
                if pending.is_none() {
                    let (p, dt) = m.send(&frame, now, i)?;
                    now += dt;
                    edge += dt;
                    pending = Some(p);
                }
            }
            Mode::Tracking(state) | Mode::Reinit(state) => {
                let (stepped, dt) = m.clock.timed(EdgeWork::TrackerStep, || tracker_step(state, &frame));
                let (b, c) = stepped.map_err(|source| MissionError::Tracker { frame: i, source })?;
                now += dt;
                edge += dt;
                tracking += dt;
                rec.bbox = Some(b);
                rec.confidence = Some(c);
                last_box = Some(b);
                rec.phase = if matches!(mode, Mode::Reinit(_)) { Phase::Reinit } else { Phase::Tracking };
                if let Mode::Tracking(state) = &mode {
                    if should_reinit(state, &config.policy) {
                        let (p, dt) = m.send(&frame, now, i)?;
                        now += dt;
                        edge += dt;
                        pending = Some(p);
                        rec.phase = Phase::Reinit;
                        if let Mode::Tracking(state) = core::mem::replace(&mut mode, Mode::Searching) {
                            mode = Mode::Reinit(state);
                        }
                    }
                }
            }
        }

        // frame boundary: idle until the next capture, picking up a reply if it lands
        let boundary = if i + 1 < n { now.max(source.timestamp(i + 1)) } else { now };
        if pending.as_ref().is_some_and(|p| p.arrives_at <= boundary) {
            let p = pending.take().unwrap();
            now = now.max(p.arrives_at);
            rec.t_b = Some(p.arrives_at - p.sent_at);
            let (reply, dt) = m.clock.timed(EdgeWork::Decode, || decode(&p.reply));
            now += dt;
            edge += dt;
            let reply = reply.map_err(|source| MissionError::Protocol { frame: i, source })?;
            if reply.request_id() != p.request_id {
                return Err(MissionError::Protocol {
                    frame: i,
                    source: WireError::BadPayload(alloc::format!(
                        "reply to request {} carries id {}",
                        p.request_id,
                        reply.request_id()
                    )),
                });
            }
            let detections: Vec<Detection> = match reply {
                WireMessage::DetectResponse(r) => r.detections.into_iter().filter(|d| d.verified).collect(),
                WireMessage::ErrorReply(_) => Vec::new(),
                other => {
                    return Err(MissionError::Protocol {
                        frame: i,
                        source: WireError::BadPayload(alloc::format!("unexpected {} reply", other.type_name())),
                    })
                }
            };
            let chosen = match last_box {
                Some(prev) => select_reinit_candidate(&prev, &detections).ok(),
                None => select_initial_candidate(&detections).ok(),
            };
            let initialized = match chosen {
                Some(cand) => {
                    let (state, dt) = m.clock.timed(EdgeWork::TrackerInit, || {
                        tracker_init(config.tracker, &p.request_frame, cand.bbox, &config.tracker_params)
                    });
                    now += dt;
                    edge += dt;
                    tracking += dt;
                    state.ok().map(|s| (s, cand.bbox))
                }
                None => None,
            };
            match initialized {
                Some((mut state, init_box)) => {
                    let (b, c) = if p.request_frame.index == frame.index {
                        (init_box, state.confidence)
                    } else {
                        let (stepped, dt) = m.clock.timed(EdgeWork::TrackerStep, || tracker_step(&mut state, &frame));
                        now += dt;
                        edge += dt;
                        tracking += dt;
                        stepped.map_err(|source| MissionError::Tracker { frame: i, source })?
                    };
                    rec.phase = Phase::Tracking;
                    rec.bbox = Some(b);
                    rec.confidence = Some(c);
                    rec.init_box = Some(init_box);
                    last_box = Some(b);
                    m.acquisitions += 1;
                    mode = Mode::Tracking(state);
                }
                None => {
                    if let Mode::Tracking(s) | Mode::Reinit(s) = &mut mode {
                        s.mark_lost();
                    }
                    mode = Mode::Searching;
                }
            }
        }

        rec.edge_step_time = edge;
        rec.tracker_time = tracking;
        rec.t_done = now;
        records.push(rec);
    }

    Ok(MissionLog {
        summary: MissionSummary {
            frames_total: n as u64,
            backend_calls: m.backend_calls,
            reacquisitions: m.acquisitions.saturating_sub(1),
            elapsed: now,
        },
        records,
    })
}
