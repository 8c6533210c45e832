//! Two-stage detection service backed by ground truth.
//!
//! Stage one proposes every instance of the coarse class, stage two crops
//! each proposal with a context margin and checks it against the full
//! predicate. Both stages have configurable noise channels so the front-end's
//! recovery paths can be exercised, and a deterministic cost model stands in
//! for model latency.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attrs::{PersonAttrs, SemanticQuery};
use crate::geometry::BBox;
use crate::image::{crop_with_margin, Frame, ImagePatch};
use crate::protocol::{decode_payload, encode, DetectRequest, DetectResponse, ErrorReply, WireError, WireMessage};
use crate::rng;

/// Context margin added around proposals before verification, in pixels.
pub const DEFAULT_MARGIN: f64 = 50.0;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Detection {
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub detector_score: f64,
    pub verified: bool,
    pub justification: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NoiseError {
    #[error("{0} must lie in [0, 1]")]
    RateOutOfRange(&'static str),
    #[error("{0} must be finite and non-negative")]
    Negative(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleNoise {
    /// Probability that a true instance is not proposed.
    pub miss_rate: f64,
    /// Expected spurious proposals per frame (Poisson).
    pub spurious_rate: f64,
    /// Standard deviation of Gaussian noise on each box corner, pixels.
    pub jitter_sigma: f64,
    /// Probability that verification returns the wrong verdict.
    pub verify_flip_rate: f64,
    pub seed: u64,
}

impl Default for OracleNoise {
    fn default() -> Self {
        Self::none()
    }
}

impl OracleNoise {
    pub const fn none() -> Self {
        Self { miss_rate: 0.0, spurious_rate: 0.0, jitter_sigma: 0.0, verify_flip_rate: 0.0, seed: 0 }
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.miss_rate) {
            return Err(NoiseError::RateOutOfRange("miss_rate"));
        }
        if !unit(self.verify_flip_rate) {
            return Err(NoiseError::RateOutOfRange("verify_flip_rate"));
        }
        if !(self.spurious_rate >= 0.0 && self.spurious_rate.is_finite()) {
            return Err(NoiseError::Negative("spurious_rate"));
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return Err(NoiseError::Negative("jitter_sigma"));
        }
        Ok(())
    }
}

/// Modeled service time of each stage, seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleCosts {
    pub propose_s: f64,
    pub crop_s: f64,
    pub verify_s: f64,
}

impl Default for OracleCosts {
    fn default() -> Self {
        Self { propose_s: 0.02, crop_s: 0.0005, verify_s: 0.01 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub propose: f64,
    pub crop: f64,
    pub verify: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BackendTimings {
    /// Processing time for the whole frame.
    pub t_f: f64,
    /// Mean time per stage-two call; absent when nothing was verified.
    pub t_obj: Option<f64>,
    pub stages: StageTimes,
    pub verify_calls: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    pub noise: OracleNoise,
    pub margin: f64,
    pub costs: OracleCosts,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { noise: OracleNoise::none(), margin: DEFAULT_MARGIN, costs: OracleCosts::default() }
    }
}

/// Proposal plus the index of the truth instance it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub detection: Detection,
    pub source: Option<usize>,
}

/// Stage one. Every instance counts as a member of the superset class.
pub fn propose(frame: &Frame, truth: &[PersonAttrs], noise: &OracleNoise, rng: &mut rng::Rng) -> Vec<Proposal> {
    let mut out = Vec::new();
    let jitter = (noise.jitter_sigma > 0.0).then(|| Normal::new(0.0, noise.jitter_sigma).unwrap());
    for (i, person) in truth.iter().enumerate() {
        let missed = rng.random::<f64>() < noise.miss_rate;
        let score = rng.random_range(0.5..=1.0);
        if missed {
            continue;
        }
        let bbox = match &jitter {
            Some(n) => jitter_box(&person.bbox, n, rng),
            None => person.bbox,
        };
        out.push(Proposal {
            detection: Detection { bbox, detector_score: score, verified: false, justification: String::new() },
            source: Some(i),
        });
    }

    let count =
        if noise.spurious_rate > 0.0 { Poisson::new(noise.spurious_rate).unwrap().sample(rng) as usize } else { 0 };
    let (fw, fh) = (frame.width as f64, frame.height as f64);
    for _ in 0..count {
        let (w, h) = if truth.is_empty() {
            (fw / 8.0, fh / 8.0)
        } else {
            let t = &truth[rng.random_range(0..truth.len())].bbox;
            (t.w.min(fw), t.h.min(fh))
        };
        let x = rng.random::<f64>() * (fw - w);
        let y = rng.random::<f64>() * (fh - h);
        let score = rng.random_range(0.0..0.5);
        out.push(Proposal {
            detection: Detection {
                bbox: BBox { x, y, w, h },
                detector_score: score,
                verified: false,
                justification: String::new(),
            },
            source: None,
        });
    }
    out
}

fn jitter_box(b: &BBox, n: &Normal<f64>, rng: &mut rng::Rng) -> BBox {
    let x0 = b.x + n.sample(rng);
    let y0 = b.y + n.sample(rng);
    let x1 = (b.right() + n.sample(rng)).max(x0 + 1.0);
    let y1 = (b.bottom() + n.sample(rng)).max(y0 + 1.0);
    BBox { x: x0, y: y0, w: x1 - x0, h: y1 - y0 }
}

/// Stage two: checks a cropped proposal against the query predicate. Spurious
/// proposals (`attrs == None`) only pass through a flipped verdict.
pub fn verify(
    _patch: &ImagePatch,
    query: &SemanticQuery,
    attrs: Option<&PersonAttrs>,
    noise: &OracleNoise,
    rng: &mut rng::Rng,
) -> (bool, String) {
    let flipped = rng.random::<f64>() < noise.verify_flip_rate;
    let truth = attrs.is_some_and(|a| query.predicate.matches(a));
    (truth != flipped, justify(query, attrs, truth != flipped))
}

fn justify(query: &SemanticQuery, attrs: Option<&PersonAttrs>, verdict: bool) -> String {
    let class = &query.superset_class;
    let Some(a) = attrs else {
        return if verdict {
            format!("A {class} appears to be present in the crop.")
        } else {
            format!("No {class} is visible in the crop.")
        };
    };
    let mut parts = Vec::new();
    if let Some(p) = query.predicate.pose {
        parts.push(if p == a.pose {
            format!("pose is {}", a.pose)
        } else {
            format!("pose is {} rather than {p}", a.pose)
        });
    }
    if let Some(c) = &query.predicate.shirt_color {
        let ok = *c == a.shirt_color;
        parts.push(if ok {
            format!("shirt is {}", a.shirt_color)
        } else {
            format!("shirt is {} rather than {c}", a.shirt_color)
        });
    }
    if let Some(i) = query.predicate.injured {
        let is = a.counts_as_injured();
        parts.push(match (i, is) {
            (true, true) => String::from("the person shows signs of injury"),
            (true, false) => String::from("no sign of injury"),
            (false, false) => String::from("the person appears unhurt"),
            (false, true) => String::from("the person appears injured"),
        });
    }
    let verdict = if verdict { "Confirmed" } else { "Rejected" };
    if parts.is_empty() {
        format!("{verdict}: a {class} is visible.")
    } else {
        format!("{verdict}: {}.", parts.join("; "))
    }
}

fn cost_of(costs: &OracleCosts, proposals: usize, verify_calls: usize) -> BackendTimings {
    let stages = StageTimes {
        propose: costs.propose_s,
        crop: costs.crop_s * proposals as f64,
        verify: costs.verify_s * verify_calls as f64,
    };
    BackendTimings {
        t_f: stages.propose + stages.crop + stages.verify,
        t_obj: (verify_calls > 0).then(|| stages.verify / verify_calls as f64),
        stages,
        verify_calls: verify_calls as u32,
    }
}

/// Full request: propose, crop with margin, verify, keep confirmed boxes.
/// Proposals that fall entirely outside the frame are skipped.
pub fn detect(
    frame: &Frame,
    query: &SemanticQuery,
    truth: &[PersonAttrs],
    config: &OracleConfig,
    rng: &mut rng::Rng,
) -> (Vec<Detection>, BackendTimings) {
    let proposals = propose(frame, truth, &config.noise, rng);
    let mut verified = Vec::new();
    let mut calls = 0;
    for p in &proposals {
        let Ok(patch) = crop_with_margin(frame, &p.detection.bbox, config.margin) else {
            continue;
        };
        calls += 1;
        let attrs = p.source.map(|i| &truth[i]);
        let (ok, justification) = verify(&patch, query, attrs, &config.noise, rng);
        if ok {
            verified.push(Detection { verified: true, justification, ..p.detection.clone() });
        }
    }
    (verified, cost_of(&config.costs, proposals.len(), calls))
}

/// Stream of randomness for one request. Depends only on the seed and the
/// request identity, so concurrent requests do not perturb each other.
pub fn request_rng(noise: &OracleNoise, frame_index: u64, request_id: u64) -> rng::Rng {
    rng::stream(noise.seed, &[frame_index, request_id])
}

/// Wire-level oracle service: annotations per frame index.
#[derive(Debug, Clone)]
pub struct OracleService {
    annotations: Vec<Vec<PersonAttrs>>,
    config: OracleConfig,
}

impl OracleService {
    pub fn new(annotations: Vec<Vec<PersonAttrs>>, config: OracleConfig) -> Result<Self, NoiseError> {
        config.noise.validate()?;
        Ok(Self { annotations, config })
    }

    pub fn config(&self) -> &OracleConfig {
        &self.config
    }

    pub fn handle_request(&self, req: &DetectRequest) -> WireMessage {
        let Some(truth) = self.annotations.get(req.frame_index as usize) else {
            return WireMessage::ErrorReply(ErrorReply {
                request_id: req.request_id,
                code: "unknown_frame".into(),
                message: format!("no annotations for frame {}", req.frame_index),
            });
        };
        let frame = match req.frame() {
            Ok(f) => f,
            Err(e) => return ErrorReply::for_error(req.request_id, &e).into(),
        };
        let mut rng = request_rng(&self.config.noise, req.frame_index, req.request_id);
        let (detections, timings) = detect(&frame, &req.query, truth, &self.config, &mut rng);
        WireMessage::DetectResponse(DetectResponse { request_id: req.request_id, detections, timings })
    }

    pub fn handle(&self, msg: &WireMessage) -> WireMessage {
        match msg {
            WireMessage::DetectRequest(req) => self.handle_request(req),
            WireMessage::Ping { request_id } => WireMessage::Pong { request_id: *request_id },
            other => WireMessage::ErrorReply(ErrorReply {
                request_id: other.request_id(),
                code: "unexpected_message".into(),
                message: format!("service does not accept {}", other.type_name()),
            }),
        }
    }

    /// Answers one payload (without length prefix) with one framed message.
    pub fn handle_payload(&self, payload: &[u8]) -> Vec<u8> {
        let reply = match decode_payload(payload) {
            Ok(msg) => self.handle(&msg),
            Err(e) => ErrorReply::for_error(0, &e).into(),
        };
        encode(&reply).unwrap_or_else(|e: WireError| {
            encode(&ErrorReply::for_error(reply.request_id(), &e).into()).expect("error reply fits in a frame")
        })
    }
}
