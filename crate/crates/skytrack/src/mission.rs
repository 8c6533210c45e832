//! Running missions over on-disk sequences.

use std::path::Path;

use anyhow::Context;
use sha2::{Digest, Sha256};
use skytrack_core::backend::OracleService;
use skytrack_core::orchestrator::{run_mission, DetectionBackend, EdgeClock, MissionConfig};
use skytrack_core::{MissionLog, PersonAttrs, Pose, ReinitPolicy, SemanticQuery};

use crate::config::Settings;
use crate::dataset::{load_sard_annotations, DatasetError, Sequence, Strictness};
use crate::net::{Paced, TcpBackend};

pub const ANNOTATIONS_FILE: &str = "annotations.json";

pub fn mission_config(settings: &Settings, query: SemanticQuery) -> MissionConfig {
    MissionConfig {
        tracker: settings.tracker,
        tracker_params: Default::default(),
        policy: ReinitPolicy::for_tracker(settings.tracker, settings.t_c),
        query,
        link: settings.link.clone(),
        noise: settings.noise.clone(),
        margin: settings.margin,
    }
}

/// Person annotations per frame for the oracle. Uses `annotations.json` in the
/// sequence directory when present; otherwise every ground-truth box becomes a
/// person that satisfies the sequence's query.
pub fn sequence_annotations(seq: &Sequence) -> Result<Vec<Vec<PersonAttrs>>, DatasetError> {
    let path = seq.dir.join(ANNOTATIONS_FILE);
    if path.exists() {
        let (images, _) = load_sard_annotations(&path, Strictness::Strict)?;
        if images.len() != seq.ground_truth.len() {
            return Err(DatasetError::LineCountMismatch { path, lines: images.len(), frames: seq.ground_truth.len() });
        }
        return Ok(images.into_iter().map(|i| i.persons).collect());
    }
    let p = &seq.query.predicate;
    let pose = p.pose.unwrap_or(if p.injured == Some(true) { Pose::LayingDown } else { Pose::Standing });
    Ok(seq
        .ground_truth
        .iter()
        .map(|gt| {
            gt.iter()
                .map(|b| PersonAttrs {
                    bbox: *b,
                    pose,
                    shirt_color: p.shirt_color.clone().unwrap_or_else(|| "unknown".into()),
                    injured: p.injured.unwrap_or(false),
                })
                .collect()
        })
        .collect())
}

/// Where detection requests go.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendTarget {
    /// The oracle, in process, fed from the sequence annotations.
    InProcess,
    /// A `serve` instance or compatible bridge.
    Remote(String),
}

pub fn track<C: EdgeClock>(
    seq: &Sequence,
    config: &MissionConfig,
    target: &BackendTarget,
    clock: C,
    paced: bool,
) -> anyhow::Result<MissionLog> {
    let backend: Box<dyn DetectionBackend> = match target {
        BackendTarget::InProcess => {
            let annotations = sequence_annotations(seq)?;
            Box::new(OracleService::new(annotations, config.oracle())?)
        }
        BackendTarget::Remote(addr) => Box::new(TcpBackend::connect(addr)?),
    };
    let log = if paced {
        run_mission(seq, config, Paced { inner: backend, link: config.link.clone() }, clock)
    } else {
        run_mission(seq, config, backend, clock)
    };
    log.with_context(|| format!("mission on {}", seq.dir.display()))
}

pub fn mission_log_json(log: &MissionLog) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(log).expect("log serializes");
    v.push(b'\n');
    v
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn log_checksum(log: &MissionLog) -> String {
    sha256_hex(&mission_log_json(log))
}

pub fn load_and_track<C: EdgeClock>(
    dir: &Path,
    settings: &Settings,
    clock: C,
) -> anyhow::Result<(Sequence, MissionLog)> {
    let seq = crate::dataset::load_sequence(dir)?;
    let cfg = mission_config(settings, seq.query.clone());
    let log = track(&seq, &cfg, &BackendTarget::InProcess, clock, false)?;
    Ok((seq, log))
}
