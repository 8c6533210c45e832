//! CSV and JSON reports and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use skytrack_core::eval::{DetectionEvalResult, SweepResult, TrackingEvalResult};

use crate::config::Settings;
use crate::mission::sha256_hex;

/// Shortest round-trip decimal, always with a fractional part.
pub fn num(v: f64) -> String {
    let s = v.to_string();
    if v.is_finite() && !s.contains('.') {
        format!("{s}.0")
    } else {
        s
    }
}

fn ms(v: Option<f64>) -> String {
    v.map(|s| num(s * 1000.0)).unwrap_or_default()
}

fn to_csv(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

pub const DETECTION_COLUMNS: [&str; 5] = ["task", "ap", "map", "t_f_ms", "t_obj_ms"];
pub const SWEEP_COLUMNS: [&str; 6] = ["t_c", "miou", "fps", "fps_edge", "t_b_ms", "backend_calls"];
pub const TRACK_COLUMNS: [&str; 6] = ["task", "t_c", "miou", "fps", "fps_edge", "t_b_ms"];

pub fn detection_csv(r: &DetectionEvalResult) -> String {
    let rows = r
        .tasks
        .iter()
        .map(|t| vec![t.task.clone(), num(t.ap), num(r.map), ms(Some(t.mean_t_f)), ms(t.mean_t_obj)])
        .collect();
    to_csv(&DETECTION_COLUMNS, rows)
}

pub fn sweep_csv(r: &SweepResult) -> String {
    let rows = r
        .rows
        .iter()
        .map(|row| {
            vec![num(row.t_c), num(row.miou), num(row.fps), num(row.fps_edge), ms(row.t_b), num(row.backend_calls)]
        })
        .collect();
    to_csv(&SWEEP_COLUMNS, rows)
}

pub fn track_csv(name: &str, t_c: f64, r: &TrackingEvalResult) -> String {
    to_csv(&TRACK_COLUMNS, vec![vec![name.into(), num(t_c), num(r.miou), num(r.fps), num(r.fps_edge), ms(r.mean_t_b)]])
}

/// Everything needed to repeat a run, plus checksums of what it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub settings: Settings,
    pub inputs: BTreeMap<String, String>,
    pub format_versions: BTreeMap<String, u32>,
    /// Output path (relative to the output directory) to SHA-256.
    pub artifacts: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, settings: &Settings) -> Self {
        let format_versions = [
            ("sequence".to_owned(), crate::dataset::FORMAT_VERSION),
            ("annotations".to_owned(), crate::dataset::FORMAT_VERSION),
            ("mission_log".to_owned(), 1),
        ]
        .into();
        Self {
            command: command.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            settings: settings.clone(),
            inputs: BTreeMap::new(),
            format_versions,
            artifacts: BTreeMap::new(),
        }
    }

    /// Writes `bytes` to `out/rel` and records its checksum.
    pub fn emit(&mut self, out: &Path, rel: &str, bytes: &[u8]) -> anyhow::Result<()> {
        let path = out.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).with_context(|| parent.display().to_string())?;
        }
        fs::write(&path, bytes).with_context(|| path.display().to_string())?;
        self.artifacts.insert(rel.into(), sha256_hex(bytes));
        Ok(())
    }

    /// Records a file already written under `out`.
    pub fn record(&mut self, out: &Path, rel: &str) -> anyhow::Result<()> {
        let path = out.join(rel);
        let bytes = fs::read(&path).with_context(|| path.display().to_string())?;
        self.artifacts.insert(rel.into(), sha256_hex(&bytes));
        Ok(())
    }

    /// Writes `manifest.json` and a `config.toml` that reproduces the settings.
    pub fn finish(mut self, out: &Path) -> anyhow::Result<()> {
        let toml = toml::to_string(&self.settings.to_config_file()).context("config snapshot")?;
        self.emit(out, "config.toml", toml.as_bytes())?;
        let mut json = serde_json::to_vec_pretty(&self).expect("manifest serializes");
        json.push(b'\n');
        fs::write(out.join("manifest.json"), json).with_context(|| out.display().to_string())?;
        Ok(())
    }
}

pub fn write_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("report serializes");
    v.push(b'\n');
    v
}
