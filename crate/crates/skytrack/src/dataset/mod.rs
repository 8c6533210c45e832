//! On-disk sequences and annotation files.
//!
//! A sequence directory holds:
//!
//! ```text
//! frames/00000000.png ...   zero-padded, numerically ordered images
//! groundtruth.txt           one "x,y,w,h" or "absent" line per frame
//! query.txt                 superset class, predicate line, free-text description
//! ```
//!
//! `query.txt` may start with `#` comment lines; a `format_version=N` token
//! and an `fps=F` token in them are honoured.

mod sard;
mod tasks;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use skytrack_core::orchestrator::{FrameSource, SourceError};
use skytrack_core::synth::{SynthError, SynthSequence, SynthSpec};
use skytrack_core::{BBox, Frame, Predicate, SemanticQuery};
use thiserror::Error;

use crate::pngio;

pub use sard::{
    load_sard_annotations, parse_sard_annotations, sard_document, write_sard_annotations, SardDataset, SardImage,
    Strictness,
};
pub use tasks::{referring_expression_predicate, sard_tasks};

pub const FORMAT_VERSION: u32 = 1;
/// Frame rate assumed when `query.txt` does not declare one.
pub const DEFAULT_FPS: f64 = 30.0;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),
    #[error("{}: {lines} ground-truth lines for {frames} frames", path.display())]
    LineCountMismatch { path: PathBuf, lines: usize, frames: usize },
    #[error("{}:{line}: malformed box {text:?}", path.display())]
    MalformedBox { path: PathBuf, line: usize, text: String },
    #[error("{}:{line}: {message}", path.display())]
    MalformedQuery { path: PathBuf, line: usize, message: String },
    #[error("{}: no frame has a ground-truth box", .0.display())]
    NoGroundTruth(PathBuf),
    #[error("{}: {message}", path.display())]
    Image { path: PathBuf, message: String },
    #[error("{}: {field}: {message}", file.display())]
    SchemaViolation { file: PathBuf, field: String, message: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Synth(#[from] SynthError),
}

impl DatasetError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        if source.kind() == std::io::ErrorKind::NotFound {
            Self::MissingFile(path.to_path_buf())
        } else {
            Self::Io { path: path.to_path_buf(), source }
        }
    }
}

/// A tracking sequence. Frames are decoded on first access and cached.
#[derive(Debug)]
pub struct Sequence {
    pub name: String,
    pub dir: PathBuf,
    pub fps: f64,
    pub ground_truth: Vec<Option<BBox>>,
    pub query: SemanticQuery,
    frame_paths: Vec<PathBuf>,
    cache: RwLock<Vec<Option<Arc<Frame>>>>,
}

impl Sequence {
    pub fn frame_paths(&self) -> &[PathBuf] {
        &self.frame_paths
    }

    pub fn shared_frame(&self, index: usize) -> Result<Arc<Frame>, DatasetError> {
        if let Some(Some(f)) = self.cache.read().expect("frame cache poisoned").get(index) {
            return Ok(Arc::clone(f));
        }
        let path = self.frame_paths.get(index).ok_or_else(|| DatasetError::Image {
            path: self.dir.clone(),
            message: format!("frame {index} out of range"),
        })?;
        let frame = Arc::new(pngio::load_frame(path, index as u64, index as f64 / self.fps)?);
        self.cache.write().expect("frame cache poisoned")[index] = Some(Arc::clone(&frame));
        Ok(frame)
    }
}

impl FrameSource for Sequence {
    fn len(&self) -> usize {
        self.frame_paths.len()
    }

    fn timestamp(&self, index: usize) -> f64 {
        index as f64 / self.fps
    }

    fn frame(&self, index: usize) -> Result<Frame, SourceError> {
        self.shared_frame(index).map(|f| (*f).clone()).map_err(|e| SourceError(e.to_string()))
    }

    fn ground_truth(&self, index: usize) -> Option<BBox> {
        self.ground_truth.get(index).copied().flatten()
    }
}

pub fn load_sequence(dir: &Path) -> Result<Sequence, DatasetError> {
    let frames_dir = dir.join("frames");
    let frame_paths = list_frames(&frames_dir)?;

    let gt_path = dir.join("groundtruth.txt");
    let gt_text = fs::read_to_string(&gt_path).map_err(|e| DatasetError::io(&gt_path, e))?;
    let ground_truth = parse_ground_truth(&gt_text, &gt_path)?;
    if ground_truth.len() != frame_paths.len() {
        return Err(DatasetError::LineCountMismatch {
            path: gt_path,
            lines: ground_truth.len(),
            frames: frame_paths.len(),
        });
    }
    if !ground_truth.iter().any(Option::is_some) {
        return Err(DatasetError::NoGroundTruth(gt_path));
    }

    let q_path = dir.join("query.txt");
    let q_text = fs::read_to_string(&q_path).map_err(|e| DatasetError::io(&q_path, e))?;
    let (query, fps) = parse_query(&q_text, &q_path)?;

    let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let n = frame_paths.len();
    Ok(Sequence {
        name,
        dir: dir.to_path_buf(),
        fps,
        ground_truth,
        query,
        frame_paths,
        cache: RwLock::new(vec![None; n]),
    })
}

fn list_frames(frames_dir: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    let entries = fs::read_dir(frames_dir).map_err(|e| DatasetError::io(frames_dir, e))?;
    let mut numbered = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| DatasetError::io(frames_dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if !matches!(ext.as_deref(), Some("png" | "jpg" | "jpeg")) {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else { continue };
        if let Ok(n) = stem.parse::<u64>() {
            numbered.push((n, path));
        }
    }
    numbered.sort();
    Ok(numbered.into_iter().map(|(_, p)| p).collect())
}

pub fn parse_ground_truth(text: &str, path: &Path) -> Result<Vec<Option<BBox>>, DatasetError> {
    text.lines()
        .enumerate()
        .map(|(i, raw)| {
            let line = raw.trim();
            if line == "absent" {
                return Ok(None);
            }
            let malformed = || DatasetError::MalformedBox { path: path.to_path_buf(), line: i + 1, text: raw.into() };
            let nums: Vec<f64> =
                line.split(',').map(|t| t.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| malformed())?;
            match nums[..] {
                [x, y, w, h] => BBox::new(x, y, w, h).map(Some).map_err(|_| malformed()),
                _ => Err(malformed()),
            }
        })
        .collect()
}

pub fn format_ground_truth(boxes: &[Option<BBox>]) -> String {
    boxes
        .iter()
        .map(|b| match b {
            Some(b) => format!("{},{},{},{}\n", b.x, b.y, b.w, b.h),
            None => "absent\n".into(),
        })
        .collect()
}

pub fn parse_query(text: &str, path: &Path) -> Result<(SemanticQuery, f64), DatasetError> {
    let err = |line: usize, message: String| DatasetError::MalformedQuery { path: path.to_path_buf(), line, message };
    let lines: Vec<&str> = text.lines().collect();
    let mut fps = DEFAULT_FPS;
    let mut start = 0;
    while start < lines.len() && lines[start].trim_start().starts_with('#') {
        for token in lines[start].trim_start_matches(|c: char| c == '#' || c.is_whitespace()).split_whitespace() {
            match token.split_once('=') {
                Some(("format_version", v)) => match v.parse::<u32>() {
                    Ok(FORMAT_VERSION) => {}
                    _ => return Err(err(start + 1, format!("unsupported format_version {v}"))),
                },
                Some(("fps", v)) => match v.parse::<f64>() {
                    Ok(f) if f > 0.0 && f.is_finite() => fps = f,
                    _ => return Err(err(start + 1, format!("invalid fps {v}"))),
                },
                _ => {}
            }
        }
        start += 1;
    }
    let body = &lines[start..];
    let class = body.first().map(|s| s.trim()).unwrap_or_default();
    if class.is_empty() {
        return Err(err(start + 1, "missing superset class".into()));
    }
    let Some(pred_line) = body.get(1) else {
        return Err(err(start + 2, "missing predicate line".into()));
    };
    let predicate = Predicate::parse(pred_line).map_err(|e| err(start + 2, e.to_string()))?;
    let description = body.get(2..).map(|d| d.join("\n")).unwrap_or_default();
    let query =
        SemanticQuery::new(class, predicate, description.trim_end()).map_err(|e| err(start + 1, e.to_string()))?;
    Ok((query, fps))
}

pub fn format_query(query: &SemanticQuery, fps: f64) -> String {
    format!(
        "# skytrack sequence format_version={FORMAT_VERSION} fps={fps}\n{}\n{}\n{}\n",
        query.superset_class, query.predicate, query.description
    )
}

/// Renders `spec` into `dir` in the sequence layout, plus `annotations.json`
/// (every visible person per frame, usable by the oracle service) and
/// `synth.json` (the spec itself). Returns the sequence as loaded back.
pub fn synth_sequence(dir: &Path, spec: &SynthSpec) -> Result<Sequence, DatasetError> {
    let seq = SynthSequence::new(spec.clone())?;
    let frames_dir = dir.join("frames");
    fs::create_dir_all(&frames_dir).map_err(|e| DatasetError::io(&frames_dir, e))?;
    let mut images = Vec::with_capacity(spec.frames);
    for i in 0..spec.frames {
        let name = format!("{i:08}.png");
        pngio::save_gray(&frames_dir.join(&name), &spec.render(i))?;
        images.push(SardImage {
            image: format!("frames/{name}"),
            width: Some(spec.width),
            height: Some(spec.height),
            persons: spec.persons(i),
        });
    }
    let gt: Vec<Option<BBox>> = (0..spec.frames).map(|i| spec.ground_truth(i)).collect();
    write(&dir.join("groundtruth.txt"), format_ground_truth(&gt).as_bytes())?;
    write(&dir.join("query.txt"), format_query(&seq.spec.query, spec.fps).as_bytes())?;
    write_sard_annotations(&dir.join("annotations.json"), &images)?;
    let spec_json = serde_json::to_vec_pretty(spec).expect("spec serializes");
    write(&dir.join("synth.json"), &spec_json)?;
    load_sequence(dir)
}

pub(crate) fn write(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    fs::write(path, bytes).map_err(|e| DatasetError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use skytrack_core::synth::SynthSpec;

    fn three_frame_fixture(dir: &Path, gt: &str) {
        let spec = SynthSpec::linear("fixture", 3, 1);
        synth_sequence(dir, &spec).unwrap();
        fs::write(dir.join("groundtruth.txt"), gt).unwrap();
    }

    #[test]
    fn happy_path_and_absent() {
        let tmp = tempfile::tempdir().unwrap();
        three_frame_fixture(tmp.path(), "1,2,3,4\nabsent\n5,6,7,8\n");
        let s = load_sequence(tmp.path()).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.ground_truth[0], Some(BBox { x: 1.0, y: 2.0, w: 3.0, h: 4.0 }));
        assert_eq!(s.ground_truth[1], None);
        assert_eq!(s.fps, 10.0);
        assert_eq!(s.frame(2).unwrap().width, 160);
    }

    #[test]
    fn line_count_mismatch() {
        let tmp = tempfile::tempdir().unwrap();
        three_frame_fixture(tmp.path(), "1,2,3,4\n5,6,7,8\n");
        assert!(matches!(load_sequence(tmp.path()), Err(DatasetError::LineCountMismatch { lines: 2, frames: 3, .. })));
    }

    #[test]
    fn malformed_box_reports_line() {
        let tmp = tempfile::tempdir().unwrap();
        three_frame_fixture(tmp.path(), "1,2,3,4\n1,2,x,4\n5,6,7,8\n");
        assert!(matches!(load_sequence(tmp.path()), Err(DatasetError::MalformedBox { line: 2, .. })));
        three_frame_fixture(tmp.path(), "1,2,3,4\n1,2,3,4\n5,6,0,8\n");
        assert!(matches!(load_sequence(tmp.path()), Err(DatasetError::MalformedBox { line: 3, .. })));
    }

    #[test]
    fn missing_files() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(matches!(load_sequence(tmp.path()), Err(DatasetError::MissingFile(_))));
        three_frame_fixture(tmp.path(), "1,2,3,4\n1,2,3,4\n5,6,7,8\n");
        fs::remove_file(tmp.path().join("query.txt")).unwrap();
        assert!(matches!(load_sequence(tmp.path()), Err(DatasetError::MissingFile(p)) if p.ends_with("query.txt")));
    }

    #[test]
    fn all_absent_is_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        three_frame_fixture(tmp.path(), "absent\nabsent\nabsent\n");
        assert!(matches!(load_sequence(tmp.path()), Err(DatasetError::NoGroundTruth(_))));
    }

    #[test]
    fn query_parsing() {
        let p = Path::new("query.txt");
        let (q, fps) = parse_query("person\nshirt_color=blue,pose=seated\nSomeone seated\nin blue.\n", p).unwrap();
        assert_eq!(q.superset_class, "person");
        assert_eq!(q.predicate.shirt_color.as_deref(), Some("blue"));
        assert_eq!(q.description, "Someone seated\nin blue.");
        assert_eq!(fps, DEFAULT_FPS);
        let (q, _) = parse_query("person\nnone\n", p).unwrap();
        assert!(q.predicate.is_any());
        assert!(matches!(
            parse_query("# format_version=1\nperson\ncolour=red\n", p),
            Err(DatasetError::MalformedQuery { line: 3, .. })
        ));
        assert!(matches!(
            parse_query("# format_version=9\nperson\nnone\n", p),
            Err(DatasetError::MalformedQuery { line: 1, .. })
        ));
        assert!(matches!(parse_query("person\n", p), Err(DatasetError::MalformedQuery { line: 2, .. })));
        let q = SemanticQuery::new("person", Predicate::parse("injured=true").unwrap(), "x").unwrap();
        assert_eq!(parse_query(&format_query(&q, 12.5), p).unwrap(), (q, 12.5));
    }

    #[test]
    fn synth_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let mut spec = SynthSpec::linear("rt", 60, 9);
        spec.occlusions.push([30, 39]);
        let s = synth_sequence(tmp.path(), &spec).unwrap();
        assert_eq!(s.len(), 60);
        for i in 0..60 {
            assert_eq!(s.ground_truth[i], spec.ground_truth(i));
            assert_eq!(s.ground_truth[i].is_none(), (30..=39).contains(&i));
        }
        assert_eq!(s.query, spec.query);
        assert_eq!(s.frame(17).unwrap().pixels, spec.render(17).pixels);
        assert_eq!(s.timestamp(17), spec.timestamp(17));
    }

    #[test]
    fn synth_is_byte_identical() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let spec = SynthSpec::linear("det", 5, 2);
        synth_sequence(a.path(), &spec).unwrap();
        synth_sequence(b.path(), &spec).unwrap();
        for i in 0..5 {
            let f = format!("frames/{i:08}.png");
            assert_eq!(fs::read(a.path().join(&f)).unwrap(), fs::read(b.path().join(&f)).unwrap());
        }
    }

    #[test]
    fn spec_out_of_bounds() {
        let tmp = tempfile::tempdir().unwrap();
        let spec = SynthSpec::linear("oob", 200, 2);
        assert!(matches!(synth_sequence(tmp.path(), &spec), Err(DatasetError::Synth(SynthError::SpecOutOfBounds(_)))));
    }
}
