//! Detection and tracking metrics, and the re-initialization threshold sweep.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attrs::{PersonAttrs, Predicate, SemanticQuery};
use crate::backend::{detect, request_rng, Detection, OracleConfig, OracleService};
use crate::geometry::{iou, BBox};
use crate::image::Frame;
use crate::orchestrator::{run_mission, EdgeClock, FrameSource, MissionConfig, MissionError, MissionLog};
use crate::trackers::tracker_is_score_enabled;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

/// Thresholds 0.30, 0.35, ..., 0.95.
pub fn sweep_thresholds() -> Vec<f64> {
    (0..14).map(|k| (30 + 5 * k) as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("log has {log} frames, sequence has {sequence}")]
    FrameCountMismatch { log: usize, sequence: usize },
    #[error("threshold sweep needs a score-enabled tracker, {0} is not")]
    SweepNotApplicable(String),
    #[error("mission on sequence {sequence} at t_c={t_c}: {source}")]
    Mission { sequence: usize, t_c: f64, source: MissionError },
    #[error("sample {index}: {message}")]
    Dataset { index: usize, message: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackingEvalResult {
    pub miou: f64,
    pub fps: f64,
    pub fps_edge: f64,
    pub mean_t_b: Option<f64>,
    pub per_frame_iou: Vec<f64>,
    /// Frames with ground truth.
    pub gt_frames: usize,
    /// Frames where a box was reported while the target was absent.
    pub boxes_without_gt: usize,
}

/// Mean IoU over frames that have ground truth, plus frame rates and mean
/// back-end round trip from the log.
///
/// FPS divides the frame count by total elapsed time. FPS_Edge divides it by
/// tracker time alone; a mission whose tracker never ran reports FPS there.
pub fn miou(log: &MissionLog, ground_truth: &[Option<BBox>]) -> Result<TrackingEvalResult, EvalError> {
    if log.records.len() != ground_truth.len() {
        return Err(EvalError::FrameCountMismatch { log: log.records.len(), sequence: ground_truth.len() });
    }
    let mut per_frame = Vec::with_capacity(ground_truth.len());
    let (mut sum, mut gt_frames, mut stray) = (0.0, 0usize, 0usize);
    for (rec, gt) in log.records.iter().zip(ground_truth) {
        let v = match (rec.bbox, gt) {
            (Some(p), Some(g)) => iou(&p, g),
            (Some(_), None) => {
                stray += 1;
                0.0
            }
            _ => 0.0,
        };
        if gt.is_some() {
            gt_frames += 1;
            sum += v;
        }
        per_frame.push(v);
    }
    let frames = log.records.len() as f64;
    let tracker: f64 = log.records.iter().map(|r| r.tracker_time).sum();
    let tbs: Vec<f64> = log.records.iter().filter_map(|r| r.t_b).collect();
    let fps = if log.summary.elapsed > 0.0 { frames / log.summary.elapsed } else { 0.0 };
    Ok(TrackingEvalResult {
        fps,
        miou: if gt_frames > 0 { sum / gt_frames as f64 } else { 0.0 },
        fps_edge: if tracker > 0.0 { frames / tracker } else { fps },
        mean_t_b: (!tbs.is_empty()).then(|| tbs.iter().sum::<f64>() / tbs.len() as f64),
        per_frame_iou: per_frame,
        gt_frames,
        boxes_without_gt: stray,
    })
}

pub fn ground_truth_of<S: FrameSource + ?Sized>(source: &S) -> Vec<Option<BBox>> {
    (0..source.len()).map(|i| source.ground_truth(i)).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

/// All-point interpolated average precision over several images.
///
/// Predictions are ranked by score (stable for ties), each one greedily
/// claims the unmatched truth in its own image with the highest IoU at or
/// above `iou_threshold`. The precision envelope is made non-increasing
/// before integrating over recall. No truths and no predictions scores 1;
/// no truths but some predictions scores 0.
pub fn average_precision_multi(images: &[(Vec<Detection>, Vec<BBox>)], iou_threshold: f64) -> (f64, MatchCounts) {
    let total_truth: usize = images.iter().map(|(_, t)| t.len()).sum();
    let mut ranked: Vec<(usize, &Detection)> =
        images.iter().enumerate().flat_map(|(i, (p, _))| p.iter().map(move |d| (i, d))).collect();
    ranked.sort_by(|a, b| b.1.detector_score.total_cmp(&a.1.detector_score));

    let mut claimed: Vec<Vec<bool>> = images.iter().map(|(_, t)| alloc::vec![false; t.len()]).collect();
    let mut hits = Vec::with_capacity(ranked.len());
    for (img, det) in &ranked {
        let truths = &images[*img].1;
        let best = truths
            .iter()
            .enumerate()
            .filter(|(k, _)| !claimed[*img][*k])
            .map(|(k, t)| (k, iou(&det.bbox, t)))
            .filter(|(_, v)| *v >= iou_threshold)
            .fold(None, |acc: Option<(usize, f64)>, cur| match acc {
                Some(a) if a.1 >= cur.1 => Some(a),
                _ => Some(cur),
            });
        if let Some((k, _)) = best {
            claimed[*img][k] = true;
        }
        hits.push(best.is_some());
    }

    let tp = hits.iter().filter(|h| **h).count();
    let counts = MatchCounts { tp, fp: hits.len() - tp, fn_: total_truth - tp };
    if total_truth == 0 {
        return (if ranked.is_empty() { 1.0 } else { 0.0 }, counts);
    }

    let mut precision = Vec::with_capacity(hits.len());
    let mut recall = Vec::with_capacity(hits.len());
    let mut cum_tp = 0usize;
    for (k, hit) in hits.iter().enumerate() {
        cum_tp += *hit as usize;
        precision.push(cum_tp as f64 / (k + 1) as f64);
        recall.push(cum_tp as f64 / total_truth as f64);
    }
    for k in (0..precision.len().saturating_sub(1)).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (p, r) in precision.iter().zip(&recall) {
        ap += (r - prev_recall) * p;
        prev_recall = *r;
    }
    (ap, counts)
}

/// Average precision for a single image.
pub fn average_precision(predictions: &[Detection], truths: &[BBox], iou_threshold: f64) -> f64 {
    average_precision_multi(&[(predictions.to_vec(), truths.to_vec())], iou_threshold).0
}

/// A detection objective: what to ask for and which persons count as hits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: String,
    pub query: SemanticQuery,
    pub positives: Predicate,
}

impl TaskSpec {
    pub fn new(id: impl Into<String>, query: SemanticQuery) -> Self {
        let positives = query.predicate.clone();
        Self { id: id.into(), query, positives }
    }
}

/// Images with person annotations, loaded on demand.
pub trait SampleSource {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn persons(&self, index: usize) -> &[PersonAttrs];

    fn frame(&self, index: usize) -> Result<Frame, String>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSample {
    pub frame: Frame,
    pub persons: Vec<PersonAttrs>,
}

impl SampleSource for [DetectionSample] {
    fn len(&self) -> usize {
        <[DetectionSample]>::len(self)
    }

    fn persons(&self, index: usize) -> &[PersonAttrs] {
        &self[index].persons
    }

    fn frame(&self, index: usize) -> Result<Frame, String> {
        Ok(self[index].frame.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task: String,
    pub ap: f64,
    pub counts: MatchCounts,
    pub recall: f64,
    pub mean_t_f: f64,
    pub mean_t_obj: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvalResult {
    pub tasks: Vec<TaskResult>,
    pub map: f64,
    pub mean_t_f: f64,
    pub mean_t_obj: Option<f64>,
    pub counts: MatchCounts,
    pub recall: f64,
}

fn recall_of(c: &MatchCounts) -> f64 {
    if c.tp + c.fn_ == 0 {
        1.0
    } else {
        c.tp as f64 / (c.tp + c.fn_) as f64
    }
}

/// Runs every task over every image through the oracle back-end.
pub fn run_detection_eval<D: SampleSource + ?Sized>(
    tasks: &[TaskSpec],
    dataset: &D,
    config: &OracleConfig,
) -> Result<DetectionEvalResult, EvalError> {
    let mut results = Vec::with_capacity(tasks.len());
    let (mut all_tf, mut all_tobj) = (Vec::new(), Vec::new());
    let mut total = MatchCounts::default();
    let frames: Vec<Frame> = (0..dataset.len())
        .map(|i| dataset.frame(i).map_err(|message| EvalError::Dataset { index: i, message }))
        .collect::<Result<_, _>>()?;
    for (ti, task) in tasks.iter().enumerate() {
        let mut per_image = Vec::with_capacity(dataset.len());
        let (mut tfs, mut tobjs) = (Vec::new(), Vec::new());
        for (ii, frame) in frames.iter().enumerate() {
            let persons = dataset.persons(ii);
            let mut rng = request_rng(&config.noise, ii as u64, ti as u64);
            let (dets, timings) = detect(frame, &task.query, persons, config, &mut rng);
            tfs.push(timings.t_f);
            if let Some(t) = timings.t_obj {
                tobjs.push(t);
            }
            let truths = persons.iter().filter(|p| task.positives.matches(p)).map(|p| p.bbox).collect();
            per_image.push((dets, truths));
        }
        let (ap, counts) = average_precision_multi(&per_image, DEFAULT_IOU_THRESHOLD);
        total.tp += counts.tp;
        total.fp += counts.fp;
        total.fn_ += counts.fn_;
        results.push(TaskResult {
            task: task.id.clone(),
            ap,
            counts,
            recall: recall_of(&counts),
            mean_t_f: mean(&tfs).unwrap_or(0.0),
            mean_t_obj: mean(&tobjs),
        });
        all_tf.extend(tfs);
        all_tobj.extend(tobjs);
    }
    let map = mean(&results.iter().map(|r| r.ap).collect::<Vec<_>>()).unwrap_or(0.0);
    Ok(DetectionEvalResult {
        tasks: results,
        map,
        mean_t_f: mean(&all_tf).unwrap_or(0.0),
        mean_t_obj: mean(&all_tobj),
        recall: recall_of(&total),
        counts: total,
    })
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub t_c: f64,
    pub miou: f64,
    pub fps: f64,
    pub fps_edge: f64,
    pub t_b: Option<f64>,
    pub backend_calls: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub t_c_opt: f64,
}

/// One mission's contribution to a sweep row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub threshold: usize,
    pub sequence: usize,
    pub eval: TrackingEvalResult,
    pub backend_calls: u64,
}

/// Runs one mission of the sweep grid.
pub fn sweep_cell<S, C>(
    source: &S,
    sequence: usize,
    annotations: Vec<Vec<PersonAttrs>>,
    config: &MissionConfig,
    threshold: usize,
    clock: C,
) -> Result<SweepCell, EvalError>
where
    S: FrameSource + ?Sized,
    C: EdgeClock,
{
    let t_c = sweep_thresholds()[threshold];
    let cfg = config.with_threshold(t_c);
    let mission_err = |source| EvalError::Mission { sequence, t_c, source };
    let svc = OracleService::new(annotations, cfg.oracle())
        .map_err(|e| mission_err(MissionError::Config(alloc::format!("{e}"))))?;
    let log = run_mission(source, &cfg, svc, clock).map_err(mission_err)?;
    let eval = miou(&log, &ground_truth_of(source))?;
    Ok(SweepCell { threshold, sequence, eval, backend_calls: log.summary.backend_calls })
}

/// Averages cells per threshold (in sequence order, so the result does not
/// depend on the order cells were computed) and picks the best threshold:
/// highest mIoU, then highest FPS, then lowest threshold.
pub fn aggregate_sweep(mut cells: Vec<SweepCell>) -> SweepResult {
    cells.sort_by_key(|c| (c.threshold, c.sequence));
    let thresholds = sweep_thresholds();
    let rows: Vec<SweepRow> = thresholds
        .iter()
        .enumerate()
        .map(|(k, &t_c)| {
            let group: Vec<&SweepCell> = cells.iter().filter(|c| c.threshold == k).collect();
            let avg = |f: &dyn Fn(&SweepCell) -> f64| {
                if group.is_empty() {
                    0.0
                } else {
                    group.iter().map(|c| f(c)).sum::<f64>() / group.len() as f64
                }
            };
            let tbs: Vec<f64> = group.iter().filter_map(|c| c.eval.mean_t_b).collect();
            SweepRow {
                t_c,
                miou: avg(&|c| c.eval.miou),
                fps: avg(&|c| c.eval.fps),
                fps_edge: avg(&|c| c.eval.fps_edge),
                t_b: mean(&tbs),
                backend_calls: avg(&|c| c.backend_calls as f64),
            }
        })
        .collect();
    let best = rows
        .iter()
        .fold(None::<&SweepRow>, |best, r| match best {
            Some(b) if (b.miou, b.fps) >= (r.miou, r.fps) => Some(b),
            _ => Some(r),
        })
        .expect("fourteen thresholds");
    SweepResult { t_c_opt: best.t_c, rows }
}

/// Sequential sweep: fourteen missions per sequence.
pub fn run_sweep<S, C>(
    sequences: &[(&S, Vec<Vec<PersonAttrs>>)],
    config: &MissionConfig,
    mut clock: impl FnMut() -> C,
) -> Result<SweepResult, EvalError>
where
    S: FrameSource + ?Sized,
    C: EdgeClock,
{
    if !tracker_is_score_enabled(config.tracker) {
        return Err(EvalError::SweepNotApplicable(config.tracker.as_str().into()));
    }
    let mut cells = Vec::new();
    for (si, (source, annotations)) in sequences.iter().enumerate() {
        for k in 0..sweep_thresholds().len() {
            cells.push(sweep_cell(*source, si, annotations.clone(), config, k, clock())?);
        }
    }
    Ok(aggregate_sweep(cells))
}
