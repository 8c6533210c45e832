use rayon::prelude::*;
use skytrack_core::eval::{aggregate_sweep, sweep_cell, sweep_thresholds, EvalError, SweepResult};
use skytrack_core::orchestrator::{FrameSource, MissionConfig};
use skytrack_core::trackers::tracker_is_score_enabled;
use skytrack_core::PersonAttrs;

use crate::clock::{AnyClock, Timing};

/// Runs the threshold grid over every sequence, one mission per
/// (sequence, threshold) pair, in parallel.
pub fn par_sweep<S: FrameSource + Sync>(
    sequences: &[(&S, Vec<Vec<PersonAttrs>>)],
    config: &MissionConfig,
    timing: Timing,
) -> Result<SweepResult, EvalError> {
    if !tracker_is_score_enabled(config.tracker) {
        return Err(EvalError::SweepNotApplicable(config.tracker.as_str().into()));
    }
    let grid: Vec<(usize, usize)> =
        (0..sequences.len()).flat_map(|s| (0..sweep_thresholds().len()).map(move |k| (s, k))).collect();
    let cells = grid
        .par_iter()
        .map(|&(s, k)| {
            let (source, annotations) = &sequences[s];
            sweep_cell(*source, s, annotations.clone(), config, k, AnyClock::new(timing))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(aggregate_sweep(cells))
}
