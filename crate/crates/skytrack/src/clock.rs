use std::time::Instant;

use serde::{Deserialize, Serialize};
use skytrack_core::orchestrator::{EdgeClock, EdgeWork, ModeledClock};

/// Charges the measured wall-clock duration of each piece of edge work.
#[derive(Debug, Clone, Copy, Default)]
pub struct WallClock;

impl EdgeClock for WallClock {
    fn timed<R>(&mut self, _work: EdgeWork, f: impl FnOnce() -> R) -> (R, f64) {
        let start = Instant::now();
        let out = f();
        (out, start.elapsed().as_secs_f64())
    }
}

/// How edge work is charged: fixed modeled costs (reproducible logs) or the
/// measured duration on this machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Timing {
    #[default]
    Modeled,
    Measured,
}

#[derive(Debug, Clone)]
pub enum AnyClock {
    Modeled(ModeledClock),
    Measured(WallClock),
}

impl AnyClock {
    pub fn new(timing: Timing) -> Self {
        match timing {
            Timing::Modeled => Self::Modeled(ModeledClock::default()),
            Timing::Measured => Self::Measured(WallClock),
        }
    }
}

impl EdgeClock for AnyClock {
    fn timed<R>(&mut self, work: EdgeWork, f: impl FnOnce() -> R) -> (R, f64) {
        match self {
            Self::Modeled(c) => c.timed(work, f),
            Self::Measured(c) => c.timed(work, f),
        }
    }
}
