//! Worker quality: accuracy measured against follower-count percentiles on
//! pairs whose percentiles differ by more than `MIN_PERCENTILE_GAP`, judged
//! once per run after `MIN_QUALIFYING` such pairs.

use serde::{Deserialize, Serialize};

pub const MIN_PERCENTILE_GAP: f64 = 0.2;
pub const MIN_QUALIFYING: u32 = 100;
pub const DEFAULT_BAN_THRESHOLD: f64 = 0.55;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkerState {
    pub worker_id: String,
    /// Run the counters below belong to.
    pub run_id: Option<u32>,
    pub qualifying_comparisons: u32,
    pub qualifying_correct: u32,
    /// The ban decision for `run_id` has been made.
    pub decided: bool,
    pub banned: bool,
    pub ban_run: Option<u32>,
}

impl WorkerState {
    pub fn new(worker_id: impl Into<String>) -> Self {
        Self {
            worker_id: worker_id.into(),
            run_id: None,
            qualifying_comparisons: 0,
            qualifying_correct: 0,
            decided: false,
            banned: false,
            ban_run: None,
        }
    }

    pub fn accuracy(&self) -> Option<f64> {
        (self.qualifying_comparisons > 0)
            .then(|| self.qualifying_correct as f64 / self.qualifying_comparisons as f64)
    }
}

/// Folds one answer into the worker's record. `chosen_pct` and `other_pct` are
/// the follower-count percentiles of the chosen and rejected targets.
pub fn update_quality(
    worker: &WorkerState,
    run_id: u32,
    chosen_pct: f64,
    other_pct: f64,
    threshold: f64,
) -> WorkerState {
    let mut w = worker.clone();
    if w.run_id != Some(run_id) {
        w.run_id = Some(run_id);
        w.qualifying_comparisons = 0;
        w.qualifying_correct = 0;
        w.decided = false;
    }
    if (chosen_pct - other_pct).abs() <= MIN_PERCENTILE_GAP {
        return w;
    }
    w.qualifying_comparisons += 1;
    if chosen_pct > other_pct {
        w.qualifying_correct += 1;
    }
    if !w.decided && w.qualifying_comparisons >= MIN_QUALIFYING {
        w.decided = true;
        if !w.banned && w.accuracy().expect("counted") < threshold {
            w.banned = true;
            w.ban_run = Some(run_id);
        }
    }
    w
}
