use std::time::Instant;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingOptions {
    /// Untimed runs before measuring.
    pub warmup_runs: usize,
    pub timed_runs: usize,
}

impl Default for TimingOptions {
    fn default() -> Self {
        Self {
            warmup_runs: 1,
            timed_runs: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuntimeReport {
    /// Mean wall-clock seconds of one timed run.
    pub total_seconds: f64,
    /// `total_seconds / items`.
    pub per_item_seconds: f64,
    pub items: usize,
    pub timed_runs: usize,
}

/// Times `task`, which processes `items` units (e.g. contributors) per call.
pub fn time_method<R, F: FnMut() -> R>(items: usize, options: TimingOptions, mut task: F) -> RuntimeReport {
    for _ in 0..options.warmup_runs {
        std::hint::black_box(task());
    }
    let runs = options.timed_runs.max(1);
    let start = Instant::now();
    for _ in 0..runs {
        std::hint::black_box(task());
    }
    let total_seconds = start.elapsed().as_secs_f64() / runs as f64;
    RuntimeReport {
        total_seconds,
        per_item_seconds: if items == 0 { 0.0 } else { total_seconds / items as f64 },
        items,
        timed_runs: runs,
    }
}
