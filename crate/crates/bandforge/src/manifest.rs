//! Run manifests: enough to repeat a run bit-exactly.

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub const MANIFEST_SCHEMA: &str = "bandforge.run-manifest";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub schema_version: u32,
    pub command: String,
    /// Command-line arguments as given.
    pub argv: Vec<String>,
    /// Fully resolved configuration, defaults included.
    pub config: serde_json::Value,
    pub seed: u64,
    /// `flag` or `random`.
    pub seed_source: String,
    pub software_version: String,
    pub threads: usize,
    pub wall_time_seconds: f64,
    pub timings: Vec<StageTiming>,
    pub outputs: Vec<String>,
    /// Summary values of the run, such as the selected bandwidth and calibrated level.
    pub results: serde_json::Value,
}

/// Accumulates stage timings while a command runs.
pub struct Stopwatch {
    start: Instant,
    last: Instant,
    timings: Vec<StageTiming>,
}

impl Default for Stopwatch {
    fn default() -> Self {
        Self::new()
    }
}

impl Stopwatch {
    pub fn new() -> Self {
        let now = Instant::now();
        Self { start: now, last: now, timings: Vec::new() }
    }

    /// Close the current stage under `name`.
    pub fn lap(&mut self, name: &str) {
        let now = Instant::now();
        self.timings.push(StageTiming { stage: name.to_owned(), seconds: (now - self.last).as_secs_f64() });
        self.last = now;
    }

    pub fn finish(self) -> (f64, Vec<StageTiming>) {
        (self.start.elapsed().as_secs_f64(), self.timings)
    }
}
