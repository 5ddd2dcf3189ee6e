//! Real-time factor measurement.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtfReport {
    /// Median wall-clock seconds per synthesised second.
    pub rtf: f64,
    pub runs: usize,
    pub audio_seconds: f64,
    pub median_seconds: f64,
}

/// Times `synthesize`, which returns the duration in seconds of the audio it
/// produced. One untimed warm-up call precedes `runs` (at least 5) timed ones.
pub fn measure_rtf<F>(mut synthesize: F, runs: usize) -> Result<RtfReport>
where
    F: FnMut() -> Result<f64>,
{
    let runs = runs.max(5);
    let audio_seconds = synthesize()?;
    if !(audio_seconds > 0.0) {
        return Err(Error::EmptyInput);
    }
    let mut times = Vec::with_capacity(runs);
    for _ in 0..runs {
        let start = Instant::now();
        let secs = synthesize()?;
        times.push(start.elapsed().as_secs_f64());
        if !(secs > 0.0) {
            return Err(Error::EmptyInput);
        }
    }
    times.sort_by(f64::total_cmp);
    let median = if runs % 2 == 1 {
        times[runs / 2]
    } else {
        0.5 * (times[runs / 2 - 1] + times[runs / 2])
    };
    Ok(RtfReport {
        rtf: median / audio_seconds,
        runs,
        audio_seconds,
        median_seconds: median,
    })
}
