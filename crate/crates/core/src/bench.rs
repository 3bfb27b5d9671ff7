//! Single-sample inference latency.

use std::fs;
use std::path::Path;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::net::diagnostics::random_input;
use crate::net::{forward, NetworkParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchReport {
    pub iterations: usize,
    pub warmup: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p99_ms: f64,
    /// Timed iterations divided by total timed wall-clock seconds.
    pub throughput_fps: f64,
    pub parameter_count: usize,
}

/// Nearest-rank percentile of an ascending slice.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = (q / 100.0 * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

/// Builds a report from per-iteration wall-clock times in milliseconds.
pub fn summarize(times_ms: &[f64], warmup: usize, parameter_count: usize) -> BenchReport {
    let mut sorted = times_ms.to_vec();
    sorted.sort_by(f64::total_cmp);
    let total: f64 = times_ms.iter().sum();
    BenchReport {
        iterations: times_ms.len(),
        warmup,
        mean_ms: total / times_ms.len() as f64,
        p50_ms: percentile(&sorted, 50.0),
        p99_ms: percentile(&sorted, 99.0),
        throughput_fps: times_ms.len() as f64 / (total / 1000.0),
        parameter_count,
    }
}

/// Times `iterations` forward passes on the calling thread, after `warmup`
/// untimed passes, on a fixed random input derived from `seed`.
pub fn bench(params: &NetworkParams<f32>, iterations: usize, warmup: usize, seed: u64) -> Result<BenchReport> {
    if iterations == 0 {
        return Err(Error::InvalidArgument("bench needs at least one timed iteration".into()));
    }
    let input = random_input(params, seed);
    for _ in 0..warmup {
        std::hint::black_box(forward(params, &input)?);
    }
    let mut times = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let t = Instant::now();
        std::hint::black_box(forward(params, std::hint::black_box(&input))?);
        times.push(t.elapsed().as_secs_f64() * 1000.0);
    }
    Ok(summarize(&times, warmup, params.len()))
}

impl BenchReport {
    pub fn to_text(&self) -> String {
        format!(
            "iterations={}\nwarmup={}\nmean_ms={}\np50_ms={}\np99_ms={}\nthroughput_fps={}\nparameter_count={}\n",
            self.iterations, self.warmup, self.mean_ms, self.p50_ms, self.p99_ms, self.throughput_fps, self.parameter_count
        )
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        Ok(fs::write(path, self.to_text())?)
    }
}
