//! Throughput measurement of the streaming runtime.

use std::fmt;

use mipilot_core::signal::EegTrial;
use mipilot_core::stream::PipelineConfig;
use mipilot_core::training::TrainedModel;

use crate::runtime::{run_stream, DecisionBus, StreamError, StreamOptions, StreamStats};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThroughputReport {
    pub decisions_per_second: f64,
    pub p50_latency_us: u64,
    pub p99_latency_us: u64,
    pub total_decisions: u64,
    pub wall_seconds: f64,
    /// Seconds of signal streamed.
    pub data_seconds: f64,
}

/// Nearest-rank percentile of an unsorted sample.
pub fn percentile(values: &[u64], p: f64) -> u64 {
    if values.is_empty() {
        return 0;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    let rank = ((p / 100.0) * v.len() as f64).ceil().max(1.0) as usize;
    v[rank.min(v.len()) - 1]
}

impl ThroughputReport {
    pub fn from_stats(stats: &StreamStats, sample_rate: f64) -> Self {
        let wall = stats.wall.as_secs_f64();
        Self {
            decisions_per_second: stats.decisions as f64 / wall,
            p50_latency_us: percentile(&stats.latencies_us, 50.0),
            p99_latency_us: percentile(&stats.latencies_us, 99.0),
            total_decisions: stats.decisions,
            wall_seconds: wall,
            data_seconds: stats.samples as f64 / sample_rate,
        }
    }

    /// Single machine-readable line.
    pub fn metrics_line(&self) -> String {
        format!(
            "rate={:.3},p50_us={},p99_us={},decisions={},wall_s={:.6},data_s={:.3}",
            self.decisions_per_second,
            self.p50_latency_us,
            self.p99_latency_us,
            self.total_decisions,
            self.wall_seconds,
            self.data_seconds
        )
    }
}

impl fmt::Display for ThroughputReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "decisions        {}", self.total_decisions)?;
        writeln!(f, "data seconds     {:.3}", self.data_seconds)?;
        writeln!(f, "wall seconds     {:.6}", self.wall_seconds)?;
        writeln!(f, "decisions/s      {:.1}", self.decisions_per_second)?;
        write!(
            f,
            "latency p50/p99  {} / {} us",
            self.p50_latency_us, self.p99_latency_us
        )
    }
}

/// Streams the trials back to back through the threaded runtime.
pub fn benchmark(
    model: &TrainedModel,
    cfg: PipelineConfig,
    trials: &[EegTrial],
    opts: StreamOptions,
) -> Result<ThroughputReport, StreamError> {
    let source = trials
        .iter()
        .flat_map(|t| (0..t.len()).map(move |i| Ok(t.sample_at(i))));
    let stats = run_stream(source, model, cfg, opts, DecisionBus::new())?;
    Ok(ThroughputReport::from_stats(&stats, model.sample_rate))
}
