//! Threaded streaming: a producer thread feeds samples through a bounded
//! queue to the classification stage, which broadcasts each decision to
//! every subscriber.

use std::sync::mpsc::{self, Receiver, Sender, SyncSender};
use std::thread;
use std::time::{Duration, Instant};

use mipilot_core::stream::{Decision, DecisionClass, PipelineConfig, StreamClassifier};
use mipilot_core::training::TrainedModel;

pub const DEFAULT_QUEUE: usize = 1024;

#[derive(Debug, thiserror::Error)]
pub enum StreamError {
    #[error("sample {index}: {message}")]
    Source { index: u64, message: String },
    #[error("sample {index}: {source}")]
    Pipeline {
        index: u64,
        #[source]
        source: mipilot_core::Error,
    },
    #[error("sample {index}: a required decision consumer stopped")]
    ConsumerGone { index: u64 },
    #[error(transparent)]
    Setup(#[from] mipilot_core::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pacing {
    /// Push samples as fast as the consumer accepts them.
    MaxSpeed,
    /// Release one sample every `1 / sample_rate` seconds.
    Realtime,
}

#[derive(Clone, Copy, Debug)]
pub struct StreamOptions {
    pub pacing: Pacing,
    pub queue: usize,
}

impl Default for StreamOptions {
    fn default() -> Self {
        Self {
            pacing: Pacing::MaxSpeed,
            queue: DEFAULT_QUEUE,
        }
    }
}

/// Fan-out of decisions.
///
/// Optional subscribers that hang up are dropped; a required one hanging up
/// stops the stream.
#[derive(Default)]
pub struct DecisionBus {
    subscribers: Vec<(Sender<Decision>, bool)>,
}

impl DecisionBus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn subscribe(&mut self) -> Receiver<Decision> {
        self.add(false)
    }

    pub fn subscribe_required(&mut self) -> Receiver<Decision> {
        self.add(true)
    }

    fn add(&mut self, required: bool) -> Receiver<Decision> {
        let (tx, rx) = mpsc::channel();
        self.subscribers.push((tx, required));
        rx
    }

    /// False when a required subscriber is gone.
    fn publish(&mut self, d: Decision) -> bool {
        let mut ok = true;
        self.subscribers.retain(|(s, required)| {
            let alive = s.send(d).is_ok();
            ok &= alive || !required;
            alive
        });
        ok
    }
}

/// What a finished stream looked like.
#[derive(Clone, Debug, Default)]
pub struct StreamStats {
    pub samples: u64,
    pub decisions: u64,
    pub holds: u64,
    pub wall: Duration,
    /// Wall time between the first and the last decision.
    pub decision_span: Duration,
    /// Processing time of each decision, in emission order.
    pub latencies_us: Vec<u64>,
}

impl StreamStats {
    pub fn decisions_per_second(&self) -> f64 {
        self.decisions as f64 / self.wall.as_secs_f64()
    }

    /// Rate once the first window is full, which excludes the warm-up.
    pub fn steady_rate(&self) -> f64 {
        match self.decisions {
            0 | 1 => 0.0,
            n => (n - 1) as f64 / self.decision_span.as_secs_f64(),
        }
    }
}

type Item = Result<Vec<f64>, String>;

fn produce<I>(source: I, tx: SyncSender<Item>, pacing: Pacing, sample_rate: f64)
where
    I: IntoIterator<Item = Item>,
{
    let start = Instant::now();
    for (n, item) in source.into_iter().enumerate() {
        if pacing == Pacing::Realtime {
            let due = start + Duration::from_secs_f64(n as f64 / sample_rate);
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                thread::sleep(wait);
            }
        }
        let failed = item.is_err();
        if tx.send(item).is_err() || failed {
            return;
        }
    }
}

/// Runs `model` over `source` until it ends.
///
/// Source items are samples with one value per channel; an `Err` item
/// aborts the run and is reported with its sample index.
pub fn run_stream<I>(
    source: I,
    model: &TrainedModel,
    cfg: PipelineConfig,
    opts: StreamOptions,
    mut bus: DecisionBus,
) -> Result<StreamStats, StreamError>
where
    I: IntoIterator<Item = Item> + Send,
{
    let mut classifier = StreamClassifier::new(model, cfg)?;
    let (tx, rx) = mpsc::sync_channel::<Item>(opts.queue.max(1));
    let sample_rate = model.sample_rate;

    thread::scope(|s| {
        s.spawn(move || produce(source, tx, opts.pacing, sample_rate));
        let mut stats = StreamStats::default();
        let start = Instant::now();
        let mut first_decision = None;
        for item in rx {
            let index = stats.samples;
            let sample = item.map_err(|message| StreamError::Source { index, message })?;
            let t0 = Instant::now();
            let out = classifier
                .push_sample(&sample)
                .map_err(|source| StreamError::Pipeline { index, source })?;
            stats.samples += 1;
            if let Some(mut d) = out {
                d.latency_us = t0.elapsed().as_micros() as u64;
                stats.decisions += 1;
                if d.class == DecisionClass::Hold {
                    stats.holds += 1;
                }
                stats.latencies_us.push(d.latency_us);
                let now = Instant::now();
                stats.decision_span = now - *first_decision.get_or_insert(now);
                if !bus.publish(d) {
                    stats.wall = start.elapsed();
                    return Err(StreamError::ConsumerGone { index });
                }
            }
        }
        stats.wall = start.elapsed();
        Ok(stats)
    })
}

/// `t=<sample>,class=<id|hold>,conf=<real>,lat_us=<int>`
pub fn decision_line(d: &Decision) -> String {
    let class = match d.class {
        DecisionClass::Class(c) => c.to_string(),
        DecisionClass::Hold => "hold".to_string(),
    };
    format!(
        "t={},class={},conf={:.6},lat_us={}",
        d.timestamp, class, d.confidence, d.latency_us
    )
}

/// Parses one raw input line of comma-separated channel values.
pub fn parse_sample_line(line: &str, channels: usize) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = line
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| format!("`{}` is not a number", s.trim()))
        })
        .collect::<Result<_, _>>()?;
    if v.len() != channels {
        return Err(format!("expected {channels} values, found {}", v.len()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err("non-finite value".into());
    }
    Ok(v)
}
