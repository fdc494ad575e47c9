//! Sample-by-sample classification over a sliding window.
//!
//! Each incoming sample is band-passed causally, projected onto the CSP
//! filters, and pushed into one [`RollingVariance`] per component, so a
//! decision costs O(channels · 2m) regardless of window length.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::csp::{log_variance_features, CspFilters, FeatureVector};
use crate::filter::{BandSpec, SosFilter};
use crate::signal::ClassId;
use crate::training::{Classifier, Mode, TrainedModel};
use crate::{Error, Result};

/// Updates between exact recomputations of the running sums.
pub const RENORMALIZE_EVERY: u32 = 10_000;

/// Population variance over the last `len` values.
///
/// Keeps running sums of `x − k` and `(x − k)²` for a shift `k` that is
/// reset to the window mean on every renormalization, which bounds both
/// cancellation and accumulated drift.
#[derive(Clone, Debug)]
pub struct RollingVariance {
    ring: Vec<f64>,
    head: usize,
    filled: usize,
    shift: f64,
    sum: f64,
    sum_sq: f64,
    since_renorm: u32,
}

impl RollingVariance {
    pub fn new(len: usize) -> Self {
        assert!(len >= 1);
        Self {
            ring: vec![0.0; len],
            head: 0,
            filled: 0,
            shift: 0.0,
            sum: 0.0,
            sum_sq: 0.0,
            since_renorm: 0,
        }
    }

    pub fn window(&self) -> usize {
        self.ring.len()
    }

    pub fn is_full(&self) -> bool {
        self.filled == self.ring.len()
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        if self.filled == 0 {
            self.shift = x;
        }
        let d = x - self.shift;
        if self.filled == self.ring.len() {
            let old = self.ring[self.head] - self.shift;
            self.sum += d - old;
            self.sum_sq += d * d - old * old;
        } else {
            self.sum += d;
            self.sum_sq += d * d;
            self.filled += 1;
        }
        self.ring[self.head] = x;
        self.head = (self.head + 1) % self.ring.len();
        self.since_renorm += 1;
        if self.since_renorm >= RENORMALIZE_EVERY {
            self.renormalize();
        }
    }

    /// Recomputes the sums exactly about the current window mean.
    pub fn renormalize(&mut self) {
        self.since_renorm = 0;
        if self.filled == 0 {
            return;
        }
        let mean = self.live().sum::<f64>() / self.filled as f64;
        let (mut s, mut s2) = (0.0, 0.0);
        for x in self.live() {
            let d = x - mean;
            s += d;
            s2 += d * d;
        }
        self.shift = mean;
        self.sum = s;
        self.sum_sq = s2;
    }

    fn live(&self) -> impl Iterator<Item = f64> + '_ {
        let start = if self.filled == self.ring.len() { self.head } else { 0 };
        (0..self.filled).map(move |k| self.ring[(start + k) % self.ring.len()])
    }

    /// Window contents, oldest first.
    pub fn values(&self) -> Vec<f64> {
        self.live().collect()
    }

    pub fn variance(&self) -> f64 {
        if self.filled == 0 {
            return 0.0;
        }
        let n = self.filled as f64;
        let mean_d = self.sum / n;
        (self.sum_sq / n - mean_d * mean_d).max(0.0)
    }
}

/// Streaming parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PipelineConfig {
    pub window_len: usize,
    pub stride: usize,
    pub band: BandSpec,
    pub mode: Mode,
    /// Majority over the last `smoothing` decisions; odd, 1 disables it.
    pub smoothing: usize,
}

impl PipelineConfig {
    /// Window and band from the model, stride 1, no smoothing.
    pub fn for_model(model: &TrainedModel) -> Self {
        Self {
            window_len: model.window_len,
            stride: 1,
            band: model.band,
            mode: model.mode(),
            smoothing: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_len < 2 {
            return Err(Error::InvalidWindow("length must be at least 2 samples"));
        }
        if self.stride < 1 {
            return Err(Error::InvalidWindow("stride must be at least 1 sample"));
        }
        if self.smoothing == 0 || self.smoothing.is_multiple_of(2) {
            return Err(Error::InvalidSpec("smoothing window must be odd"));
        }
        BandSpec::new(self.band.low_hz, self.band.high_hz, self.band.filter_order)?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecisionClass {
    Class(ClassId),
    /// Neutral output for windows without usable variance.
    Hold,
}

impl DecisionClass {
    pub fn class(self) -> Option<ClassId> {
        match self {
            DecisionClass::Class(c) => Some(c),
            DecisionClass::Hold => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decision {
    /// Index of the newest sample in the window.
    pub timestamp: u64,
    pub class: DecisionClass,
    pub confidence: f64,
    /// Processing time; filled in by whoever owns a clock.
    pub latency_us: u64,
}

/// Incremental classifier state for one stream.
#[derive(Clone, Debug)]
pub struct StreamClassifier {
    csp: CspFilters,
    classifier: Classifier,
    cfg: PipelineConfig,
    filters: Vec<SosFilter>,
    variances: Vec<RollingVariance>,
    filtered: Vec<f64>,
    projected: Vec<f64>,
    scratch: Vec<f64>,
    seen: u64,
    history: VecDeque<(DecisionClass, f64)>,
}

impl StreamClassifier {
    pub fn new(model: &TrainedModel, cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        model.validate()?;
        if cfg.mode != model.mode() {
            return Err(Error::ModelMismatch("pipeline mode differs from the classifier"));
        }
        let ch = model.channels();
        let d = model.csp.dim();
        let filters = (0..ch)
            .map(|_| SosFilter::bandpass(&cfg.band, model.sample_rate))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            csp: model.csp.clone(),
            classifier: model.classifier.clone(),
            cfg,
            filters,
            variances: (0..d).map(|_| RollingVariance::new(cfg.window_len)).collect(),
            filtered: vec![0.0; ch],
            projected: vec![0.0; d],
            scratch: vec![0.0; d],
            seen: 0,
            history: VecDeque::with_capacity(cfg.smoothing),
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn channels(&self) -> usize {
        self.filters.len()
    }

    /// Samples consumed so far.
    pub fn samples_seen(&self) -> u64 {
        self.seen
    }

    /// Consumes one multichannel sample; returns a decision when a window
    /// boundary is reached.
    pub fn push_sample(&mut self, sample: &[f64]) -> Result<Option<Decision>> {
        if sample.len() != self.filters.len() {
            return Err(Error::ChannelMismatch {
                expected: self.filters.len(),
                found: sample.len(),
            });
        }
        for ((f, &x), y) in self.filters.iter_mut().zip(sample).zip(&mut self.filtered) {
            *y = f.process(x);
        }
        self.csp.project_sample(&self.filtered, &mut self.projected);
        for (v, &s) in self.variances.iter_mut().zip(&self.projected) {
            v.push(s);
        }
        self.seen += 1;

        let w = self.cfg.window_len as u64;
        if self.seen < w || !(self.seen - w).is_multiple_of(self.cfg.stride as u64) {
            return Ok(None);
        }
        let raw = match self.current_features() {
            Ok(f) => {
                let (c, conf) = self.classifier.classify(f.values())?;
                (DecisionClass::Class(c), conf)
            }
            Err(Error::DegenerateVariance) => (DecisionClass::Hold, 0.0),
            Err(e) => return Err(e),
        };
        let (class, confidence) = self.smooth(raw);
        Ok(Some(Decision {
            timestamp: self.seen - 1,
            class,
            confidence,
            latency_us: 0,
        }))
    }

    /// Features of the current window.
    pub fn current_features(&mut self) -> Result<FeatureVector> {
        for (s, v) in self.scratch.iter_mut().zip(&self.variances) {
            *s = v.variance();
        }
        log_variance_features(&self.scratch)
    }

    /// Majority over the recent decisions; ties go to the most recent.
    fn smooth(&mut self, raw: (DecisionClass, f64)) -> (DecisionClass, f64) {
        if self.cfg.smoothing <= 1 {
            return raw;
        }
        if self.history.len() == self.cfg.smoothing {
            self.history.pop_front();
        }
        self.history.push_back(raw);
        let mut best = raw;
        let mut best_count = 0;
        for (i, &(c, _)) in self.history.iter().enumerate().rev() {
            let count = self.history.iter().filter(|(k, _)| *k == c).count();
            if count > best_count {
                best_count = count;
                best = self.history[i];
            }
        }
        best
    }
}
