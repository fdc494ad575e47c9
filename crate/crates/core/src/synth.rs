//! Synthetic motor-imagery EEG with known ground truth.
//!
//! Each trial is `e(t) = A s(t) + ν(t)`: independent band-limited Gaussian
//! sources `s`, mixed into channels by `A`, plus white sensor noise `ν`.
//! Classes differ only in the source variances, which is exactly the
//! structure spatial filtering recovers.
//!
//! Randomness comes from xoshiro256** seeded through SplitMix64 (the
//! reference seeding of that generator). Trial `k` of a stream with seed `s`
//! uses seed `s + k · 0x9E3779B97F4A7C15` (wrapping), so trials can be
//! generated independently and in any order. Uniforms take the top 53 bits
//! of each output; normals come from the Box-Muller transform. Both are
//! computed with portable `libm` routines.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

use crate::filter::{BandSpec, SosFilter};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::math::{cos, log, sin, sqrt};
use crate::signal::{ClassId, EegTrial};
use crate::{Error, Result};

/// Longest accepted trial, in seconds.
pub const MAX_TRIAL_SECONDS: f64 = 300.0;
/// Order of the band-pass shaping each source.
pub const SOURCE_FILTER_ORDER: usize = 12;
const STREAM_STEP: u64 = 0x9E37_79B9_7F4A_7C15;
const IMPULSE_LEN: usize = 1 << 14;

/// Portable Gaussian sample stream.
#[derive(Clone, Debug)]
pub struct NormalStream {
    rng: Xoshiro256StarStar,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: Xoshiro256StarStar::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Stream for trial `index` of a generator seeded with `seed`.
    pub fn for_trial(seed: u64, index: u64) -> Self {
        Self::new(seed.wrapping_add(index.wrapping_mul(STREAM_STEP)))
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = sqrt(-2.0 * log(u1));
        let theta = 2.0 * PI * u2;
        self.spare = Some(r * sin(theta));
        r * cos(theta)
    }
}

/// Generator parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    channels: usize,
    sample_rate: f64,
    mixing: Matrix,
    class_profiles: BTreeMap<ClassId, Vec<f64>>,
    rest_profile: Vec<f64>,
    noise_sigma: f64,
    source_band: BandSpec,
    seed: u64,
}

impl SynthSpec {
    /// `mixing` is `channels × n_sources` and must have full column rank.
    /// Rest segments use unit variance on every source.
    pub fn new(
        sample_rate: f64,
        mixing: Matrix,
        class_profiles: BTreeMap<ClassId, Vec<f64>>,
        noise_sigma: f64,
        seed: u64,
    ) -> Result<Self> {
        let channels = mixing.rows();
        let n_sources = mixing.cols();
        if channels == 0 || n_sources == 0 {
            return Err(Error::InvalidSpec("need at least one channel and one source"));
        }
        if n_sources > channels {
            return Err(Error::InvalidSpec(
                "more sources than channels cannot have full column rank",
            ));
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::InvalidSpec("sample rate must be positive"));
        }
        if mixing.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("mixing matrix must be finite"));
        }
        let gram = mixing.transpose().matmul(&mixing);
        let eig = symmetric_eigen(&gram);
        if !(eig.values[n_sources - 1] > 1e-10 * eig.values[0]) {
            return Err(Error::InvalidSpec("mixing matrix must have full column rank"));
        }
        if class_profiles.is_empty() {
            return Err(Error::InvalidSpec("need at least one class profile"));
        }
        for profile in class_profiles.values() {
            if profile.len() != n_sources {
                return Err(Error::InvalidSpec("each profile needs one variance per source"));
            }
            if profile.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::InvalidSpec("source variances must be positive"));
            }
        }
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return Err(Error::InvalidSpec("noise sigma must be non-negative"));
        }
        let source_band = BandSpec {
            filter_order: SOURCE_FILTER_ORDER,
            ..BandSpec::default()
        };
        source_band.validate_for(sample_rate)?;
        Ok(Self {
            channels,
            sample_rate,
            mixing,
            class_profiles,
            rest_profile: vec![1.0; n_sources],
            noise_sigma,
            source_band,
            seed,
        })
    }

    /// Motor-imagery preset: one source per channel, a random mixing matrix
    /// (drawn from `mixing_seed`, so held-out sessions can share it), and
    /// class `k` raising the variance of source `k − 1` by `ratio`.
    pub fn motor_imagery(
        channels: usize,
        n_classes: usize,
        ratio: f64,
        sample_rate: f64,
        mixing_seed: u64,
        seed: u64,
    ) -> Result<Self> {
        if !(1..=4).contains(&n_classes) || n_classes > channels {
            return Err(Error::InvalidSpec(
                "class count must be 1..=4 and at most the channel count",
            ));
        }
        if !(ratio > 0.0) {
            return Err(Error::InvalidSpec("variance ratio must be positive"));
        }
        let mut rng = NormalStream::new(mixing_seed);
        let mut mixing = Matrix::identity(channels);
        for v in mixing.as_mut_slice() {
            *v += 0.35 * rng.normal();
        }
        let mut profiles = BTreeMap::new();
        for k in 0..n_classes {
            let mut p = vec![1.0; channels];
            p[k] = ratio;
            profiles.insert(ClassId::new(k as u8 + 1).unwrap(), p);
        }
        Self::new(sample_rate, mixing, profiles, 0.1, seed)
    }

    pub fn with_source_band(mut self, band: BandSpec) -> Result<Self> {
        band.validate_for(self.sample_rate)?;
        self.source_band = band;
        Ok(self)
    }

    pub fn with_rest_profile(mut self, profile: Vec<f64>) -> Result<Self> {
        if profile.len() != self.n_sources() || profile.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidSpec(
                "rest profile needs one positive variance per source",
            ));
        }
        self.rest_profile = profile;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn n_sources(&self) -> usize {
        self.mixing.cols()
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn mixing(&self) -> &Matrix {
        &self.mixing
    }

    pub fn class_profiles(&self) -> &BTreeMap<ClassId, Vec<f64>> {
        &self.class_profiles
    }

    pub fn classes(&self) -> Vec<ClassId> {
        self.class_profiles.keys().copied().collect()
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn source_band(&self) -> &BandSpec {
        &self.source_band
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn sample_count(&self, duration_s: f64) -> Result<usize> {
        if !(duration_s > 0.0) || !duration_s.is_finite() {
            return Err(Error::InvalidSpec("duration must be positive"));
        }
        if duration_s > MAX_TRIAL_SECONDS {
            return Err(Error::TrialTooLong {
                seconds: duration_s,
                max_seconds: MAX_TRIAL_SECONDS,
            });
        }
        let n = libm::round(duration_s * self.sample_rate) as usize;
        if n < 2 {
            return Err(Error::InvalidSpec("duration must span at least two samples"));
        }
        Ok(n)
    }

    fn generate(&self, profile: &[f64], label: Option<ClassId>, n: usize, index: u64) -> Result<EegTrial> {
        let mut rng = NormalStream::for_trial(self.seed, index);
        let mut filter = SosFilter::bandpass(&self.source_band, self.sample_rate)?;
        let unit = 1.0 / sqrt(filter.noise_power_gain(IMPULSE_LEN));
        let burn_in = libm::ceil(self.sample_rate) as usize;

        let n_sources = self.n_sources();
        let mut sources = Matrix::zeros(n_sources, n);
        for (k, &var) in profile.iter().enumerate() {
            filter.reset();
            let scale = unit * sqrt(var);
            for _ in 0..burn_in {
                filter.process(rng.normal());
            }
            for v in sources.row_mut(k) {
                *v = scale * filter.process(rng.normal());
            }
        }
        let mut e = self.mixing.matmul(&sources);
        if self.noise_sigma > 0.0 {
            for v in e.as_mut_slice() {
                *v += self.noise_sigma * rng.normal();
            }
        }
        EegTrial::new(e, self.sample_rate, label)
    }
}

/// One labelled trial. `index` selects the random stream.
pub fn generate_trial(spec: &SynthSpec, class: ClassId, duration_s: f64, index: u64) -> Result<EegTrial> {
    let profile = spec.class_profiles.get(&class).ok_or(Error::UnknownClass(class))?;
    let n = spec.sample_count(duration_s)?;
    spec.generate(profile, Some(class), n, index)
}

/// One unlabelled rest segment.
pub fn generate_rest(spec: &SynthSpec, duration_s: f64, index: u64) -> Result<EegTrial> {
    let n = spec.sample_count(duration_s)?;
    spec.generate(&spec.rest_profile, None, n, index)
}

/// Shape of a recording session.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SessionLayout {
    pub trials_per_class: usize,
    pub trial_s: f64,
    /// Rest after every task trial; zero disables rest segments.
    pub rest_s: f64,
}

/// Task trials cycling through the classes in ascending order, each followed
/// by a rest segment. Trial streams are indexed by position in the session.
pub fn generate_session(spec: &SynthSpec, layout: &SessionLayout) -> Result<Vec<EegTrial>> {
    spec.sample_count(layout.trial_s)?;
    if layout.rest_s > 0.0 {
        spec.sample_count(layout.rest_s)?;
    }
    let classes = spec.classes();
    let per_round = if layout.rest_s > 0.0 { 2 } else { 1 };
    let mut out = Vec::with_capacity(layout.trials_per_class * classes.len() * per_round);
    for _ in 0..layout.trials_per_class {
        for &c in &classes {
            let idx = out.len() as u64;
            out.push(generate_trial(spec, c, layout.trial_s, idx)?);
            if layout.rest_s > 0.0 {
                let idx = out.len() as u64;
                out.push(generate_rest(spec, layout.rest_s, idx)?);
            }
        }
    }
    Ok(out)
}

/// Checks that a session is internally consistent and that no trial is
/// longer than [`MAX_TRIAL_SECONDS`].
pub fn validate_session(trials: &[EegTrial]) -> Result<()> {
    let Some(first) = trials.first() else {
        return Ok(());
    };
    for t in trials {
        if t.channels() != first.channels() {
            return Err(Error::ChannelMismatch {
                expected: first.channels(),
                found: t.channels(),
            });
        }
        if t.sample_rate() != first.sample_rate() {
            return Err(Error::InvalidSpec("trials disagree on sample rate"));
        }
        if t.duration_s() > MAX_TRIAL_SECONDS {
            return Err(Error::TrialTooLong {
                seconds: t.duration_s(),
                max_seconds: MAX_TRIAL_SECONDS,
            });
        }
    }
    Ok(())
}
