//! Offline training and evaluation: band-pass, CSP on class covariances,
//! windowed log-variance features, then LDA (two classes) or one-vs-one SVM
//! (four classes).

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::csp::{apply_csp, extract_features, fit_csp, CspFilters, FeatureVector, DEFAULT_PAIRS};
use crate::filter::{bandpass, BandSpec};
use crate::lda::{classify_lda, fit_lda, project, LdaModel};
use crate::signal::{class_mean_covariance, epoch_windows, extract_epoch, ClassId, EegTrial, SpatialCovariance};
use crate::svm::{fit_multiclass, predict_multiclass, KernelSpec, MultiClassSvmModel};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Fisher LDA over two task classes.
    TwoClass,
    /// One-vs-one polynomial SVM over four task classes.
    FourClass,
}

impl Mode {
    pub fn class_count(self) -> usize {
        match self {
            Mode::TwoClass => 2,
            Mode::FourClass => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::TwoClass => "two_class",
            Mode::FourClass => "four_class",
        }
    }
}

/// The decision stage after CSP.
#[derive(Clone, Debug, PartialEq)]
pub enum Classifier {
    Lda(LdaModel),
    Svm(MultiClassSvmModel),
}

impl Classifier {
    pub fn dim(&self) -> usize {
        match self {
            Classifier::Lda(m) => m.dim(),
            Classifier::Svm(m) => m.dim(),
        }
    }

    pub fn mode(&self) -> Mode {
        match self {
            Classifier::Lda(_) => Mode::TwoClass,
            Classifier::Svm(_) => Mode::FourClass,
        }
    }

    pub fn classes(&self) -> Vec<ClassId> {
        match self {
            Classifier::Lda(m) => {
                let mut v = alloc::vec![m.class_pos(), m.class_neg()];
                v.sort();
                v
            }
            Classifier::Svm(m) => m.class_ids().to_vec(),
        }
    }

    /// Class and confidence: `|wᵀx − z0|` for LDA, the vote margin for SVM.
    pub fn classify(&self, x: &[f64]) -> Result<(ClassId, f64)> {
        match self {
            Classifier::Lda(m) => {
                let z = project(m, x)?;
                Ok((classify_lda(m, x)?, (z - m.z0()).abs()))
            }
            Classifier::Svm(m) => {
                let p = predict_multiclass(m, x)?;
                Ok((p.class, p.vote_margin as f64))
            }
        }
    }
}

/// Everything needed to classify raw multichannel data.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub sample_rate: f64,
    pub band: BandSpec,
    /// Samples per feature window.
    pub window_len: usize,
    pub csp: CspFilters,
    pub classifier: Classifier,
}

impl TrainedModel {
    /// Checks that the parts agree with each other.
    pub fn validate(&self) -> Result<()> {
        self.band.validate_for(self.sample_rate)?;
        if self.window_len < 2 {
            return Err(Error::InvalidWindow("length must be at least 2 samples"));
        }
        if self.classifier.dim() != self.csp.dim() {
            return Err(Error::ModelMismatch(
                "classifier dimension differs from CSP feature count",
            ));
        }
        Ok(())
    }

    pub fn channels(&self) -> usize {
        self.csp.channels()
    }

    pub fn mode(&self) -> Mode {
        self.classifier.mode()
    }
}

/// Soft-margin cap used when training on windowed EEG features. Class
/// clouds overlap, so the near-hard-margin solver default would not converge.
pub const TRAIN_C_CAP: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub mode: Mode,
    pub m: usize,
    pub band: BandSpec,
    pub zero_phase: bool,
    pub window_len: usize,
    /// Step between training windows.
    pub window_stride: usize,
    pub kernel: KernelSpec,
    pub c_cap: f64,
}

impl TrainConfig {
    /// One-second windows at half-window stride.
    pub fn new(mode: Mode, sample_rate: f64) -> Self {
        let window_len = (libm::round(sample_rate) as usize).max(2);
        Self {
            mode,
            m: DEFAULT_PAIRS,
            band: BandSpec::default(),
            zero_phase: true,
            window_len,
            window_stride: (window_len / 2).max(1),
            kernel: KernelSpec::default(),
            c_cap: TRAIN_C_CAP,
        }
    }
}

/// Distinct labels present, ascending.
pub fn labelled_classes(trials: &[EegTrial]) -> Vec<ClassId> {
    let mut v: Vec<ClassId> = trials.iter().filter_map(EegTrial::label).collect();
    v.sort();
    v.dedup();
    v
}

/// Weighted mean with weights `n, n − 1, …, 1` in class order.
fn ranked_mean(covs: &[SpatialCovariance]) -> Result<SpatialCovariance> {
    let n = covs.len();
    let mut acc = covs[0].matrix().scale(n as f64);
    for (k, c) in covs.iter().enumerate().skip(1) {
        acc = acc.add(&c.matrix().scale((n - k) as f64));
    }
    SpatialCovariance::normalized(acc)
}

/// Labelled, degenerate-free features from windows of the given trials.
///
/// Trials must already be band-passed.
pub fn window_features(
    filtered: &[EegTrial],
    csp: &CspFilters,
    window_len: usize,
    stride: usize,
) -> Result<Vec<(ClassId, FeatureVector)>> {
    let mut out = Vec::new();
    for trial in filtered {
        let Some(label) = trial.label() else { continue };
        if trial.len() < window_len {
            continue;
        }
        for e in epoch_windows(trial.len(), window_len, stride)? {
            let s = apply_csp(csp, &extract_epoch(trial, e))?;
            match extract_features(&s) {
                Ok(f) => out.push((label, f)),
                Err(Error::DegenerateVariance) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

/// Fits the whole chain on the labelled trials of a session.
///
/// In four-class mode a single CSP bank contrasts the lower two classes
/// against the upper two, so its leading filters pick up the first pair's
/// sources and its trailing filters the second pair's. Within each group the
/// first class is weighted 2:1 over the second. With equal weights the two
/// sources of a group share one eigenvalue, the filters come out as arbitrary
/// mixtures of them, and the two classes of the group become inseparable.
pub fn train(trials: &[EegTrial], cfg: &TrainConfig) -> Result<TrainedModel> {
    train_with(trials, cfg, fit_multiclass)
}

/// [`train`] with a caller-supplied one-vs-one fitter, e.g. one that runs the
/// pairwise fits on several threads.
pub fn train_with<S>(trials: &[EegTrial], cfg: &TrainConfig, fit_svm: S) -> Result<TrainedModel>
where
    S: FnOnce(&BTreeMap<ClassId, Vec<FeatureVector>>, KernelSpec, f64) -> Result<MultiClassSvmModel>,
{
    let labelled: Vec<&EegTrial> = trials.iter().filter(|t| t.label().is_some()).collect();
    let first = *labelled
        .first()
        .ok_or(Error::InvalidSpec("session has no labelled trials"))?;
    let sample_rate = first.sample_rate();
    cfg.band.validate_for(sample_rate)?;
    let classes = labelled_classes(trials);
    if classes.len() != cfg.mode.class_count() {
        return Err(Error::WrongClassCount {
            expected: cfg.mode.class_count(),
            found: classes.len(),
        });
    }

    let filtered = labelled
        .iter()
        .map(|t| bandpass(t, &cfg.band, cfg.zero_phase))
        .collect::<Result<Vec<_>>>()?;
    let per_class = classes
        .iter()
        .map(|&c| class_mean_covariance(&filtered, c))
        .collect::<Result<Vec<_>>>()?;
    let half = classes.len() / 2;
    let sigma1 = ranked_mean(&per_class[..half])?;
    let sigma2 = ranked_mean(&per_class[half..])?;
    let csp = fit_csp(&sigma1, &sigma2, cfg.m)?.into_filters();

    let feats = window_features(&filtered, &csp, cfg.window_len, cfg.window_stride)?;
    let mut by_class: BTreeMap<ClassId, Vec<FeatureVector>> = BTreeMap::new();
    for (c, f) in feats {
        by_class.entry(c).or_default().push(f);
    }
    for &c in &classes {
        by_class.entry(c).or_default();
    }

    let classifier = match cfg.mode {
        Mode::TwoClass => {
            let (a, b) = (classes[0], classes[1]);
            let (model, _) = fit_lda(&by_class[&a], &by_class[&b], a, b)?;
            Classifier::Lda(model)
        }
        Mode::FourClass => Classifier::Svm(fit_svm(&by_class, cfg.kernel, cfg.c_cap)?),
    };

    let model = TrainedModel {
        sample_rate,
        band: cfg.band,
        window_len: cfg.window_len,
        csp,
        classifier,
    };
    model.validate()?;
    Ok(model)
}

/// Confusion counts indexed by `[true − 1][predicted − 1]`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub counts: [[usize; 4]; 4],
}

impl Confusion {
    pub fn record(&mut self, truth: ClassId, predicted: ClassId) {
        self.counts[truth.get() as usize - 1][predicted.get() as usize - 1] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..4).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => self.correct() as f64 / n as f64,
        }
    }

    /// Recall of one class, `None` if it never occurred.
    pub fn class_accuracy(&self, c: ClassId) -> Option<f64> {
        let row = &self.counts[c.get() as usize - 1];
        let n: usize = row.iter().sum();
        (n > 0).then(|| row[c.get() as usize - 1] as f64 / n as f64)
    }
}

/// Classifies every full window of every labelled trial.
pub fn evaluate(model: &TrainedModel, trials: &[EegTrial], zero_phase: bool, stride: usize) -> Result<Confusion> {
    let mut confusion = Confusion::default();
    for t in trials.iter().filter(|t| t.label().is_some()) {
        if t.channels() != model.channels() {
            return Err(Error::ModelMismatch("session channel count differs from the model's"));
        }
        if t.sample_rate() != model.sample_rate {
            return Err(Error::ModelMismatch("session sample rate differs from the model's"));
        }
        let filtered = bandpass(t, &model.band, zero_phase)?;
        for (truth, f) in window_features(&[filtered], &model.csp, model.window_len, stride)? {
            let (pred, _) = model.classifier.classify(f.values())?;
            confusion.record(truth, pred);
        }
    }
    Ok(confusion)
}
