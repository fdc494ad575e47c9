//! Trial data model, spatial covariance estimation, channel selection and
//! epoching.

use alloc::vec::Vec;
use core::fmt;

use crate::linalg::{symmetric_eigen, Matrix};
use crate::{Error, Result};

/// Motor-imagery task label, 1 through 4.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassId(u8);

impl ClassId {
    pub const MIN: u8 = 1;
    pub const MAX: u8 = 4;

    pub const fn new(id: u8) -> Option<Self> {
        if id >= Self::MIN && id <= Self::MAX {
            Some(Self(id))
        } else {
            None
        }
    }

    #[inline]
    pub const fn get(self) -> u8 {
        self.0
    }

    /// All four task labels in ascending order.
    pub fn all() -> [ClassId; 4] {
        [ClassId(1), ClassId(2), ClassId(3), ClassId(4)]
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Multichannel EEG recording, `channels × time`, stored channel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct EegTrial {
    samples: Matrix,
    sample_rate: f64,
    label: Option<ClassId>,
}

impl EegTrial {
    pub fn new(samples: Matrix, sample_rate: f64, label: Option<ClassId>) -> Result<Self> {
        if samples.rows() < 1 {
            return Err(Error::InvalidTrial("need at least one channel"));
        }
        if samples.cols() < 2 {
            return Err(Error::InvalidTrial("need at least two time samples"));
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::InvalidTrial("sample rate must be positive and finite"));
        }
        if samples.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidTrial("samples must be finite"));
        }
        Ok(Self {
            samples,
            sample_rate,
            label,
        })
    }

    /// Builds a trial from one slice per channel.
    pub fn from_channels<R: AsRef<[f64]>>(channels: &[R], sample_rate: f64, label: Option<ClassId>) -> Result<Self> {
        let m = Matrix::from_rows(channels).ok_or(Error::InvalidTrial("channels have different lengths"))?;
        Self::new(m, sample_rate, label)
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.samples.rows()
    }

    /// Number of time samples.
    #[inline]
    pub fn len(&self) -> usize {
        self.samples.cols()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    #[inline]
    pub fn label(&self) -> Option<ClassId> {
        self.label
    }

    pub fn with_label(mut self, label: Option<ClassId>) -> Self {
        self.label = label;
        self
    }

    #[inline]
    pub fn samples(&self) -> &Matrix {
        &self.samples
    }

    #[inline]
    pub fn channel(&self, i: usize) -> &[f64] {
        self.samples.row(i)
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.sample_rate
    }

    /// All channels at time index `t`.
    pub fn sample_at(&self, t: usize) -> Vec<f64> {
        (0..self.channels()).map(|c| self.samples[(c, t)]).collect()
    }

    pub(crate) fn map_channels(&self, mut f: impl FnMut(&[f64], &mut [f64])) -> Self {
        let mut out = Matrix::zeros(self.channels(), self.len());
        for c in 0..self.channels() {
            f(self.samples.row(c), out.row_mut(c));
        }
        Self {
            samples: out,
            sample_rate: self.sample_rate,
            label: self.label,
        }
    }
}

/// Trace-normalized spatial covariance, `E Eᵀ / tr(E Eᵀ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialCovariance {
    matrix: Matrix,
}

impl SpatialCovariance {
    pub const SYMMETRY_TOL: f64 = 1e-12;
    pub const TRACE_TOL: f64 = 1e-10;
    pub const PSD_TOL: f64 = 1e-10;

    /// Wraps a matrix after checking symmetry, unit trace and positive
    /// semi-definiteness.
    pub fn new(matrix: Matrix) -> Result<Self> {
        if !matrix.is_square() || matrix.rows() == 0 {
            return Err(Error::InvalidSpec("covariance must be square and non-empty"));
        }
        let n = matrix.rows();
        for i in 0..n {
            for j in (i + 1)..n {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > Self::SYMMETRY_TOL {
                    return Err(Error::InvalidSpec("covariance must be symmetric"));
                }
            }
        }
        if (matrix.trace() - 1.0).abs() > Self::TRACE_TOL {
            return Err(Error::InvalidSpec("covariance must have unit trace"));
        }
        let eig = symmetric_eigen(&matrix);
        if eig.values.last().is_some_and(|&v| v < -Self::PSD_TOL) {
            return Err(Error::InvalidSpec("covariance must be positive semidefinite"));
        }
        Ok(Self { matrix })
    }

    /// Scales an arbitrary symmetric PSD matrix to unit trace.
    pub fn normalized(mut matrix: Matrix) -> Result<Self> {
        let tr = matrix.trace();
        if !(tr >= ZERO_TRACE) {
            return Err(Error::ZeroSignal);
        }
        matrix = matrix.scale(1.0 / tr);
        matrix.symmetrize();
        Self::new(matrix)
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.matrix.rows()
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }
}

/// Traces below this are treated as an all-zero signal.
pub const ZERO_TRACE: f64 = 1e-30;

/// `E Eᵀ / tr(E Eᵀ)` for a single trial. No mean is removed.
pub fn normalized_covariance(trial: &EegTrial) -> Result<SpatialCovariance> {
    let ch = trial.channels();
    let mut m = Matrix::zeros(ch, ch);
    for i in 0..ch {
        let xi = trial.channel(i);
        for j in i..ch {
            let v = crate::linalg::dot(xi, trial.channel(j));
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    let tr = m.trace();
    if !(tr >= ZERO_TRACE) {
        return Err(Error::ZeroSignal);
    }
    let inv = 1.0 / tr;
    for v in m.as_mut_slice() {
        *v *= inv;
    }
    Ok(SpatialCovariance { matrix: m })
}

/// Mean of the normalized covariances of every trial labelled `class`.
pub fn class_mean_covariance(trials: &[EegTrial], class: ClassId) -> Result<SpatialCovariance> {
    let mut acc: Option<Matrix> = None;
    let mut count = 0usize;
    for trial in trials.iter().filter(|t| t.label() == Some(class)) {
        let cov = normalized_covariance(trial)?;
        acc = Some(match acc {
            None => cov.matrix,
            Some(a) => a.add(&cov.matrix),
        });
        count += 1;
    }
    let sum = acc.ok_or(Error::EmptyClass(class))?;
    Ok(SpatialCovariance {
        matrix: sum.scale(1.0 / count as f64),
    })
}

/// Subset (and reorder) channels. Indices must be unique and in range.
pub fn select_channels(trial: &EegTrial, keep: &[usize]) -> Result<EegTrial> {
    let ch = trial.channels();
    if keep.is_empty() {
        return Err(Error::InvalidTrial("need at least one channel"));
    }
    for (pos, &i) in keep.iter().enumerate() {
        if i >= ch {
            return Err(Error::IndexOutOfRange { index: i, len: ch });
        }
        if keep[..pos].contains(&i) {
            return Err(Error::DuplicateIndex(i));
        }
    }
    let rows: Vec<&[f64]> = keep.iter().map(|&i| trial.channel(i)).collect();
    EegTrial::from_channels(&rows, trial.sample_rate(), trial.label())
}

/// A window into a trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Epoch {
    pub start: usize,
    pub length: usize,
    pub stride: usize,
}

impl Epoch {
    #[inline]
    pub fn end(&self) -> usize {
        self.start + self.length
    }
}

/// `floor((total - length) / stride) + 1`, or an error when the window does
/// not fit.
pub fn epoch_count(total: usize, length: usize, stride: usize) -> Result<usize> {
    validate_window(length, stride)?;
    if length > total {
        return Err(Error::WindowTooLong {
            length,
            available: total,
        });
    }
    Ok((total - length) / stride + 1)
}

fn validate_window(length: usize, stride: usize) -> Result<()> {
    if length < 2 {
        return Err(Error::InvalidWindow("length must be at least 2 samples"));
    }
    if stride < 1 {
        return Err(Error::InvalidWindow("stride must be at least 1 sample"));
    }
    Ok(())
}

/// Window positions over a signal of `total` samples.
pub fn epoch_windows(total: usize, length: usize, stride: usize) -> Result<impl Iterator<Item = Epoch>> {
    let n = epoch_count(total, length, stride)?;
    Ok((0..n).map(move |k| Epoch {
        start: k * stride,
        length,
        stride,
    }))
}

/// Copies out one window. The caller guarantees it fits.
pub fn extract_epoch(trial: &EegTrial, epoch: Epoch) -> EegTrial {
    let mut m = Matrix::zeros(trial.channels(), epoch.length);
    for c in 0..trial.channels() {
        m.row_mut(c)
            .copy_from_slice(&trial.channel(c)[epoch.start..epoch.end()]);
    }
    EegTrial {
        samples: m,
        sample_rate: trial.sample_rate(),
        label: trial.label(),
    }
}

/// Sliding windows of `length` samples every `stride` samples, each
/// inheriting the trial's label.
pub fn epochs(trial: &EegTrial, length: usize, stride: usize) -> Result<Vec<EegTrial>> {
    Ok(epoch_windows(trial.len(), length, stride)?
        .map(|e| extract_epoch(trial, e))
        .collect())
}
