//! Common spatial patterns.
//!
//! Two-stage simultaneous diagonalization: whiten the composite covariance
//! `Σ₁ + Σ₂ = U D Uᵀ` with `P = D^{-1/2} Uᵀ`, then rotate by the eigenvectors
//! `V` of `P Σ₁ Pᵀ`. The filters are the columns of `W = Pᵀ V`, which satisfy
//! `Wᵀ Σ₁ W = Λ`, `Wᵀ Σ₂ W = I − Λ`.

use alloc::vec::Vec;

use crate::linalg::{symmetric_eigen, Matrix};
use crate::math::{log, sqrt};
use crate::signal::{EegTrial, SpatialCovariance};
use crate::{Error, Result};

pub const DEFAULT_PAIRS: usize = 3;
/// Relative eigenvalue floor of `Σ₁ + Σ₂` below which whitening is refused.
pub const RANK_TOL: f64 = 1e-10;
/// Total variance below which features are undefined.
pub const VAR_FLOOR: f64 = 1e-30;

/// The selected filter bank: `2m` spatial filters as rows, plus the full
/// eigenvalue spectrum they were picked from.
#[derive(Clone, Debug, PartialEq)]
pub struct CspFilters {
    w_csp: Matrix,
    eigenvalues: Vec<f64>,
    m: usize,
}

impl CspFilters {
    pub fn new(w_csp: Matrix, eigenvalues: Vec<f64>, m: usize) -> Result<Self> {
        let ch = w_csp.cols();
        if m == 0 || 2 * m > ch {
            return Err(Error::BadM { m, channels: ch });
        }
        if w_csp.rows() != 2 * m {
            return Err(Error::DimMismatch {
                expected: 2 * m,
                found: w_csp.rows(),
            });
        }
        if eigenvalues.len() != ch {
            return Err(Error::DimMismatch {
                expected: ch,
                found: eigenvalues.len(),
            });
        }
        Ok(Self { w_csp, eigenvalues, m })
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.w_csp.cols()
    }

    /// Filter pairs.
    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    /// Feature dimension, `2m`.
    #[inline]
    pub fn dim(&self) -> usize {
        2 * self.m
    }

    /// `2m × ch`; row `i` is filter `i`.
    pub fn w_csp(&self) -> &Matrix {
        &self.w_csp
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Projects one multichannel sample onto the filters.
    #[inline]
    pub fn project_sample(&self, sample: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(0..self.w_csp.rows()) {
            *o = crate::linalg::dot(self.w_csp.row(row), sample);
        }
    }
}

/// A fitted CSP decomposition with the intermediate factors kept.
#[derive(Clone, Debug)]
pub struct CspModel {
    filters: CspFilters,
    w_full: Matrix,
    whitener: Matrix,
    rotation: Matrix,
}

impl CspModel {
    pub fn filters(&self) -> &CspFilters {
        &self.filters
    }

    pub fn into_filters(self) -> CspFilters {
        self.filters
    }

    /// `ch × ch`, columns ordered by descending eigenvalue.
    pub fn w_full(&self) -> &Matrix {
        &self.w_full
    }

    /// `P = D^{-1/2} Uᵀ`.
    pub fn whitener(&self) -> &Matrix {
        &self.whitener
    }

    /// Orthonormal `V`.
    pub fn rotation(&self) -> &Matrix {
        &self.rotation
    }

    pub fn eigenvalues(&self) -> &[f64] {
        self.filters.eigenvalues()
    }
}

/// Fits `m` filter pairs discriminating class 1 (`sigma1`) from class 2.
pub fn fit_csp(sigma1: &SpatialCovariance, sigma2: &SpatialCovariance, m: usize) -> Result<CspModel> {
    let ch = sigma1.channels();
    if sigma2.channels() != ch {
        return Err(Error::ChannelMismatch {
            expected: ch,
            found: sigma2.channels(),
        });
    }
    if m == 0 || 2 * m > ch {
        return Err(Error::BadM { m, channels: ch });
    }

    let composite = sigma1.matrix().add(sigma2.matrix());
    let outer = symmetric_eigen(&composite);
    let largest = outer.values[0];
    let smallest = outer.values[ch - 1];
    let tolerance = RANK_TOL * largest;
    if !(smallest > tolerance) {
        return Err(Error::RankDeficient {
            min_eigenvalue: smallest,
            tolerance,
        });
    }

    let mut whitener = outer.vectors.transpose();
    for (i, &d) in outer.values.iter().enumerate() {
        let s = 1.0 / sqrt(d);
        for v in whitener.row_mut(i) {
            *v *= s;
        }
    }

    let mut whitened = whitener.matmul(sigma1.matrix()).matmul(&whitener.transpose());
    whitened.symmetrize();
    let inner = symmetric_eigen(&whitened);
    let mut rotation = inner.vectors;
    let mut w_full = whitener.transpose().matmul(&rotation);

    for j in 0..ch {
        let mut pivot = 0.0f64;
        for i in 0..ch {
            if w_full[(i, j)].abs() > pivot.abs() {
                pivot = w_full[(i, j)];
            }
        }
        if pivot < 0.0 {
            for i in 0..ch {
                w_full[(i, j)] = -w_full[(i, j)];
                rotation[(i, j)] = -rotation[(i, j)];
            }
        }
    }

    let mut w_csp = Matrix::zeros(2 * m, ch);
    let picks = (0..m).chain(ch - m..ch);
    for (row, col) in picks.enumerate() {
        for i in 0..ch {
            w_csp[(row, i)] = w_full[(i, col)];
        }
    }

    Ok(CspModel {
        filters: CspFilters {
            w_csp,
            eigenvalues: inner.values,
            m,
        },
        w_full,
        whitener,
        rotation,
    })
}

/// `S = W_csp E`: one row per filter, one column per time sample.
pub fn apply_csp(filters: &CspFilters, trial: &EegTrial) -> Result<Matrix> {
    if trial.channels() != filters.channels() {
        return Err(Error::ChannelMismatch {
            expected: filters.channels(),
            found: trial.channels(),
        });
    }
    Ok(filters.w_csp().matmul(trial.samples()))
}

/// Log variance-share features.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for FeatureVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Population variance about the mean, two-pass.
pub fn population_variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// `xᵢ = log(varᵢ / Σⱼ varⱼ)` from per-component variances.
pub fn log_variance_features(variances: &[f64]) -> Result<FeatureVector> {
    let total: f64 = variances.iter().sum();
    if !(total >= VAR_FLOOR) || variances.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::DegenerateVariance);
    }
    Ok(FeatureVector(variances.iter().map(|&v| log(v / total)).collect()))
}

/// Features of a filtered `2m × time` signal.
pub fn extract_features(filtered: &Matrix) -> Result<FeatureVector> {
    if filtered.cols() < 2 {
        return Err(Error::InvalidWindow("need at least two samples per row"));
    }
    let vars: Vec<f64> = (0..filtered.rows())
        .map(|i| population_variance(filtered.row(i)))
        .collect();
    log_variance_features(&vars)
}
