//! Two-class Fisher linear discriminant.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{cholesky, cholesky_solve, dot, norm2, Matrix};
use crate::signal::ClassId;
use crate::{Error, Result};

/// Relative ridge added to the within-class scatter before solving.
pub const RIDGE: f64 = 1e-8;

/// Unit projection direction and threshold. Projections at or above the
/// threshold belong to `class_pos`.
#[derive(Clone, Debug, PartialEq)]
pub struct LdaModel {
    w: Vec<f64>,
    z0: f64,
    class_pos: ClassId,
    class_neg: ClassId,
}

impl LdaModel {
    /// Rebuilds a model, normalizing `w` to unit length.
    pub fn new(w: Vec<f64>, z0: f64, class_pos: ClassId, class_neg: ClassId) -> Result<Self> {
        let n = norm2(&w);
        if w.is_empty() || !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidSpec("projection must be a finite nonzero vector"));
        }
        if !z0.is_finite() {
            return Err(Error::InvalidSpec("threshold must be finite"));
        }
        if class_pos == class_neg {
            return Err(Error::InvalidSpec("the two classes must differ"));
        }
        Ok(Self {
            w: w.into_iter().map(|v| v / n).collect(),
            z0,
            class_pos,
            class_neg,
        })
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn z0(&self) -> f64 {
        self.z0
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn class_pos(&self) -> ClassId {
        self.class_pos
    }

    pub fn class_neg(&self) -> ClassId {
        self.class_neg
    }
}

/// Class statistics at the solution.
#[derive(Clone, Debug)]
pub struct FitReport {
    pub mu1: Vec<f64>,
    pub mu2: Vec<f64>,
    /// Within-class scatter, sum of the two population covariances.
    pub sw: Matrix,
    /// Between-class scatter `(μ₁ − μ₂)(μ₁ − μ₂)ᵀ`.
    pub sb: Matrix,
    /// Fisher criterion at the fitted direction; zero when the means coincide.
    pub j_value: f64,
}

/// `J(w) = wᵀ S_B w / wᵀ S_W w`.
pub fn fisher_criterion(w: &[f64], sb: &Matrix, sw: &Matrix) -> f64 {
    let num = dot(w, &sb.mat_vec(w));
    let den = dot(w, &sw.mat_vec(w));
    num / den
}

fn mean_and_covariance<F: AsRef<[f64]>>(samples: &[F], dim: usize) -> (Vec<f64>, Matrix) {
    let n = samples.len() as f64;
    let mut mu = vec![0.0; dim];
    for s in samples {
        for (m, v) in mu.iter_mut().zip(s.as_ref()) {
            *m += v;
        }
    }
    mu.iter_mut().for_each(|m| *m /= n);
    let mut cov = Matrix::zeros(dim, dim);
    for s in samples {
        let s = s.as_ref();
        for i in 0..dim {
            let di = s[i] - mu[i];
            for j in i..dim {
                cov[(i, j)] += di * (s[j] - mu[j]);
            }
        }
    }
    for i in 0..dim {
        for j in i..dim {
            let v = cov[(i, j)] / n;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    (mu, cov)
}

fn check_dims<F: AsRef<[f64]>>(samples: &[F], dim: usize) -> Result<()> {
    match samples.iter().find(|s| s.as_ref().len() != dim) {
        Some(s) => Err(Error::DimMismatch {
            expected: dim,
            found: s.as_ref().len(),
        }),
        None => Ok(()),
    }
}

/// Fits the discriminant. `features_pos` are samples of `class_pos`
/// ("class 1"), which ends up on the high side of the threshold.
pub fn fit_lda<F: AsRef<[f64]>>(
    features_pos: &[F],
    features_neg: &[F],
    class_pos: ClassId,
    class_neg: ClassId,
) -> Result<(LdaModel, FitReport)> {
    if class_pos == class_neg {
        return Err(Error::InvalidSpec("the two classes must differ"));
    }
    for (set, class) in [(features_pos, class_pos), (features_neg, class_neg)] {
        match set.len() {
            0 => return Err(Error::EmptyClass(class)),
            1 => return Err(Error::InvalidSpec("need at least two samples per class")),
            _ => {}
        }
    }
    let dim = features_pos[0].as_ref().len();
    if dim == 0 {
        return Err(Error::DimMismatch { expected: 1, found: 0 });
    }
    check_dims(features_pos, dim)?;
    check_dims(features_neg, dim)?;

    let (mu1, cov1) = mean_and_covariance(features_pos, dim);
    let (mu2, cov2) = mean_and_covariance(features_neg, dim);
    let sw = cov1.add(&cov2);
    let diff: Vec<f64> = mu1.iter().zip(&mu2).map(|(a, b)| a - b).collect();
    let mut sb = Matrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            sb[(i, j)] = diff[i] * diff[j];
        }
    }

    let ridge = RIDGE * sw.trace() / dim as f64;
    let mut regularized = sw.clone();
    for i in 0..dim {
        regularized[(i, i)] += ridge;
    }
    let chol = cholesky(&regularized).ok_or(Error::DegenerateScatter)?;

    let (w, j_value) = if diff.iter().all(|&d| d == 0.0) {
        let mut e = vec![0.0; dim];
        e[0] = 1.0;
        (e, 0.0)
    } else {
        let raw = cholesky_solve(&chol, &diff);
        let n = norm2(&raw);
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::DegenerateScatter);
        }
        let w: Vec<f64> = raw.iter().map(|v| v / n).collect();
        let j = fisher_criterion(&w, &sb, &sw);
        (w, if j.is_finite() { j } else { f64::INFINITY })
    };

    let z0 = 0.5 * (dot(&w, &mu1) + dot(&w, &mu2));
    let model = LdaModel {
        w,
        z0,
        class_pos,
        class_neg,
    };
    let report = FitReport {
        mu1,
        mu2,
        sw,
        sb,
        j_value,
    };
    Ok((model, report))
}

/// `z = wᵀx`.
pub fn project(model: &LdaModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.dim() {
        return Err(Error::DimMismatch {
            expected: model.dim(),
            found: x.len(),
        });
    }
    Ok(dot(&model.w, x))
}

/// `class_pos` iff `wᵀx ≥ z0`.
pub fn classify_lda(model: &LdaModel, x: &[f64]) -> Result<ClassId> {
    let z = project(model, x)?;
    Ok(if z >= model.z0 {
        model.class_pos
    } else {
        model.class_neg
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(i: u8) -> ClassId {
        ClassId::new(i).unwrap()
    }

    fn fixed_model() -> LdaModel {
        LdaModel::new(vec![1.0, 0.0], 0.0, c(1), c(2)).unwrap()
    }

    #[test]
    fn projection_and_boundary() {
        let m = fixed_model();
        assert_eq!(project(&m, &[2.0, 3.0]).unwrap(), 2.0);
        assert_eq!(project(&m, &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(classify_lda(&m, &[2.0, 3.0]).unwrap(), c(1));
        assert_eq!(classify_lda(&m, &[-0.5, 7.0]).unwrap(), c(2));
        assert_eq!(classify_lda(&m, &[0.0, 5.0]).unwrap(), c(1));
        assert_eq!(
            classify_lda(&m, &[1.0]).unwrap_err(),
            Error::DimMismatch { expected: 2, found: 1 }
        );
    }

    #[test]
    fn symmetric_isotropic_classes() {
        let spread = [[0.5, 0.0], [-0.5, 0.0], [0.0, 0.5], [0.0, -0.5]];
        let pos: Vec<Vec<f64>> = spread.iter().map(|d| vec![1.0 + d[0], d[1]]).collect();
        let neg: Vec<Vec<f64>> = spread.iter().map(|d| vec![-1.0 + d[0], d[1]]).collect();
        let (m, report) = fit_lda(&pos, &neg, c(1), c(2)).unwrap();
        assert!((m.w()[0] - 1.0).abs() < 1e-12 && m.w()[1].abs() < 1e-12);
        assert!(m.z0().abs() < 1e-12);
        assert!(report.j_value > 0.0);
    }

    #[test]
    fn identical_means_give_zero_criterion() {
        let pos = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
        let neg = vec![vec![2.0, 0.0], vec![-2.0, 0.0], vec![0.0, 0.5], vec![0.0, -0.5]];
        let (m, report) = fit_lda(&pos, &neg, c(1), c(2)).unwrap();
        assert_eq!(report.j_value, 0.0);
        assert!((norm2(m.w()) - 1.0).abs() < 1e-12);
        assert!(report.sb.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn degenerate_inputs() {
        let pos = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let neg = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        assert_eq!(fit_lda(&pos, &neg, c(1), c(2)).unwrap_err(), Error::DegenerateScatter);
        let empty: Vec<Vec<f64>> = Vec::new();
        assert_eq!(fit_lda(&pos, &empty, c(1), c(2)).unwrap_err(), Error::EmptyClass(c(2)));
        let ragged = vec![vec![1.0, 1.0], vec![1.0]];
        assert!(matches!(
            fit_lda(&pos, &ragged, c(1), c(2)),
            Err(Error::DimMismatch { .. })
        ));
    }
}
