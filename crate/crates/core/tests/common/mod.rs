#![allow(dead_code)]

use mipilot_core::linalg::Matrix;
use mipilot_core::signal::SpatialCovariance;
use mipilot_core::synth::NormalStream;

pub fn random_matrix(rng: &mut NormalStream, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.normal()).collect();
    Matrix::from_row_major(rows, cols, data).unwrap()
}

/// `A Aᵀ + δ I`, scaled to unit trace.
pub fn random_covariance(rng: &mut NormalStream, ch: usize) -> SpatialCovariance {
    let a = random_matrix(rng, ch, ch + 2);
    let mut c = a.matmul(&a.transpose());
    for i in 0..ch {
        c[(i, i)] += 0.05 * ch as f64;
    }
    SpatialCovariance::normalized(c).unwrap()
}

pub fn to_na(m: &Matrix) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn from_na(m: &nalgebra::DMatrix<f64>) -> Matrix {
    let mut out = Matrix::zeros(m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out[(i, j)] = m[(i, j)];
        }
    }
    out
}
