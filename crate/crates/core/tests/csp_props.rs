mod common;

use common::{random_covariance, random_matrix, to_na};
use mipilot_core::csp::{apply_csp, extract_features, fit_csp, CspModel};
use mipilot_core::linalg::Matrix;
use mipilot_core::signal::{EegTrial, SpatialCovariance};
use mipilot_core::synth::NormalStream;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn post_condition_errors(model: &CspModel, s1: &SpatialCovariance, s2: &SpatialCovariance) -> [f64; 3] {
    let w = to_na(model.w_full());
    let a = to_na(s1.matrix());
    let b = to_na(s2.matrix());
    let n = a.nrows();
    let lambda = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(model.eigenvalues()));
    let eye = DMatrix::<f64>::identity(n, n);
    let e1 = (w.transpose() * &a * &w - &lambda).amax();
    let e2 = (w.transpose() * &b * &w - (&eye - &lambda)).amax();
    let e3 = (w.transpose() * (&a + &b) * &w - &eye).amax();
    [e1, e2, e3]
}

/// Generalized eigenpairs of (Σ₁, Σ₁+Σ₂) via Cholesky reduction in nalgebra.
fn generalized_oracle(s1: &SpatialCovariance, s2: &SpatialCovariance) -> (Vec<f64>, DMatrix<f64>) {
    let a = to_na(s1.matrix());
    let c = &a + to_na(s2.matrix());
    let l = c.cholesky().unwrap().l();
    let linv = l.clone().try_inverse().unwrap();
    let m = &linv * &a * linv.transpose();
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = linv.transpose() * &eig.eigenvectors;
    let mut sorted = DMatrix::zeros(vecs.nrows(), vecs.ncols());
    for (dst, &src) in order.iter().enumerate() {
        let mut col = vecs.column(src).into_owned();
        let pivot = col
            .iter()
            .copied()
            .fold(0.0f64, |p, v| if v.abs() > p.abs() { v } else { p });
        if pivot < 0.0 {
            col = -col;
        }
        sorted.set_column(dst, &col);
    }
    (values, sorted)
}

#[test]
fn random_pair_matches_dense_oracle() {
    let mut rng = NormalStream::new(2024);
    let s1 = random_covariance(&mut rng, 14);
    let s2 = random_covariance(&mut rng, 14);
    let model = fit_csp(&s1, &s2, 3).unwrap();
    for e in post_condition_errors(&model, &s1, &s2) {
        assert!(e <= 1e-8, "post-condition error {e}");
    }
    let (values, vectors) = generalized_oracle(&s1, &s2);
    for (a, b) in model.eigenvalues().iter().zip(&values) {
        assert!((a - b).abs() < 1e-10);
    }
    let w = to_na(model.w_full());
    assert!((&w - &vectors).amax() < 1e-8);
    let picked = model.filters().w_csp();
    for (row, col) in [0, 1, 2, 11, 12, 13].into_iter().enumerate() {
        assert_eq!(picked.row(row), model.w_full().column(col).as_slice());
    }
    let v = to_na(model.rotation());
    assert!((v.transpose() * &v - DMatrix::identity(14, 14)).amax() <= 1e-9);
    assert!(model.eigenvalues().iter().all(|&l| (-1e-9..=1.0 + 1e-9).contains(&l)));
}

#[test]
fn joint_diagonalization_over_many_pairs() {
    let mut rng = NormalStream::new(7);
    let mut worst = 0.0f64;
    for k in 0..200 {
        let ch = [2, 4, 8, 14][k % 4];
        let s1 = random_covariance(&mut rng, ch);
        let s2 = random_covariance(&mut rng, ch);
        let model = fit_csp(&s1, &s2, 1).unwrap();
        let [e1, _, e3] = post_condition_errors(&model, &s1, &s2);
        let off = (to_na(model.w_full()).transpose() * to_na(s1.matrix()) * to_na(model.w_full()))
            .map_with_location(|i, j, v| if i == j { 0.0 } else { v.abs() })
            .max();
        worst = worst.max(e1).max(e3).max(off);
        assert!(model.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
    }
    assert!(worst <= 1e-8, "worst {worst}");
}

fn orthonormal_basis(cols: &DMatrix<f64>) -> DMatrix<f64> {
    cols.clone().qr().q()
}

#[test]
fn swapping_classes_mirrors_spectrum() {
    let mut rng = NormalStream::new(99);
    for ch in [2, 4, 8, 14] {
        let s1 = random_covariance(&mut rng, ch);
        let s2 = random_covariance(&mut rng, ch);
        let m = (ch / 2).min(3);
        let fwd = fit_csp(&s1, &s2, m).unwrap();
        let rev = fit_csp(&s2, &s1, m).unwrap();
        let mut mirrored: Vec<f64> = fwd.eigenvalues().iter().map(|l| 1.0 - l).collect();
        mirrored.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (a, b) in rev.eigenvalues().iter().zip(&mirrored) {
            assert!((a - b).abs() < 1e-10);
        }
        let qa = orthonormal_basis(&to_na(fwd.filters().w_csp()).transpose());
        let qb = orthonormal_basis(&to_na(rev.filters().w_csp()).transpose());
        let residual = &qb - &qa * (qa.transpose() * &qb);
        let sin_max = residual.svd(false, false).singular_values.max();
        assert!(sin_max <= 1e-6, "principal angle sine {sin_max}");
    }
}

#[test]
fn apply_matches_matmul_oracle() {
    let mut rng = NormalStream::new(5);
    let s1 = random_covariance(&mut rng, 8);
    let s2 = random_covariance(&mut rng, 8);
    let model = fit_csp(&s1, &s2, 2).unwrap();
    let e = random_matrix(&mut rng, 8, 300);
    let trial = EegTrial::new(e.clone(), 128.0, None).unwrap();
    let out = apply_csp(model.filters(), &trial).unwrap();
    let w = model.filters().w_csp();
    for i in 0..4 {
        for t in 0..300 {
            let mut acc = 0.0;
            for c in 0..8 {
                acc += w[(i, c)] * e[(c, t)];
            }
            assert!((out[(i, t)] - acc).abs() <= 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn features_are_scale_invariant_and_sum_to_one(seed in 0u64..5000, c in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3]) {
        let mut rng = NormalStream::new(seed);
        let s = random_matrix(&mut rng, 6, 64);
        let a = extract_features(&s).unwrap();
        let b = extract_features(&s.scale(c)).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((x - y).abs() < 1e-10);
        }
        let total: f64 = a.values().iter().map(|v| v.exp()).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn equal_classes_always_give_half(seed in 0u64..2000, ch in 2usize..10) {
        let mut rng = NormalStream::new(seed);
        let s = random_covariance(&mut rng, ch);
        let model = fit_csp(&s, &s, 1).unwrap();
        prop_assert!(model.eigenvalues().iter().all(|l| (l - 0.5).abs() < 1e-9));
    }
}

#[test]
fn identity_filter_bank_passes_channels() {
    let s1 = SpatialCovariance::new(Matrix::from_diagonal(&[0.8, 0.2])).unwrap();
    let s2 = SpatialCovariance::new(Matrix::from_diagonal(&[0.2, 0.8])).unwrap();
    let model = fit_csp(&s1, &s2, 1).unwrap();
    let mut rng = NormalStream::new(1);
    let e = random_matrix(&mut rng, 2, 50);
    let out = apply_csp(model.filters(), &EegTrial::new(e.clone(), 128.0, None).unwrap()).unwrap();
    assert_eq!(out, e);
}
