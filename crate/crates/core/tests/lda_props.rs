mod common;

use common::random_matrix;
use mipilot_core::lda::{classify_lda, fisher_criterion, fit_lda, project};
use mipilot_core::linalg::Matrix;
use mipilot_core::signal::ClassId;
use mipilot_core::synth::NormalStream;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn c(i: u8) -> ClassId {
    ClassId::new(i).unwrap()
}

/// Two correlated Gaussian clouds sharing a random mixing map.
fn clouds(rng: &mut NormalStream, d: usize, n1: usize, n2: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mix = random_matrix(rng, d, d);
    let shift: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    let mut draw = |n: usize, offset: f64| -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                let z: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
                let x = mix.mat_vec(&z);
                x.iter().zip(&shift).map(|(a, s)| a + offset * s).collect()
            })
            .collect()
    };
    let a = draw(n1, 1.0);
    let b = draw(n2, -1.0);
    (a, b)
}

fn stats(xs: &[Vec<f64>]) -> (DVector<f64>, DMatrix<f64>) {
    let d = xs[0].len();
    let n = xs.len() as f64;
    let mut mu = DVector::zeros(d);
    for x in xs {
        mu += DVector::from_column_slice(x);
    }
    mu /= n;
    let mut s = DMatrix::zeros(d, d);
    for x in xs {
        let v = DVector::from_column_slice(x) - &mu;
        s += &v * v.transpose();
    }
    (mu, s / n)
}

fn oracle_direction(a: &[Vec<f64>], b: &[Vec<f64>]) -> DVector<f64> {
    let (m1, s1) = stats(a);
    let (m2, s2) = stats(b);
    let w = (s1 + s2).lu().solve(&(m1 - m2)).unwrap();
    w.normalize()
}

#[test]
fn direction_matches_independent_solve() {
    let mut rng = NormalStream::new(31);
    let mut worst = 1.0f64;
    for k in 0..100 {
        let d = 2 + k % 5;
        let (a, b) = clouds(&mut rng, d, 30 + k % 17, 25 + k % 11);
        let (model, _) = fit_lda(&a, &b, c(1), c(2)).unwrap();
        let oracle = oracle_direction(&a, &b);
        let cos = DVector::from_column_slice(model.w()).dot(&oracle);
        worst = worst.min(cos);
    }
    assert!(worst >= 1.0 - 1e-10, "worst cosine {worst}");
}

#[test]
fn fitted_direction_beats_random_directions() {
    let mut rng = NormalStream::new(77);
    for k in 0..100 {
        let d = 2 + k % 5;
        let (a, b) = clouds(&mut rng, d, 40, 40);
        let (model, report) = fit_lda(&a, &b, c(1), c(2)).unwrap();
        let best = fisher_criterion(model.w(), &report.sb, &report.sw);
        assert!((best - report.j_value).abs() <= 1e-12 * best.max(1.0));
        for _ in 0..1000 {
            let v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
            let j = fisher_criterion(&v, &report.sb, &report.sw);
            assert!(best + 1e-9 >= j, "random direction {j} beats {best}");
        }
    }
}

#[test]
fn anisotropic_plane() {
    // Class spread is wide along x and narrow along y, means differ along
    // both; the discriminant leans towards y.
    let mut rng = NormalStream::new(3);
    let make = |rng: &mut NormalStream, mx: f64, my: f64| -> Vec<Vec<f64>> {
        (0..400)
            .map(|_| vec![mx + 5.0 * rng.normal(), my + 0.2 * rng.normal()])
            .collect()
    };
    let a = make(&mut rng, 1.0, 1.0);
    let b = make(&mut rng, -1.0, -1.0);
    let (model, _) = fit_lda(&a, &b, c(3), c(4)).unwrap();
    let w = model.w();
    assert!(w[1] > 0.0 && w[1].abs() > 20.0 * w[0].abs(), "w = {w:?}");
    assert_eq!(classify_lda(&model, &[0.0, 0.5]).unwrap(), c(3));
    assert_eq!(classify_lda(&model, &[0.0, -0.5]).unwrap(), c(4));
}

#[test]
fn threshold_sits_between_projected_means() {
    let mut rng = NormalStream::new(12);
    let (a, b) = clouds(&mut rng, 4, 50, 70);
    let (model, report) = fit_lda(&a, &b, c(1), c(2)).unwrap();
    let z1 = project(&model, &report.mu1).unwrap();
    let z2 = project(&model, &report.mu2).unwrap();
    assert!(z1 > z2);
    assert!((model.z0() - 0.5 * (z1 + z2)).abs() < 1e-12);
    let on_boundary: Vec<f64> = {
        let w = model.w();
        w.iter().map(|wi| wi * model.z0()).collect()
    };
    assert_eq!(classify_lda(&model, &on_boundary).unwrap(), c(1));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rescaling_preserves_decisions(seed in 0u64..10_000, scale in 1e-3f64..1e3) {
        let mut rng = NormalStream::new(seed);
        let (a, b) = clouds(&mut rng, 3, 20, 20);
        let (m1, _) = fit_lda(&a, &b, c(1), c(2)).unwrap();
        let sa: Vec<Vec<f64>> = a.iter().map(|x| x.iter().map(|v| v * scale).collect()).collect();
        let sb: Vec<Vec<f64>> = b.iter().map(|x| x.iter().map(|v| v * scale).collect()).collect();
        let (m2, _) = fit_lda(&sa, &sb, c(1), c(2)).unwrap();
        for (u, v) in m1.w().iter().zip(m2.w()) {
            prop_assert!((u - v).abs() < 1e-8);
        }
        for (x, sx) in a.iter().chain(&b).zip(sa.iter().chain(&sb)) {
            let z = project(&m1, x).unwrap() - m1.z0();
            if z.abs() > 1e-9 {
                prop_assert_eq!(classify_lda(&m1, x).unwrap(), classify_lda(&m2, sx).unwrap());
            }
        }
    }

    #[test]
    fn swapping_classes_reflects_direction(seed in 0u64..10_000) {
        let mut rng = NormalStream::new(seed);
        let (a, b) = clouds(&mut rng, 4, 15, 25);
        let (m1, r1) = fit_lda(&a, &b, c(1), c(2)).unwrap();
        let (m2, r2) = fit_lda(&b, &a, c(2), c(1)).unwrap();
        for (u, v) in m1.w().iter().zip(m2.w()) {
            prop_assert!((u + v).abs() < 1e-10);
        }
        prop_assert!((m1.z0() + m2.z0()).abs() < 1e-10);
        prop_assert!((r1.j_value - r2.j_value).abs() <= 1e-9 * r1.j_value.max(1.0));
    }

    #[test]
    fn scatter_report_is_consistent(seed in 0u64..10_000) {
        let mut rng = NormalStream::new(seed);
        let (a, b) = clouds(&mut rng, 3, 12, 9);
        let (_, report) = fit_lda(&a, &b, c(1), c(2)).unwrap();
        let (_, s1) = stats(&a);
        let (_, s2) = stats(&b);
        let sw = s1 + s2;
        let ours = Matrix::from_row_major(3, 3, report.sw.as_slice().to_vec()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!((ours[(i, j)] - sw[(i, j)]).abs() < 1e-10);
            }
        }
    }
}
