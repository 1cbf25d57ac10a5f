use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use unrectify::graph::random::{gaussian_matrix, rng};
use unrectify::matrix::Matrix;
use unrectify::stability::spectral_norm;

fn svd_norm(m: &Matrix<f64>) -> f64 {
    let d = DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice());
    d.singular_values().max()
}

#[test]
fn matches_svd_on_random_matrices() {
    let mut r = rng(11);
    for _ in 0..50 {
        let (rows, cols) = (r.random_range(1..=64), r.random_range(1..=64));
        let m: Matrix<f64> = gaussian_matrix(&mut r, rows, cols, 1.0);
        let (ours, oracle) = (spectral_norm(&m).unwrap(), svd_norm(&m));
        assert!((ours - oracle).abs() <= 1e-8, "{rows}x{cols}: {ours} vs {oracle}");
    }
}

#[test]
fn rank_deficient_and_clustered() {
    // A gap of 1e-6 between the top two singular values is below what 1000
    // power steps resolve; the estimate is still a lower bound within the gap.
    let m = Matrix::<f64>::diag(&[1.0, 1.0 - 1e-6, 0.3, 0.0]);
    let s = spectral_norm(&m).unwrap();
    assert!((1.0 - 1e-6..=1.0 + 1e-15).contains(&s), "{s}");
    let u = Matrix::from_f64_rows(&[vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0]]).unwrap();
    assert!((spectral_norm::<f64>(&u).unwrap() - svd_norm(&u)).abs() <= 1e-8);
}

#[test]
fn single_precision_is_close() {
    let m: Matrix<f64> = gaussian_matrix(&mut rng(3), 12, 9, 1.0);
    let f: Matrix<f32> = m.cast();
    assert!((spectral_norm(&f).unwrap() as f64 - svd_norm(&m)).abs() < 1e-4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scaling_and_transpose(seed in any::<u64>(), rows in 1usize..12, cols in 1usize..12, c in -5.0f64..5.0) {
        let m: Matrix<f64> = gaussian_matrix(&mut rng(seed), rows, cols, 1.0);
        let s = spectral_norm(&m).unwrap();
        prop_assert!((spectral_norm(&m.transpose()).unwrap() - s).abs() <= 1e-8 * s.max(1.0));
        prop_assert!((spectral_norm(&m.scaled(c)).unwrap() - c.abs() * s).abs() <= 1e-8 * s.max(1.0));
        prop_assert!(s <= m.frobenius_norm() + 1e-12);
        prop_assert!(s + 1e-12 >= m.max_abs());
    }
}
