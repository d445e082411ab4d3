mod common;

use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use scca_core::kcca::fit_kcca;
use scca_core::linalg::{linear_kernel, DataMatrix, KernelMatrix};

fn views(ma: usize, mb: usize, l: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut r = rng(seed);
    let z = uniform(2, l, &mut r);
    let xa = uniform(ma, 2, &mut r) * &z + uniform(ma, l, &mut r) * 0.3;
    let xb = uniform(mb, 2, &mut r) * &z + uniform(mb, l, &mut r) * 0.3;
    (xa, xb)
}

fn kernels(xa: &DMatrix<f64>, xb: &DMatrix<f64>) -> (KernelMatrix, KernelMatrix) {
    (
        linear_kernel(&DataMatrix::new(xa.clone()).unwrap()),
        linear_kernel(&DataMatrix::new(xb.clone()).unwrap()),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn linear_kernels_match_ridge_cca(seed in 0u64..10_000, ma in 2usize..6, mb in 2usize..6, kappa in 0.001f64..0.5) {
        let l = 9;
        let (xa, xb) = views(ma, mb, l, seed);
        let (ka, kb) = kernels(&xa, &xb);
        let d = ma.min(mb);
        let model = fit_kcca(&ka, &kb, kappa, d).unwrap();
        let reference = regularized_linear_cca(&xa, &xb, kappa * l as f64);
        prop_assert_eq!(model.correlations.len(), d);
        for (got, want) in model.correlations.iter().zip(&reference) {
            prop_assert!((got - want).abs() <= 1e-8, "{:?} vs {:?}", model.correlations, reference);
        }
    }

    #[test]
    fn directions_are_normalized_and_attain_their_correlation(seed in 0u64..10_000, kappa in 0.001f64..0.5) {
        let l = 10;
        let (xa, xb) = views(4, 5, l, seed);
        let (ka, kb) = kernels(&xa, &xb);
        let model = fit_kcca(&ka, &kb, kappa, 4).unwrap();
        let reg = |k: &DMatrix<f64>| k * k + k * (kappa * l as f64);
        let na = model.alpha_dirs.transpose() * reg(ka.matrix()) * &model.alpha_dirs;
        let nb = model.beta_dirs.transpose() * reg(kb.matrix()) * &model.beta_dirs;
        let cross = model.alpha_dirs.transpose() * ka.matrix() * kb.matrix() * &model.beta_dirs;
        for i in 0..4 {
            prop_assert!((na[(i, i)] - 1.0).abs() <= 1e-8);
            prop_assert!((nb[(i, i)] - 1.0).abs() <= 1e-8);
            prop_assert!((cross[(i, i)] - model.correlations[i]).abs() <= 1e-8);
        }
        prop_assert!(model.correlations.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(model.correlations.iter().all(|c| (0.0..=1.0 + 1e-12).contains(c)));
    }
}

#[test]
fn swapping_views_swaps_directions() {
    let (xa, xb) = views(4, 6, 11, 3);
    let (ka, kb) = kernels(&xa, &xb);
    let ab = fit_kcca(&ka, &kb, 0.05, 3).unwrap();
    let ba = fit_kcca(&kb, &ka, 0.05, 3).unwrap();
    for (x, y) in ab.correlations.iter().zip(&ba.correlations) {
        assert!((x - y).abs() <= 1e-10);
    }
    // singular vectors are defined up to a joint sign flip
    for i in 0..3 {
        let s = ab.alpha_dirs.column(i).dot(&ba.beta_dirs.column(i)).signum();
        assert!((ab.alpha_dirs.column(i) - ba.beta_dirs.column(i) * s).amax() <= 1e-6);
    }
}

#[test]
fn more_regularization_lowers_the_leading_correlation() {
    let (xa, xb) = views(5, 5, 12, 8);
    let (ka, kb) = kernels(&xa, &xb);
    let leading: Vec<f64> = [0.001, 0.01, 0.1, 1.0]
        .iter()
        .map(|&kappa| fit_kcca(&ka, &kb, kappa, 1).unwrap().correlations[0])
        .collect();
    assert!(leading.windows(2).all(|w| w[1] < w[0]), "{leading:?}");
}

#[test]
fn unregularized_fit_needs_full_rank_kernels() {
    let (xa, xb) = views(3, 3, 8, 1);
    let (ka, kb) = kernels(&xa, &xb);
    assert!(fit_kcca(&ka, &kb, 0.0, 2).is_err());
}
