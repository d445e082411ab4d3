//! Dense matrix primitives shared by the solvers: the primal data matrix,
//! linear kernels, cross kernels and a few numerically careful helpers.
//!
//! Data matrices are stored feature-by-sample (`m × ℓ`), so each column is
//! one document.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Feature-by-sample data for the primal view.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    data: DMatrix<f64>,
}

impl DataMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "data matrix must be non-empty, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        check_finite(&data)?;
        Ok(Self { data })
    }

    pub fn n_features(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.data
    }
}

/// Symmetric positive semi-definite Gram matrix over training samples.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    data: DMatrix<f64>,
}

impl KernelMatrix {
    /// Wraps a square matrix, symmetrizing it. Fails if the input is not
    /// square, not finite, or noticeably asymmetric.
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if !data.is_square() || data.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "kernel must be square and non-empty, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        check_finite(&data)?;
        let scale = data.amax().max(f64::MIN_POSITIVE);
        let asym = (&data - data.transpose()).amax();
        if asym > 1e-10 * scale {
            return Err(Error::InvalidParameter(format!(
                "kernel asymmetry {asym:e} exceeds tolerance"
            )));
        }
        Ok(Self {
            data: symmetrize(&data),
        })
    }

    pub fn size(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        self.data.trace()
    }

    /// PSD up to round-off: smallest eigenvalue ≥ −rel_tol · trace.
    pub fn is_psd(&self, rel_tol: f64) -> bool {
        is_psd(&self.data, rel_tol)
    }
}

/// Inner products between test samples (rows) and training samples (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct CrossKernel {
    data: DMatrix<f64>,
}

impl CrossKernel {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        check_finite(&data)?;
        Ok(Self { data })
    }

    pub fn n_test(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_train(&self) -> usize {
        self.data.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }
}

/// `K = XᵀX`, symmetrized.
pub fn linear_kernel(x: &DataMatrix) -> KernelMatrix {
    let k = x.matrix().tr_mul(x.matrix());
    KernelMatrix {
        data: symmetrize(&k),
    }
}

pub fn cross_kernel(test: &DataMatrix, train: &DataMatrix) -> Result<CrossKernel> {
    if test.n_features() != train.n_features() {
        return Err(Error::DimensionMismatch(format!(
            "cross kernel: test has {} features, train has {}",
            test.n_features(),
            train.n_features()
        )));
    }
    CrossKernel::new(test.matrix().tr_mul(train.matrix()))
}

/// Diagonal of `XXᵀ` (squared row norms) without forming the `m × m` product.
pub fn gram_diag(x: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(x.nrows(), x.row_iter().map(|r| r.norm_squared()))
}

/// Diagonal of `K²` for symmetric `K`, i.e. squared column norms.
pub fn kernel_sq_diag(k: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(k.ncols(), k.column_iter().map(|c| c.norm_squared()))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn is_psd(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    let trace = m.trace().abs();
    let eig = SymmetricEigen::new(symmetrize(m));
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    min >= -rel_tol * trace.max(f64::MIN_POSITIVE)
}

/// 2-norm condition number via singular values; infinite when singular.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Cosine of the angle between two vectors; `None` when either is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    debug_assert_eq!(a.len(), b.len());
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        None
    } else {
        Some(dot / (na.sqrt() * nb.sqrt()))
    }
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    for (col, c) in m.column_iter().enumerate() {
        if let Some(row) = c.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row, col });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn identity_kernel() {
        let x = DataMatrix::new(DMatrix::identity(2, 2)).unwrap();
        assert_eq!(linear_kernel(&x).matrix(), &DMatrix::<f64>::identity(2, 2));
    }

    #[test]
    fn single_sample_kernel_is_squared_norm() {
        let x = DataMatrix::new(DMatrix::from_column_slice(3, 1, &[1.0, 2.0, -2.0])).unwrap();
        let k = linear_kernel(&x);
        assert_eq!(k.size(), 1);
        assert!((k.matrix()[(0, 0)] - 9.0).abs() < 1e-15);
    }

    #[test]
    fn kernel_matches_pairwise_dots() {
        let raw = random(3, 4, 1);
        let k = linear_kernel(&DataMatrix::new(raw.clone()).unwrap());
        for i in 0..4 {
            for j in 0..4 {
                let dot: f64 = (0..3).map(|f| raw[(f, i)] * raw[(f, j)]).sum();
                assert!((k.matrix()[(i, j)] - dot).abs() < 1e-14);
            }
        }
        assert!(k.is_psd(1e-8));
    }

    #[test]
    fn cross_kernel_self_consistency() {
        let x = DataMatrix::new(random(5, 4, 2)).unwrap();
        let ks = cross_kernel(&x, &x).unwrap();
        let k = linear_kernel(&x);
        assert!((ks.matrix() - k.matrix()).amax() < 1e-14);
    }

    #[test]
    fn cross_kernel_zero_test_doc_gives_zero_row() {
        let train = DataMatrix::new(random(4, 3, 3)).unwrap();
        let mut t = random(4, 2, 4);
        t.column_mut(1).fill(0.0);
        let ks = cross_kernel(&DataMatrix::new(t.clone()).unwrap(), &train).unwrap();
        assert!(ks.matrix().row(1).iter().all(|&v| v == 0.0));
        for i in 0..2 {
            for j in 0..3 {
                let dot: f64 = (0..4).map(|f| t[(f, i)] * train.matrix()[(f, j)]).sum();
                assert!((ks.matrix()[(i, j)] - dot).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn cross_kernel_dimension_mismatch() {
        let a = DataMatrix::new(random(4, 3, 5)).unwrap();
        let b = DataMatrix::new(random(5, 3, 6)).unwrap();
        assert!(matches!(
            cross_kernel(&a, &b),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn gram_diag_cases() {
        assert_eq!(gram_diag(&DMatrix::identity(3, 3)).as_slice(), &[1.0, 1.0, 1.0]);
        let mut x = random(5, 7, 7);
        x.row_mut(2).fill(0.0);
        let d = gram_diag(&x);
        assert_eq!(d[2], 0.0);
        let full = &x * x.transpose();
        for i in 0..5 {
            assert!((d[i] - full[(i, i)]).abs() <= 1e-12 * full[(i, i)].abs().max(1.0));
        }
    }

    #[test]
    fn kernel_rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(KernelMatrix::new(m).is_err());
    }

    #[test]
    fn data_matrix_rejects_nan() {
        let m = DMatrix::from_row_slice(1, 2, &[1.0, f64::NAN]);
        assert!(matches!(
            DataMatrix::new(m),
            Err(Error::NonFinite { row: 0, col: 1 })
        ));
    }

    #[test]
    fn cosine_zero_vector() {
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 2.0]), None);
        assert!((cosine(&[1.0, 0.0], &[2.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    proptest::proptest! {
        #[test]
        fn gram_diag_matches_product(seed in 0u64..1000) {
            let x = random(10, 10, seed);
            let d = gram_diag(&x);
            let full = &x * x.transpose();
            for i in 0..10 {
                proptest::prop_assert!((d[i] - full[(i, i)]).abs() <= 1e-12 * full[(i, i)].abs());
            }
        }

        #[test]
        fn linear_kernel_is_psd(seed in 0u64..1000, rows in 1usize..8, cols in 1usize..8) {
            let x = DataMatrix::new(random(rows, cols, seed)).unwrap();
            let k = linear_kernel(&x);
            proptest::prop_assert!(k.is_psd(1e-8));
            proptest::prop_assert!((k.matrix() - k.matrix().transpose()).amax() == 0.0);
        }
    }
}
