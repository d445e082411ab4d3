//! Regularized kernel CCA baseline.
//!
//! Maximizes `αᵀK_aK_bβ` subject to `αᵀ(K_a² + κℓK_a)α = βᵀ(K_b² + κℓK_b)β = 1`.
//! Both kernels are diagonalized once. In eigen-coordinates the constraint
//! matrices are diagonal, so the problem reduces to an SVD of an
//! `r_a × r_b` matrix. Null-space directions of a kernel never change its
//! projections and are dropped.

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{CrossKernel, KernelMatrix};

pub const DEFAULT_KAPPA: f64 = 0.03;

/// Eigenvalues at or below this fraction of the largest are treated as zero.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct KccaModel {
    pub alpha_dirs: DMatrix<f64>,
    pub beta_dirs: DMatrix<f64>,
    pub correlations: Vec<f64>,
    pub kappa: f64,
}

struct Reduced {
    vectors: DMatrix<f64>,
    /// `λ / sqrt(λ² + κℓλ)` per retained eigenvalue.
    gain: DVector<f64>,
    /// `1 / sqrt(λ² + κℓλ)`
    inv_sqrt: DVector<f64>,
}

fn reduce(k: &KernelMatrix, kappa: f64) -> Result<Reduced> {
    let l = k.size() as f64;
    let eig = SymmetricEigen::new(k.matrix().clone());
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    if top <= 0.0 {
        return Err(Error::SingularKernelBlock);
    }
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] > RANK_TOL * top)
        .collect();
    if kappa == 0.0 && keep.len() < eig.eigenvalues.len() {
        return Err(Error::SingularKernelBlock);
    }
    let vectors = eig.eigenvectors.select_columns(&keep);
    let values = DVector::from_iterator(keep.len(), keep.iter().map(|&i| eig.eigenvalues[i]));
    let inv_sqrt = values.map(|v| 1.0 / (v * v + kappa * l * v).sqrt());
    let gain = values.component_mul(&inv_sqrt);
    Ok(Reduced {
        vectors,
        gain,
        inv_sqrt,
    })
}

pub fn fit_kcca(ka: &KernelMatrix, kb: &KernelMatrix, kappa: f64, d: usize) -> Result<KccaModel> {
    if ka.size() != kb.size() {
        return Err(Error::DimensionMismatch(format!(
            "kernels are {}x{} and {}x{}",
            ka.size(),
            ka.size(),
            kb.size(),
            kb.size()
        )));
    }
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidParameter(format!("kappa must be non-negative, got {kappa}")));
    }
    if d == 0 || d > ka.size() {
        return Err(Error::InvalidParameter(format!("d = {d} must be in 1..={}", ka.size())));
    }
    let ra = reduce(ka, kappa)?;
    let rb = reduce(kb, kappa)?;
    let mut m = ra.vectors.tr_mul(&rb.vectors);
    for (i, g) in ra.gain.iter().enumerate() {
        m.row_mut(i).scale_mut(*g);
    }
    for (j, g) in rb.gain.iter().enumerate() {
        m.column_mut(j).scale_mut(*g);
    }
    let svd = m.svd(true, true);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    let available = order.len();
    if d > available {
        warn!("kcca: only {available} directions available, asked for {d}");
    }
    order.truncate(d.min(available));

    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V");
    let mut alpha_dirs = DMatrix::zeros(ka.size(), order.len());
    let mut beta_dirs = DMatrix::zeros(kb.size(), order.len());
    for (c, &i) in order.iter().enumerate() {
        let a = u.column(i).component_mul(&ra.inv_sqrt);
        let b = v_t.row(i).transpose().component_mul(&rb.inv_sqrt);
        alpha_dirs.set_column(c, &(&ra.vectors * a));
        beta_dirs.set_column(c, &(&rb.vectors * b));
    }
    Ok(KccaModel {
        alpha_dirs,
        beta_dirs,
        correlations: order.iter().map(|&i| svd.singular_values[i]).collect(),
        kappa,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KccaView {
    A,
    B,
}

/// Test coordinates `K_s · dirs` for the first `d` directions, rows scaled
/// to unit length. Zero rows stay zero.
pub fn project_kcca(model: &KccaModel, ks: &CrossKernel, view: KccaView, d: usize) -> Result<DMatrix<f64>> {
    let dirs = match view {
        KccaView::A => &model.alpha_dirs,
        KccaView::B => &model.beta_dirs,
    };
    if ks.n_train() != dirs.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "cross kernel has {} training columns, model has {}",
            ks.n_train(),
            dirs.nrows()
        )));
    }
    if d == 0 || d > dirs.ncols() {
        return Err(Error::InvalidParameter(format!("d = {d} must be in 1..={}", dirs.ncols())));
    }
    let mut coords = ks.matrix() * dirs.columns(0, d);
    normalize_rows(&mut coords);
    Ok(coords)
}

pub(crate) fn normalize_rows(m: &mut DMatrix<f64>) {
    for mut row in m.row_iter_mut() {
        let n = row.norm();
        if n > 0.0 {
            row /= n;
        }
    }
}
