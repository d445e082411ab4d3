//! Mate retrieval: every test document queries all test documents of the
//! other view, and only its own pair counts as relevant. The score is the
//! mean reciprocal rank of the mate, `p = (1/M) Σ 1/I_j`.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::deflation::DeflationBasis;
use crate::error::{Error, Result};
use crate::linalg::cosine;

/// Nonzero test for weights in sparsity counts.
pub const NONZERO_TOL: f64 = 1e-12;

/// Cosine of two projected vectors; `-∞` when either is zero so that the
/// candidate ranks last.
pub fn similarity(query: &[f64], candidate: &[f64]) -> f64 {
    cosine(query, candidate).unwrap_or(f64::NEG_INFINITY)
}

/// Similarity of a primal query `q` and a dual candidate given by its
/// cross-kernel row: cosine of `qᵀW_eff` and `k_sᵀE_eff`.
pub fn projected_similarity(
    query: &DVector<f64>,
    w_eff: &DMatrix<f64>,
    ks_row: &DVector<f64>,
    e_eff: &DMatrix<f64>,
) -> f64 {
    let a = w_eff.tr_mul(query);
    let b = e_eff.tr_mul(ks_row);
    similarity(a.as_slice(), b.as_slice())
}

/// Candidate indices by descending score; ties go to the lower index.
pub fn rank_ties(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| descending(scores[a], scores[b]).then(a.cmp(&b)));
    order
}

fn descending(a: f64, b: f64) -> Ordering {
    b.total_cmp(&a)
}

/// 1-based rank of `mate` under [`rank_ties`], without sorting.
pub fn mate_rank(scores: &[f64], mate: usize) -> usize {
    let s = scores[mate];
    1 + scores
        .iter()
        .enumerate()
        .filter(|&(i, &v)| match descending(v, s) {
            Ordering::Less => true,
            Ordering::Equal => i < mate,
            Ordering::Greater => false,
        })
        .count()
}

pub fn average_precision(ranks: &[usize]) -> f64 {
    if ranks.is_empty() {
        return 0.0;
    }
    ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / ranks.len() as f64
}

/// `H_n / n`, the expected precision of a uniformly random ranking.
pub fn random_precision(n: usize) -> f64 {
    (1..=n).map(|r| 1.0 / r as f64).sum::<f64>() / n as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub model_tag: String,
    pub n_projections: usize,
    /// Mate ranks for queries from view A against candidates from view B.
    pub ranks_ab: Vec<usize>,
    pub ranks_ba: Vec<usize>,
    pub p_ab: f64,
    pub p_ba: f64,
    /// Mean reciprocal rank over the queries of both directions.
    pub average_precision: f64,
}

/// Ranks mates in both directions. Row `j` of `proj_a` and `proj_b` are the
/// projections of the `j`-th test pair.
pub fn mate_retrieval(proj_a: &DMatrix<f64>, proj_b: &DMatrix<f64>, model_tag: &str) -> Result<RetrievalReport> {
    if proj_a.shape() != proj_b.shape() {
        return Err(Error::DimensionMismatch(format!(
            "projections are {:?} and {:?}",
            proj_a.shape(),
            proj_b.shape()
        )));
    }
    let n = proj_a.nrows();
    if n == 0 {
        return Err(Error::EmptyCorpus);
    }
    let unit = |m: &DMatrix<f64>| {
        let mut m = m.clone();
        let mut zero = vec![false; m.nrows()];
        for (i, mut row) in m.row_iter_mut().enumerate() {
            let norm = row.norm();
            if norm > 0.0 {
                row /= norm;
            } else {
                zero[i] = true;
            }
        }
        (m, zero)
    };
    let (a, zero_a) = unit(proj_a);
    let (b, zero_b) = unit(proj_b);
    let mut sim = &a * b.transpose();
    for i in 0..n {
        for j in 0..n {
            if zero_a[i] || zero_b[j] {
                sim[(i, j)] = f64::NEG_INFINITY;
            }
        }
    }
    let ranks_ab: Vec<usize> = (0..n)
        .map(|j| mate_rank(sim.row(j).transpose().as_slice(), j))
        .collect();
    let ranks_ba: Vec<usize> = (0..n).map(|j| mate_rank(sim.column(j).as_slice(), j)).collect();
    let p_ab = average_precision(&ranks_ab);
    let p_ba = average_precision(&ranks_ba);
    Ok(RetrievalReport {
        model_tag: model_tag.to_string(),
        n_projections: proj_a.ncols(),
        average_precision: 0.5 * (p_ab + p_ba),
        ranks_ab,
        ranks_ba,
        p_ab,
        p_ba,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparsityReport {
    pub n_projections: usize,
    /// Features with a nonzero weight in any of the first `d` stages.
    pub words_used: usize,
    /// Training samples with a nonzero dual coefficient in any of the first `d` stages.
    pub docs_used: usize,
    pub n_features: usize,
    pub n_samples: usize,
}

/// Counts nonzero rows of the per-stage weights `W_raw` and `E_raw`.
pub fn sparsity_stats(basis: &DeflationBasis, d: usize) -> Result<SparsityReport> {
    if d == 0 || d > basis.n_stages() {
        return Err(Error::InvalidParameter(format!(
            "d = {d} must be in 1..={}",
            basis.n_stages()
        )));
    }
    Ok(SparsityReport {
        n_projections: d,
        words_used: nonzero_rows(&basis.w_raw, d),
        docs_used: nonzero_rows(&basis.e_raw, d),
        n_features: basis.w_raw.nrows(),
        n_samples: basis.e_raw.nrows(),
    })
}

pub fn nonzero_rows(m: &DMatrix<f64>, d: usize) -> usize {
    m.row_iter()
        .filter(|r| r.columns(0, d).iter().any(|v| v.abs() > NONZERO_TOL))
        .count()
}
