//! The primal-only reduction `min_w ‖Xᵀw − t‖² + μ‖w‖₁` and the
//! leave-one-out document generation experiment built on it.
//!
//! A held-out query is compared with the training documents of its own
//! language; the resulting similarity profile `t` is then reproduced as a
//! sparse combination of the other language's features. The number of
//! selected features, divided by the size of the true translation, is the
//! selection ratio.

use log::debug;
use nalgebra::{DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{apply_preprocessing, fit_view, Document, PreprocessOptions, RawPairedCorpus, View};
use crate::error::{Error, Result};
use crate::eval::NONZERO_TOL;
use crate::linalg::{linear_kernel, DataMatrix};
use crate::scca::{fit_primal, NoopObserver, PrimalSolution, SccaParams};

/// Relative threshold for counting nonzeros of the unpenalized solution.
pub const DENSE_NONZERO_REL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LassoProblem {
    pub x: DataMatrix,
    pub target: DVector<f64>,
    pub mu: f64,
}

impl LassoProblem {
    pub fn new(x: DataMatrix, target: DVector<f64>, mu: f64) -> Result<Self> {
        if target.len() != x.n_samples() {
            return Err(Error::DimensionMismatch(format!(
                "target has length {}, X has {} samples",
                target.len(),
                x.n_samples()
            )));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
        }
        Ok(Self { x, target, mu })
    }

    pub fn objective(&self, w: &DVector<f64>) -> f64 {
        (self.x.matrix().tr_mul(w) - &self.target).norm_squared() + self.mu * w.lp_norm(1)
    }
}

/// The automatic penalty with `Ke` replaced by the target: `mean |2Xt|`.
pub fn auto_mu(x: &DataMatrix, target: &DVector<f64>) -> f64 {
    2.0 * (x.matrix() * target).lp_norm(1) / x.n_features() as f64
}

pub fn solve_lasso(problem: &LassoProblem, params: &SccaParams) -> Result<PrimalSolution> {
    fit_primal(&problem.x, &problem.target, problem.mu, params, &mut NoopObserver)
}

/// Minimum-norm least squares `w = X K⁺ t` with `K = XᵀX`.
pub fn min_norm_least_squares(x: &DataMatrix, target: &DVector<f64>) -> DVector<f64> {
    let k = linear_kernel(x);
    let eig = SymmetricEigen::new(k.matrix().clone());
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let mut coef = DVector::zeros(target.len());
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > 1e-12 * top {
            let v = eig.eigenvectors.column(i);
            coef += v * (v.dot(target) / lambda);
        }
    }
    x.matrix() * coef
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "value")]
pub enum MuChoice {
    Auto,
    Fixed(f64),
    /// Unpenalized minimum-norm least squares.
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedDocument {
    pub w: DVector<f64>,
    /// `NaN` for the unpenalized solution.
    pub mu: f64,
    pub selected_count: usize,
    pub target_count: usize,
    pub selection_ratio: f64,
    pub converged: bool,
}

/// Builds a document in the language of `x_other` that reproduces the
/// query's similarities `x_sameᵀ q` to the training set.
pub fn generate_document(
    query: &DVector<f64>,
    x_same: &DataMatrix,
    x_other: &DataMatrix,
    target_count: usize,
    mu: MuChoice,
    params: &SccaParams,
) -> Result<GeneratedDocument> {
    if target_count == 0 {
        return Err(Error::EmptyReferenceDocument);
    }
    if query.len() != x_same.n_features() || x_same.n_samples() != x_other.n_samples() {
        return Err(Error::DimensionMismatch("query and training views disagree".into()));
    }
    let target = x_same.matrix().tr_mul(query);
    let (w, mu, selected, converged) = match mu {
        MuChoice::None => {
            let w = min_norm_least_squares(x_other, &target);
            let cut = DENSE_NONZERO_REL * w.amax();
            let selected = w.iter().filter(|v| v.abs() > cut).count();
            (w, f64::NAN, selected, true)
        }
        MuChoice::Auto | MuChoice::Fixed(_) => {
            let mu = match mu {
                MuChoice::Fixed(v) => v,
                _ => auto_mu(x_other, &target),
            };
            if mu == 0.0 {
                // zero target: nothing to reproduce
                (DVector::zeros(x_other.n_features()), 0.0, 0, true)
            } else {
                let problem = LassoProblem::new(x_other.clone(), target, mu)?;
                let sol = solve_lasso(&problem, params)?;
                let selected = sol.w.iter().filter(|v| v.abs() > NONZERO_TOL).count();
                (sol.w, mu, selected, sol.converged)
            }
        }
    };
    Ok(GeneratedDocument {
        w,
        mu,
        selected_count: selected,
        target_count,
        selection_ratio: selected as f64 / target_count as f64,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum SelectionMode {
    Auto,
    Sweep(Vec<f64>),
    None,
}

impl SelectionMode {
    pub fn name(&self) -> &'static str {
        match self {
            SelectionMode::Auto => "auto",
            SelectionMode::Sweep(_) => "sweep",
            SelectionMode::None => "none",
        }
    }

    fn choices(&self) -> Vec<MuChoice> {
        match self {
            SelectionMode::Auto => vec![MuChoice::Auto],
            SelectionMode::Sweep(grid) => grid.iter().map(|&m| MuChoice::Fixed(m)).collect(),
            SelectionMode::None => vec![MuChoice::None],
        }
    }
}

/// `start, start + step, …` up to and including `end` (with round-off slack).
pub fn mu_grid(start: f64, step: f64, end: f64) -> Result<Vec<f64>> {
    if !(start > 0.0 && step > 0.0 && end >= start) {
        return Err(Error::InvalidParameter("mu grid needs 0 < start <= end and step > 0".into()));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| start + step * i as f64).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub doc_id: usize,
    pub mu: f64,
    pub selected_count: usize,
    pub target_count: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub mode: String,
    /// `NaN` for the unpenalized mode and for automatic penalties.
    pub mu: f64,
    pub n_docs: usize,
    pub mean_ratio: f64,
    pub std_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionTable {
    pub mode: String,
    pub rows: Vec<SelectionRow>,
    pub summary: Vec<SelectionSummary>,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Nonzero TFIDF entries of a document under the training idf, before
/// centering.
fn raw_count(doc: &Document, fitted_terms: &[usize], idf: &[f64]) -> usize {
    fitted_terms
        .iter()
        .zip(idf)
        .filter(|&(t, &w)| w != 0.0 && doc.get(t).is_some_and(|&c| c > 0))
        .count()
}

/// Leave-one-out over the first `n_docs` pairs (all when `None`). Queries
/// come from view A and documents are generated in view B.
pub fn selection_ratio_experiment(
    corpus: &RawPairedCorpus,
    options: PreprocessOptions,
    mode: &SelectionMode,
    params: &SccaParams,
    n_docs: Option<usize>,
) -> Result<SelectionTable> {
    let n = corpus.len();
    if n < 2 {
        return Err(Error::LeaveOneOutTooSmall);
    }
    let held_out: Vec<usize> = (0..n_docs.unwrap_or(n).min(n)).collect();
    let choices = mode.choices();
    let per_doc: Vec<Vec<SelectionRow>> = held_out
        .par_iter()
        .map(|&j| {
            let train: Vec<usize> = (0..n).filter(|&i| i != j).collect();
            let fa = fit_view(&corpus.select(View::A, &train), corpus.vocab(View::A).len(), options)?;
            let fb = fit_view(&corpus.select(View::B, &train), corpus.vocab(View::B).len(), options)?;
            let query_doc = corpus.select(View::A, &[j]);
            let q = apply_preprocessing(&query_doc, &fa)?;
            let q = q.matrix().column(0).into_owned();
            let mate = &corpus.docs(View::B)[j];
            let target_count = raw_count(mate, &fb.feature_terms, &fb.idf);
            choices
                .iter()
                .map(|&mu| {
                    let g = generate_document(&q, &fa.matrix, &fb.matrix, target_count, mu, params)?;
                    debug!("doc {j}: mu {} selected {}", g.mu, g.selected_count);
                    Ok(SelectionRow {
                        doc_id: j,
                        mu: g.mu,
                        selected_count: g.selected_count,
                        target_count,
                        ratio: g.selection_ratio,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let summary = (0..choices.len())
        .map(|c| {
            let ratios: Vec<f64> = per_doc.iter().map(|rows| rows[c].ratio).collect();
            let (mean_ratio, std_ratio) = mean_std(&ratios);
            SelectionSummary {
                mode: mode.name().to_string(),
                mu: match choices[c] {
                    MuChoice::Fixed(v) => v,
                    _ => f64::NAN,
                },
                n_docs: ratios.len(),
                mean_ratio,
                std_ratio,
            }
        })
        .collect();
    Ok(SelectionTable {
        mode: mode.name().to_string(),
        rows: per_doc.into_iter().flatten().collect(),
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn zero_target_gives_zero_weights() {
        let x = DataMatrix::new(random(6, 10, 1)).unwrap();
        let p = LassoProblem::new(x, DVector::zeros(10), 0.1).unwrap();
        let sol = solve_lasso(&p, &SccaParams::default()).unwrap();
        assert!(sol.w.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn orthonormal_design_is_soft_threshold() {
        // rows of X orthonormal: w_i = S(2 x_iᵀt, μ) / 2
        let q = random(8, 8, 2).qr().q();
        let x = DataMatrix::new(q.rows(0, 4).into_owned()).unwrap();
        let t = DVector::from_column_slice(random(8, 1, 3).as_slice());
        let mu = 0.3;
        let sol = solve_lasso(&LassoProblem::new(x.clone(), t.clone(), mu).unwrap(), &SccaParams::default()).unwrap();
        let c = x.matrix() * &t;
        for i in 0..4 {
            let z = 2.0 * c[i];
            let expected = z.signum() * (z.abs() - mu).max(0.0) / 2.0;
            assert!((sol.w[i] - expected).abs() < 1e-8);
        }
    }

    #[test]
    fn grid_spacing() {
        let g = mu_grid(0.001, 0.001, 1.0).unwrap();
        assert_eq!(g.len(), 1000);
        assert!((g[999] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn min_norm_solution_fits_target() {
        let x = DataMatrix::new(random(12, 5, 4)).unwrap();
        let t = DVector::from_column_slice(random(5, 1, 5).as_slice());
        let w = min_norm_least_squares(&x, &t);
        assert!((x.matrix().tr_mul(&w) - t).norm() < 1e-10);
    }

    #[test]
    fn single_pair_corpus_is_rejected() {
        let doc: Document = [(0, 1)].into_iter().collect();
        let c = RawPairedCorpus::new(vec![doc.clone()], vec![doc], vec!["a".into()], vec!["b".into()]).unwrap();
        assert!(matches!(
            selection_ratio_experiment(&c, PreprocessOptions::default(), &SelectionMode::Auto, &SccaParams::default(), None),
            Err(Error::LeaveOneOutTooSmall)
        ));
    }

    #[test]
    fn empty_mate_is_rejected() {
        let x = DataMatrix::new(random(3, 4, 6)).unwrap();
        let q = DVector::zeros(3);
        assert!(matches!(
            generate_document(&q, &x, &x, 0, MuChoice::Auto, &SccaParams::default()),
            Err(Error::EmptyReferenceDocument)
        ));
    }
}
