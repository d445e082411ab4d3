//! Flat JSON record of a solution with sparse vectors.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::SccaSolution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparseEntry {
    pub index: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub k: usize,
    pub mu: f64,
    pub gamma: f64,
    pub n_features: usize,
    pub n_samples: usize,
    pub w: Vec<SparseEntry>,
    pub e: Vec<SparseEntry>,
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

fn sparse(v: &DVector<f64>) -> Vec<SparseEntry> {
    v.iter()
        .enumerate()
        .filter(|(_, x)| **x != 0.0)
        .map(|(index, &value)| SparseEntry { index, value })
        .collect()
}

fn dense(entries: &[SparseEntry], len: usize) -> DVector<f64> {
    let mut v = DVector::zeros(len);
    for s in entries {
        v[s.index] = s.value;
    }
    v
}

impl SolutionRecord {
    pub fn w_dense(&self) -> DVector<f64> {
        dense(&self.w, self.n_features)
    }

    pub fn e_dense(&self) -> DVector<f64> {
        dense(&self.e, self.n_samples)
    }
}

impl From<&SccaSolution> for SolutionRecord {
    fn from(s: &SccaSolution) -> Self {
        Self {
            k: s.k,
            mu: s.mu,
            gamma: s.gamma,
            n_features: s.w.len(),
            n_samples: s.e.len(),
            w: sparse(&s.w),
            e: sparse(&s.e),
            objective_trace: s.objective_trace.clone(),
            converged: s.converged,
        }
    }
}
