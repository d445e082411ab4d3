//! Multiple projection pairs by repeated solving and deflation.
//!
//! After stage `j` the primal data loses the direction of its score
//! `X_jᵀu_j` and the kernel is projected away from `τ_j = K_j²e_j`. The
//! effective directions map undeflated inputs straight to the stacked
//! scores: `W_eff = U(PᵀU)⁻¹` and `E_eff = B(TᵀKB)⁻¹`.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{condition_number, is_psd, symmetrize, DataMatrix, KernelMatrix};
use crate::scca::{self, SccaParams};

/// Largest accepted condition number of `PᵀU` and `TᵀKB`.
pub const MAX_BASIS_CONDITION: f64 = 1e12;

const DEGENERATE_REL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PrimalDeflation {
    pub x_next: DMatrix<f64>,
    pub u: DVector<f64>,
    pub p: DVector<f64>,
}

/// `u = XXᵀw`, `p = XXᵀu / (uᵀXXᵀu)` and `X' = (I − p uᵀ)X`, which removes
/// the score `Xᵀu` from every feature row so that `X'ᵀu = 0`.
pub fn deflate_primal(x: &DMatrix<f64>, w: &DVector<f64>) -> Result<PrimalDeflation> {
    if w.len() != x.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "w has length {}, X has {} features",
            w.len(),
            x.nrows()
        )));
    }
    let scale = x.norm() * x.norm() * w.norm();
    let u = x * x.tr_mul(w);
    if u.norm() <= DEGENERATE_REL * scale || u.norm() == 0.0 {
        return Err(Error::DegenerateDeflationDirection);
    }
    // s = Xᵀu is the score being removed
    let s = x.tr_mul(&u);
    let ss = s.norm_squared();
    if ss == 0.0 {
        return Err(Error::DegenerateDeflationDirection);
    }
    let p = (x * &s) / ss;
    let x_next = x - &p * s.transpose();
    Ok(PrimalDeflation { x_next, u, p })
}

/// `τ = K²e` and `K' = QKQ` with `Q = I − ττᵀ/τᵀτ`.
pub fn deflate_dual(kernel: &DMatrix<f64>, e: &DVector<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if e.len() != kernel.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "e has length {}, K is {}x{}",
            e.len(),
            kernel.nrows(),
            kernel.ncols()
        )));
    }
    let tau = kernel * (kernel * e);
    let tt = tau.norm_squared();
    let scale = kernel.norm() * kernel.norm() * e.norm();
    if tt == 0.0 || tau.norm() <= DEGENERATE_REL * scale {
        return Err(Error::DegenerateDualDeflation);
    }
    Ok((symmetrize(&project_out(kernel, &tau)), tau))
}

/// `QKQ` expanded as `K − (τvᵀ + vτᵀ)/τᵀτ + (τᵀv)ττᵀ/(τᵀτ)²` with `v = Kτ`.
fn project_out(kernel: &DMatrix<f64>, tau: &DVector<f64>) -> DMatrix<f64> {
    let tt = tau.norm_squared();
    let kt = kernel * tau;
    let c = tau.dot(&kt) / (tt * tt);
    kernel - (tau * kt.transpose() + &kt * tau.transpose()) / tt + (tau * tau.transpose()) * c
}

/// How the pinned index is chosen at each stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KSelection {
    /// Stage `j` (0-based) pins `k = j`.
    NumericalOrder,
    Explicit(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeflationOptions {
    pub k_selection: KSelection,
    /// With numerical order, try the following indices (wrapping around)
    /// when a stage collapses instead of failing.
    pub advance_on_collapse: bool,
}

impl Default for DeflationOptions {
    fn default() -> Self {
        Self {
            k_selection: KSelection::NumericalOrder,
            advance_on_collapse: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub k: usize,
    pub converged: bool,
    pub n_outer: usize,
    pub mu: f64,
    pub gamma: f64,
    /// `p_jᵀu_j`
    pub pu: f64,
    /// `‖X_{j+1}ᵀu_j‖`
    pub primal_orthogonality: f64,
    /// `‖K_{j+1}τ_j‖`
    pub dual_orthogonality: f64,
    /// Smallest eigenvalue of `K_{j+1}`.
    pub min_eigenvalue: f64,
    pub trace: f64,
    /// Largest asymmetry of `K_{j+1}` before symmetrization.
    pub asymmetry: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeflationBasis {
    pub w_raw: DMatrix<f64>,
    pub e_raw: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub p: DMatrix<f64>,
    /// Columns `τ_j`.
    pub t: DMatrix<f64>,
    /// Columns `K_j e_j`.
    pub b: DMatrix<f64>,
    pub w_eff: DMatrix<f64>,
    pub e_eff: DMatrix<f64>,
    pub stages: Vec<StageReport>,
    pub cond_pu: f64,
    pub cond_tkb: f64,
}

impl DeflationBasis {
    pub fn n_stages(&self) -> usize {
        self.stages.len()
    }

    pub fn ks(&self) -> Vec<usize> {
        self.stages.iter().map(|s| s.k).collect()
    }
}

/// Runs `d` stages of solve-and-deflate and assembles the effective
/// directions. `kernel` is the undeflated kernel used in `TᵀKB`.
pub fn run_sequence(
    x: &DataMatrix,
    kernel: &KernelMatrix,
    d: usize,
    params: &SccaParams,
    options: &DeflationOptions,
) -> Result<DeflationBasis> {
    let l = kernel.size();
    let m = x.n_features();
    if d == 0 || d > l {
        return Err(Error::InvalidParameter(format!("d = {d} must be in 1..={l}")));
    }
    if x.n_samples() != l {
        return Err(Error::DimensionMismatch("X and K disagree on the sample count".into()));
    }
    let mut xj = x.matrix().clone();
    let mut kj = kernel.matrix().clone();
    let mut cols: Vec<[DVector<f64>; 6]> = Vec::with_capacity(d);
    let mut stages = Vec::with_capacity(d);
    // numerical order: stage j starts at the index after the last one used
    let mut cursor = 0;

    for stage in 0..d {
        let mut tried = vec![false; l];
        let (sol, k) = loop {
            let k = match &options.k_selection {
                KSelection::Explicit(list) => *list.get(stage).ok_or_else(|| {
                    Error::InvalidParameter(format!("k list has {} entries, need {d}", list.len()))
                })?,
                KSelection::NumericalOrder => (0..l)
                    .map(|o| (cursor + o) % l)
                    .find(|&c| !tried[c])
                    .ok_or_else(|| Error::CollapsedSolution("every pinned index collapses").at_stage(stage))?,
            };
            if k >= l {
                return Err(Error::InvalidParameter(format!("k = {k} out of range")).at_stage(stage));
            }
            tried[k] = true;
            let xd = DataMatrix::new(xj.clone()).map_err(|e| e.at_stage(stage))?;
            let kd = KernelMatrix::new(kj.clone()).map_err(|e| e.at_stage(stage))?;
            match scca::solve(&xd, &kd, &params.clone().with_k(k)) {
                Ok(sol) => break (sol, k),
                Err(Error::CollapsedSolution(what))
                    if options.advance_on_collapse && options.k_selection == KSelection::NumericalOrder =>
                {
                    warn!("stage {stage}: k = {k} collapsed ({what}); trying next index");
                }
                Err(err) => return Err(err.at_stage(stage)),
            }
        };
        cursor = (k + 1) % l;
        if !sol.converged {
            warn!("stage {stage}: solver hit the iteration cap");
        }
        let w = sol.w.clone();
        let e = sol.e.clone();
        let bcol = &kj * &e;
        let primal = deflate_primal(&xj, &w).map_err(|err| err.at_stage(stage))?;
        let (k_next, tau) = deflate_dual(&kj, &e).map_err(|err| err.at_stage(stage))?;

        let unsym = project_out(&kj, &tau);
        let eig_min = nalgebra::SymmetricEigen::new(k_next.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        stages.push(StageReport {
            k,
            converged: sol.converged,
            n_outer: sol.n_outer,
            mu: sol.mu,
            gamma: sol.gamma,
            pu: primal.p.dot(&primal.u),
            primal_orthogonality: primal.x_next.tr_mul(&primal.u).norm(),
            dual_orthogonality: (&k_next * &tau).norm(),
            min_eigenvalue: eig_min,
            trace: k_next.trace(),
            asymmetry: (&unsym - unsym.transpose()).amax(),
        });
        cols.push([w, e, primal.u, primal.p, tau, bcol]);
        xj = primal.x_next;
        kj = k_next;
    }

    let stack = |idx: usize, rows: usize| {
        let mut out = DMatrix::zeros(rows, d);
        for (j, c) in cols.iter().enumerate() {
            out.set_column(j, &c[idx]);
        }
        out
    };
    let w_raw = stack(0, m);
    let e_raw = stack(1, l);
    let u = stack(2, m);
    let p = stack(3, m);
    let t = stack(4, l);
    let b = stack(5, l);

    let pu = p.tr_mul(&u);
    let cond_pu = condition_number(&pu);
    if !(cond_pu <= MAX_BASIS_CONDITION) {
        return Err(Error::NonInvertibleBasis(cond_pu));
    }
    let tkb = t.tr_mul(&(kernel.matrix() * &b));
    let cond_tkb = condition_number(&tkb);
    if !(cond_tkb <= MAX_BASIS_CONDITION) {
        return Err(Error::NonInvertibleBasis(cond_tkb));
    }
    let w_eff = &u * pu.try_inverse().ok_or(Error::NonInvertibleBasis(f64::INFINITY))?;
    let e_eff = &b * tkb.try_inverse().ok_or(Error::NonInvertibleBasis(f64::INFINITY))?;
    Ok(DeflationBasis {
        w_raw,
        e_raw,
        u,
        p,
        t,
        b,
        w_eff,
        e_eff,
        stages,
        cond_pu,
        cond_tkb,
    })
}

/// Checks a deflated kernel for symmetric PSD-ness within `rel_tol · trace`.
pub fn deflated_kernel_ok(k: &DMatrix<f64>, rel_tol: f64) -> bool {
    is_psd(k, rel_tol)
}
