//! Sparse CCA between a primal view `X` (m × ℓ) and a dual view given by its
//! kernel `K` (ℓ × ℓ):
//!
//! ```text
//! minimize  ‖Xᵀw − Ke‖² + μ‖w‖₁ + γ Σ_{i≠k} |e_i|
//! s.t.      e_k = 1,  0 ≤ e_i ≤ 1
//! ```
//!
//! The solver alternates greedy coordinate sweeps over `w` and `e`. Only
//! coordinates whose Lagrange multipliers leave their feasible range
//! (`α⁻ ∉ [0, 2μ]` for `w`, `β < 0` for `e`), or that are already nonzero,
//! are visited. The penalties default to the mean absolute initial gradients.

mod kkt;
mod record;
mod sweep;

use std::collections::BTreeSet;

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gram_diag, kernel_sq_diag, DataMatrix, KernelMatrix};

pub use kkt::{kkt_residuals, KktReport};
pub use record::{SolutionRecord, SparseEntry};
pub use sweep::{NoopObserver, SweepObserver};
pub use sweep::SweepOutcome;
pub(crate) use sweep::{PrimalBlock, SweepLimits};

use sweep::DualBlock;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SccaParams {
    /// Index (0-based) of the pinned dual coefficient, `e_k = 1`.
    pub k: usize,
    pub mu: Option<f64>,
    pub gamma: Option<f64>,
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
    pub tol_objective: f64,
    pub tol_kkt: f64,
    /// Inner sweeps stop once no coordinate moves by more than this.
    pub tol_inner: f64,
}

impl Default for SccaParams {
    fn default() -> Self {
        Self {
            k: 0,
            mu: None,
            gamma: None,
            max_outer_iters: 500,
            max_inner_iters: 1000,
            tol_objective: 1e-8,
            tol_kkt: 1e-8,
            tol_inner: 1e-9,
        }
    }
}

impl SccaParams {
    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn validate(&self, n_samples: usize) -> Result<()> {
        if self.k >= n_samples {
            return Err(Error::InvalidParameter(format!(
                "k = {} out of range for {n_samples} samples",
                self.k
            )));
        }
        for (name, v) in [("mu", self.mu), ("gamma", self.gamma)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
                }
            }
        }
        if self.max_outer_iters == 0 || self.max_inner_iters == 0 {
            return Err(Error::InvalidParameter("iteration caps must be positive".into()));
        }
        for (name, v) in [
            ("tol_objective", self.tol_objective),
            ("tol_kkt", self.tol_kkt),
            ("tol_inner", self.tol_inner),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    pub(crate) fn inner_limits(&self) -> SweepLimits {
        SweepLimits {
            max_sweeps: self.max_inner_iters,
            tol_change: self.tol_inner,
        }
    }
}

/// Borrowed problem data plus the per-coordinate curvatures.
pub struct SccaProblem<'a> {
    x: &'a DataMatrix,
    kernel: &'a KernelMatrix,
    xt: DMatrix<f64>,
    row_sq: DVector<f64>,
    k_sq: DVector<f64>,
}

impl<'a> SccaProblem<'a> {
    pub fn new(x: &'a DataMatrix, kernel: &'a KernelMatrix) -> Result<Self> {
        if x.n_samples() != kernel.size() {
            return Err(Error::DimensionMismatch(format!(
                "X has {} samples but K is {}x{}",
                x.n_samples(),
                kernel.size(),
                kernel.size()
            )));
        }
        Ok(Self {
            x,
            kernel,
            xt: x.matrix().transpose(),
            row_sq: gram_diag(x.matrix()),
            k_sq: kernel_sq_diag(kernel.matrix()),
        })
    }

    pub fn n_features(&self) -> usize {
        self.x.n_features()
    }

    pub fn n_samples(&self) -> usize {
        self.kernel.size()
    }

    /// `Xᵀw − Ke`
    pub fn residual(&self, w: &DVector<f64>, e: &DVector<f64>) -> DVector<f64> {
        &self.xt * w - self.kernel.matrix() * e
    }

    fn primal_block(&self, mu: f64) -> PrimalBlock<'_> {
        PrimalBlock {
            xt: &self.xt,
            row_sq: &self.row_sq,
            mu,
        }
    }

    fn dual_block(&self, gamma: f64, pinned: usize) -> DualBlock<'_> {
        DualBlock {
            kernel: self.kernel.matrix(),
            k_sq: &self.k_sq,
            gamma,
            pinned,
        }
    }
}

/// `‖Xᵀw − Ke‖² + μ‖w‖₁ + γ Σ_{i≠k}|e_i|`
pub fn objective(
    w: &DVector<f64>,
    e: &DVector<f64>,
    x: &DataMatrix,
    kernel: &KernelMatrix,
    mu: f64,
    gamma: f64,
    k: usize,
) -> f64 {
    let r = x.matrix().tr_mul(w) - kernel.matrix() * e;
    penalized(&r, w, e, mu, gamma, k)
}

fn penalized(r: &DVector<f64>, w: &DVector<f64>, e: &DVector<f64>, mu: f64, gamma: f64, k: usize) -> f64 {
    let e_l1: f64 = e
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != k)
        .map(|(_, v)| v.abs())
        .sum();
    r.norm_squared() + mu * w.lp_norm(1) + gamma * e_l1
}

/// Penalties from the initial gradients: `μ = mean |2XKe|`, `γ = mean |2K²e|`.
pub fn auto_hyperparams(x: &DataMatrix, kernel: &KernelMatrix, e_init: &DVector<f64>) -> Result<(f64, f64)> {
    let ke = kernel.matrix() * e_init;
    let xke = x.matrix() * &ke;
    let kke = kernel.matrix() * &ke;
    let mu = 2.0 * xke.lp_norm(1) / x.n_features() as f64;
    let gamma = 2.0 * kke.lp_norm(1) / kernel.size() as f64;
    if !(mu > 0.0 && gamma > 0.0 && mu.is_finite() && gamma.is_finite()) {
        return Err(Error::DegenerateHyperparameters { mu, gamma });
    }
    Ok((mu, gamma))
}

/// `α⁻ = 2XKe − 2XXᵀw + μj` and the indices with `α_i < 0` or `α_i > 2μ`.
pub fn w_violation_set(
    x: &DataMatrix,
    kernel: &KernelMatrix,
    w: &DVector<f64>,
    e: &DVector<f64>,
    mu: f64,
) -> (DVector<f64>, Vec<usize>) {
    let r = x.matrix().tr_mul(w) - kernel.matrix() * e;
    let alpha = (x.matrix() * r).map(|g| mu - 2.0 * g);
    let violations = alpha_violations(&alpha, mu, 0.0);
    (alpha, violations)
}

/// `β = 2K²e − 2KXᵀw + γj` and the indices `i ≠ k` with `β_i < 0`.
pub fn e_violation_set(
    x: &DataMatrix,
    kernel: &KernelMatrix,
    w: &DVector<f64>,
    e: &DVector<f64>,
    gamma: f64,
    k: usize,
) -> (DVector<f64>, Vec<usize>) {
    let r = x.matrix().tr_mul(w) - kernel.matrix() * e;
    let beta = (kernel.matrix() * r).map(|h| gamma - 2.0 * h);
    let violations = beta_violations(&beta, k, 0.0);
    (beta, violations)
}

fn alpha_violations(alpha: &DVector<f64>, mu: f64, slack: f64) -> Vec<usize> {
    alpha
        .iter()
        .enumerate()
        .filter(|&(_, &a)| a < -slack || a > 2.0 * mu + slack)
        .map(|(i, _)| i)
        .collect()
}

fn beta_violations(beta: &DVector<f64>, k: usize, slack: f64) -> Vec<usize> {
    beta.iter()
        .enumerate()
        .filter(|&(i, &b)| i != k && b < -slack)
        .map(|(i, _)| i)
        .collect()
}

/// Working state of one solve. `alpha` stores `α⁻` only; `α⁺ = 2μ − α⁻`.
#[derive(Debug, Clone)]
pub struct SccaState {
    pub w: DVector<f64>,
    pub e: DVector<f64>,
    pub alpha: DVector<f64>,
    pub beta: DVector<f64>,
    pub mu: f64,
    pub gamma: f64,
    pub k: usize,
    /// Indices of `w` whose multiplier violates its bounds.
    pub w_violations: Vec<usize>,
    /// Indices of `e` (excluding `k`) whose multiplier is negative.
    pub e_violations: Vec<usize>,
    residual: DVector<f64>,
}

impl SccaState {
    /// `w = 0`, `e = unit vector at k`, penalties from `params` or automatic.
    pub fn init(problem: &SccaProblem<'_>, params: &SccaParams) -> Result<Self> {
        params.validate(problem.n_samples())?;
        let m = problem.n_features();
        let l = problem.n_samples();
        let w = DVector::zeros(m);
        let mut e = DVector::zeros(l);
        e[params.k] = 1.0;
        let (mu, gamma) = match (params.mu, params.gamma) {
            (Some(mu), Some(gamma)) => (mu, gamma),
            (mu_o, gamma_o) => {
                let (mu, gamma) = auto_hyperparams(problem.x, problem.kernel, &e)?;
                (mu_o.unwrap_or(mu), gamma_o.unwrap_or(gamma))
            }
        };
        let residual = problem.residual(&w, &e);
        let mut state = Self {
            w,
            e,
            alpha: DVector::zeros(m),
            beta: DVector::zeros(l),
            mu,
            gamma,
            k: params.k,
            w_violations: Vec::new(),
            e_violations: Vec::new(),
            residual,
        };
        state.refresh_primal(problem);
        state.refresh_dual(problem);
        Ok(state)
    }

    pub fn residual(&self) -> &DVector<f64> {
        &self.residual
    }

    pub fn objective(&self) -> f64 {
        penalized(&self.residual, &self.w, &self.e, self.mu, self.gamma, self.k)
    }

    /// Recomputes `α⁻` and the violation set `I`.
    pub fn refresh_primal(&mut self, problem: &SccaProblem<'_>) {
        self.alpha = (&problem.xt.tr_mul(&self.residual)).map(|g| self.mu - 2.0 * g);
        self.w_violations = alpha_violations(&self.alpha, self.mu, 0.0);
    }

    /// Recomputes `β` and the violation set `J`.
    pub fn refresh_dual(&mut self, problem: &SccaProblem<'_>) {
        self.beta = (problem.kernel.matrix() * &self.residual).map(|h| self.gamma - 2.0 * h);
        self.e_violations = beta_violations(&self.beta, self.k, 0.0);
    }

    fn resync(&mut self, problem: &SccaProblem<'_>) {
        self.residual = problem.residual(&self.w, &self.e);
    }
}

fn union_sorted(a: &[usize], support: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut set: BTreeSet<usize> = a.iter().copied().collect();
    set.extend(support);
    set.into_iter().collect()
}

fn skipped(diag: &DVector<f64>, active: &[usize], what: &str) {
    for &i in active {
        if diag[i] == 0.0 {
            warn!("skipping {what} coordinate {i}: zero curvature");
        }
    }
}

/// Converges `w` with `e` fixed: sweeps the violation set together with the
/// current support of `w`.
pub fn w_sweep(
    state: &mut SccaState,
    problem: &SccaProblem<'_>,
    params: &SccaParams,
    observer: &mut dyn SweepObserver,
) -> SweepOutcome {
    let support = state.w.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i);
    let active = union_sorted(&state.w_violations, support);
    skipped(&problem.row_sq, &state.w_violations, "primal");
    problem.primal_block(state.mu).sweep(
        &mut state.w,
        &mut state.alpha,
        &mut state.residual,
        &active,
        params.inner_limits(),
        observer,
    )
}

/// Converges `e` with `w` fixed over the violation set and the current
/// support of `e`; `e_k` stays pinned.
pub fn e_sweep(
    state: &mut SccaState,
    problem: &SccaProblem<'_>,
    params: &SccaParams,
    observer: &mut dyn SweepObserver,
) -> SweepOutcome {
    let k = state.k;
    let support = state
        .e
        .iter()
        .enumerate()
        .filter(|&(i, v)| i != k && *v != 0.0)
        .map(|(i, _)| i);
    let active = union_sorted(&state.e_violations, support);
    skipped(&problem.k_sq, &state.e_violations, "dual");
    problem.dual_block(state.gamma, k).sweep(
        &mut state.e,
        &mut state.beta,
        &mut state.residual,
        &active,
        params.inner_limits(),
        observer,
    )
}

/// The iterate before final renormalization (`e_k = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct SccaIterate {
    pub w: DVector<f64>,
    pub e: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SccaSolution {
    /// Renormalized so that `‖Xᵀw‖ = 1`.
    pub w: DVector<f64>,
    /// Renormalized so that `‖Ke‖ = 1`.
    pub e: DVector<f64>,
    pub iterate: SccaIterate,
    pub k: usize,
    pub mu: f64,
    pub gamma: f64,
    /// Objective at initialization followed by one value per outer iteration.
    pub objective_trace: Vec<f64>,
    pub n_outer: usize,
    pub converged: bool,
}

impl SccaSolution {
    /// Cosine between the projected views `Xᵀw` and `Ke`.
    pub fn correlation(&self, x: &DataMatrix, kernel: &KernelMatrix) -> f64 {
        let a = x.matrix().tr_mul(&self.w);
        let b = kernel.matrix() * &self.e;
        crate::linalg::cosine(a.as_slice(), b.as_slice()).unwrap_or(0.0)
    }
}

pub fn solve(x: &DataMatrix, kernel: &KernelMatrix, params: &SccaParams) -> Result<SccaSolution> {
    solve_observed(x, kernel, params, &mut NoopObserver)
}

pub fn solve_observed(
    x: &DataMatrix,
    kernel: &KernelMatrix,
    params: &SccaParams,
    observer: &mut dyn SweepObserver,
) -> Result<SccaSolution> {
    let problem = SccaProblem::new(x, kernel)?;
    let mut state = SccaState::init(&problem, params)?;
    let mut trace = vec![state.objective()];
    let mut converged = false;
    let mut n_outer = 0;

    for outer in 1..=params.max_outer_iters {
        n_outer = outer;
        w_sweep(&mut state, &problem, params, observer);
        state.refresh_dual(&problem);
        e_sweep(&mut state, &problem, params, observer);
        state.resync(&problem);
        state.refresh_primal(&problem);

        let value = state.objective();
        let previous = *trace.last().expect("trace starts non-empty");
        trace.push(value);
        let kkt = kkt::max_residual(&problem, &state.w, &state.e, &state.residual, state.mu, state.gamma, state.k);
        if alpha_violations(&state.alpha, state.mu, params.tol_kkt).is_empty()
            && relative_change(previous, value) < params.tol_objective
            && kkt <= params.tol_kkt
        {
            converged = true;
            break;
        }
    }

    let ke_norm = (kernel.matrix() * &state.e).norm();
    let xw_norm = x.matrix().tr_mul(&state.w).norm();
    if ke_norm == 0.0 {
        return Err(Error::CollapsedSolution("Ke is zero"));
    }
    if xw_norm == 0.0 {
        return Err(Error::CollapsedSolution("X'w is zero"));
    }
    Ok(SccaSolution {
        w: &state.w / xw_norm,
        e: &state.e / ke_norm,
        iterate: SccaIterate {
            w: state.w,
            e: state.e,
        },
        k: params.k,
        mu: state.mu,
        gamma: state.gamma,
        objective_trace: trace,
        n_outer,
        converged,
    })
}

fn relative_change(previous: f64, current: f64) -> f64 {
    let diff = (previous - current).abs();
    if diff == 0.0 {
        0.0
    } else {
        diff / previous.abs().max(current.abs())
    }
}

/// Result of the primal-only solve used for LASSO and for frozen `e`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalSolution {
    pub w: DVector<f64>,
    pub mu: f64,
    pub objective_trace: Vec<f64>,
    pub n_outer: usize,
    pub converged: bool,
    pub kkt_residual: f64,
}

/// `min_w ‖Xᵀw − y‖² + μ‖w‖₁` with the same sweep machinery as [`solve`],
/// minus the loops that adapt `e`.
pub(crate) fn fit_primal(
    x: &DataMatrix,
    target: &DVector<f64>,
    mu: f64,
    params: &SccaParams,
    observer: &mut dyn SweepObserver,
) -> Result<PrimalSolution> {
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
    let xt = x.matrix().transpose();
    let row_sq = gram_diag(x.matrix());
    let block = PrimalBlock { xt: &xt, row_sq: &row_sq, mu };
    let m = x.n_features();
    let mut w = DVector::zeros(m);
    let mut residual = -target.clone();
    let alpha_of = |r: &DVector<f64>| xt.tr_mul(r).map(|g| mu - 2.0 * g);
    let mut alpha = alpha_of(&residual);
    let value = |r: &DVector<f64>, w: &DVector<f64>| r.norm_squared() + mu * w.lp_norm(1);
    let mut trace = vec![value(&residual, &w)];
    let mut converged = false;
    let mut n_outer = 0;
    let mut kkt_residual = kkt::primal_max(&w, &alpha, mu);

    for outer in 1..=params.max_outer_iters {
        n_outer = outer;
        let violations = alpha_violations(&alpha, mu, 0.0);
        let support = w.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i);
        let active = union_sorted(&violations, support);
        skipped(&row_sq, &violations, "primal");
        block.sweep(&mut w, &mut alpha, &mut residual, &active, params.inner_limits(), observer);
        residual = &xt * &w - target;
        alpha = alpha_of(&residual);

        let current = value(&residual, &w);
        let previous = *trace.last().expect("trace starts non-empty");
        trace.push(current);
        kkt_residual = kkt::primal_max(&w, &alpha, mu);
        if alpha_violations(&alpha, mu, params.tol_kkt).is_empty()
            && relative_change(previous, current) < params.tol_objective
            && kkt_residual <= params.tol_kkt
        {
            converged = true;
            break;
        }
    }
    Ok(PrimalSolution {
        w,
        mu,
        objective_trace: trace,
        n_outer,
        converged,
        kkt_residual,
    })
}

/// Solves for `w` with `e` held fixed (target `Ke`), reusing the primal
/// sweeps of the full solver.
pub fn solve_fixed_e(
    x: &DataMatrix,
    kernel: &KernelMatrix,
    e: &DVector<f64>,
    mu: f64,
    params: &SccaParams,
) -> Result<PrimalSolution> {
    if e.len() != kernel.size() || x.n_samples() != kernel.size() {
        return Err(Error::DimensionMismatch("e, X and K disagree on the sample count".into()));
    }
    let target = kernel.matrix() * e;
    fit_primal(x, &target, mu, params, &mut NoopObserver)
}
