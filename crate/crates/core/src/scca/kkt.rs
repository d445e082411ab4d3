//! Stationarity residuals of the penalized objective, evaluated on the
//! iterate before renormalization.

use nalgebra::DVector;

use super::{SccaProblem, SccaSolution};
use crate::error::Result;
use crate::linalg::{DataMatrix, KernelMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    /// Per-feature residual of the `w` conditions.
    pub primal: DVector<f64>,
    /// Per-sample residual of the `e` conditions; zero at the pinned index.
    pub dual: DVector<f64>,
    pub max_primal: f64,
    pub max_dual: f64,
    pub max: f64,
    /// `α⁻ = μ − 2X(Xᵀw − Ke)`.
    pub alpha: DVector<f64>,
    /// `β = γ − 2K(Xᵀw − Ke)`.
    pub beta: DVector<f64>,
    /// Largest amount by which some `α_i` leaves `[0, 2μ]`.
    pub alpha_excess: f64,
    /// Largest `−β_i` over `i ≠ k`, floored at zero.
    pub beta_deficit: f64,
    /// `‖2XKe‖_∞`, a natural scale for the residuals.
    pub gradient_scale: f64,
}

fn primal_residual(w: f64, alpha: f64, mu: f64) -> f64 {
    // smooth gradient g = μ − α
    let g = mu - alpha;
    if w > 0.0 {
        (g + mu).abs()
    } else if w < 0.0 {
        (g - mu).abs()
    } else {
        (g.abs() - mu).max(0.0)
    }
}

fn dual_residual(e: f64, beta: f64) -> f64 {
    if e <= 0.0 {
        (-beta).max(0.0)
    } else if e >= 1.0 {
        beta.max(0.0)
    } else {
        beta.abs()
    }
}

pub(crate) fn primal_max(w: &DVector<f64>, alpha: &DVector<f64>, mu: f64) -> f64 {
    w.iter()
        .zip(alpha.iter())
        .map(|(&w, &a)| primal_residual(w, a, mu))
        .fold(0.0, f64::max)
}

pub(crate) fn max_residual(
    problem: &SccaProblem<'_>,
    w: &DVector<f64>,
    e: &DVector<f64>,
    residual: &DVector<f64>,
    mu: f64,
    gamma: f64,
    k: usize,
) -> f64 {
    let alpha = problem.xt.tr_mul(residual).map(|g| mu - 2.0 * g);
    let beta = (problem.kernel.matrix() * residual).map(|h| gamma - 2.0 * h);
    let dual = (0..e.len())
        .filter(|&i| i != k)
        .map(|i| dual_residual(e[i], beta[i]))
        .fold(0.0, f64::max);
    primal_max(w, &alpha, mu).max(dual)
}

pub fn kkt_residuals(solution: &SccaSolution, x: &DataMatrix, kernel: &KernelMatrix) -> Result<KktReport> {
    let problem = SccaProblem::new(x, kernel)?;
    let (w, e) = (&solution.iterate.w, &solution.iterate.e);
    let (mu, gamma, k) = (solution.mu, solution.gamma, solution.k);
    let r = problem.residual(w, e);
    let alpha = problem.xt.tr_mul(&r).map(|g| mu - 2.0 * g);
    let beta = (kernel.matrix() * &r).map(|h| gamma - 2.0 * h);

    let primal = DVector::from_iterator(w.len(), w.iter().zip(alpha.iter()).map(|(&w, &a)| primal_residual(w, a, mu)));
    let dual = DVector::from_iterator(
        e.len(),
        (0..e.len()).map(|i| if i == k { 0.0 } else { dual_residual(e[i], beta[i]) }),
    );
    let max_primal = primal.amax();
    let max_dual = dual.amax();
    let alpha_excess = alpha
        .iter()
        .map(|&a| (-a).max(a - 2.0 * mu).max(0.0))
        .fold(0.0, f64::max);
    let beta_deficit = (0..e.len())
        .filter(|&i| i != k)
        .map(|i| (-beta[i]).max(0.0))
        .fold(0.0, f64::max);
    let gradient_scale = 2.0 * (x.matrix() * (kernel.matrix() * e)).amax();
    Ok(KktReport {
        primal,
        dual,
        max_primal,
        max_dual,
        max: max_primal.max(max_dual),
        alpha,
        beta,
        alpha_excess,
        beta_deficit,
        gradient_scale,
    })
}
