//! Coordinate sweeps over the primal weights `w` and the dual coefficients `e`.
//!
//! Both sweeps keep the residual `r = Xᵀw − Ke` current so a coordinate
//! update costs O(ℓ): the primal gradient is `2(X r)_i` and the dual one is
//! `−2(K r)_i`.

use nalgebra::{DMatrix, DVector};

/// Hook for instrumenting individual coordinate updates.
pub trait SweepObserver {
    fn primal_step(&mut self, _index: usize, _before: f64, _after: f64) {}
    fn dual_step(&mut self, _index: usize, _before: f64, _after: f64) {}
}

#[derive(Debug, Default, Clone, Copy)]
pub struct NoopObserver;

impl SweepObserver for NoopObserver {}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SweepLimits {
    pub max_sweeps: usize,
    pub tol_change: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepOutcome {
    pub sweeps: usize,
    pub converged: bool,
}

/// Primal block: `xt` is `Xᵀ` (ℓ × m) so each feature is a contiguous column.
pub(crate) struct PrimalBlock<'a> {
    pub xt: &'a DMatrix<f64>,
    pub row_sq: &'a DVector<f64>,
    pub mu: f64,
}

impl PrimalBlock<'_> {
    /// `α⁻_i = 2(XKe)_i − 2(XXᵀw)_i + μ`, written through the residual.
    pub fn alpha_at(&self, i: usize, residual: &DVector<f64>) -> f64 {
        self.mu - 2.0 * self.xt.column(i).dot(residual)
    }

    /// Repeated passes over `active` (ascending) until the largest change in a
    /// pass falls below the tolerance. Each update is the exact minimizer of
    /// the objective along the coordinate on the current sign branch, stopped
    /// at zero if it would cross.
    pub fn sweep(
        &self,
        w: &mut DVector<f64>,
        alpha: &mut DVector<f64>,
        residual: &mut DVector<f64>,
        active: &[usize],
        limits: SweepLimits,
        observer: &mut dyn SweepObserver,
    ) -> SweepOutcome {
        let mu = self.mu;
        for sweep in 1..=limits.max_sweeps {
            let mut max_change = 0.0f64;
            for &i in active {
                let diag = self.row_sq[i];
                if diag == 0.0 {
                    continue;
                }
                let a = self.alpha_at(i, residual);
                // 2XKe − 2XXᵀw at coordinate i
                let descent = a - mu;
                let current = w[i];
                let proposal = if a > 2.0 * mu {
                    alpha[i] = 2.0 * mu;
                    current + (descent - alpha[i] + mu) / (2.0 * diag)
                } else if a < 0.0 {
                    alpha[i] = 0.0;
                    current + (descent - alpha[i] + mu) / (2.0 * diag)
                } else {
                    alpha[i] = a;
                    if current > 0.0 {
                        current - (2.0 * mu - a) / (2.0 * diag)
                    } else if current < 0.0 {
                        current + a / (2.0 * diag)
                    } else {
                        current
                    }
                };
                let next = if current * proposal < 0.0 { 0.0 } else { proposal };
                observer.primal_step(i, current, next);
                let delta = next - current;
                if delta != 0.0 {
                    w[i] = next;
                    residual.axpy(delta, &self.xt.column(i), 1.0);
                    max_change = max_change.max(delta.abs());
                }
            }
            if max_change < limits.tol_change {
                return SweepOutcome {
                    sweeps: sweep,
                    converged: true,
                };
            }
        }
        SweepOutcome {
            sweeps: limits.max_sweeps,
            converged: false,
        }
    }
}

pub(crate) struct DualBlock<'a> {
    pub kernel: &'a DMatrix<f64>,
    pub k_sq: &'a DVector<f64>,
    pub gamma: f64,
    pub pinned: usize,
}

impl DualBlock<'_> {
    /// `β_i = 2(K²e)_i − 2(KXᵀw)_i + γ`.
    pub fn beta_at(&self, i: usize, residual: &DVector<f64>) -> f64 {
        self.gamma - 2.0 * self.kernel.column(i).dot(residual)
    }

    /// Exact coordinate minimization of the objective in `e_i`, clamped to
    /// `[0, 1]`. The pinned index is never touched.
    pub fn sweep(
        &self,
        e: &mut DVector<f64>,
        beta: &mut DVector<f64>,
        residual: &mut DVector<f64>,
        active: &[usize],
        limits: SweepLimits,
        observer: &mut dyn SweepObserver,
    ) -> SweepOutcome {
        for sweep in 1..=limits.max_sweeps {
            let mut max_change = 0.0f64;
            for &i in active {
                if i == self.pinned {
                    continue;
                }
                let q = self.k_sq[i];
                if q == 0.0 {
                    continue;
                }
                let b = self.beta_at(i, residual);
                beta[i] = b;
                let current = e[i];
                let next = (current - b / (2.0 * q)).clamp(0.0, 1.0);
                observer.dual_step(i, current, next);
                let delta = next - current;
                if delta != 0.0 {
                    e[i] = next;
                    residual.axpy(-delta, &self.kernel.column(i), 1.0);
                    max_change = max_change.max(delta.abs());
                }
            }
            if max_change < limits.tol_change {
                return SweepOutcome {
                    sweeps: sweep,
                    converged: true,
                };
            }
        }
        SweepOutcome {
            sweeps: limits.max_sweeps,
            converged: false,
        }
    }
}
