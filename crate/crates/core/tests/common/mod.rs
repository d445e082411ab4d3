//! Instance generators and reference solvers shared by the integration
//! tests. The references are written directly from the textbook
//! definitions and share no code with the library.

#![allow(dead_code)]

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scca_core::linalg::{linear_kernel, DataMatrix, KernelMatrix};
use scca_core::scca::SweepObserver;

pub fn uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Two views sharing two latent factors plus 10% noise.
pub fn correlated(m: usize, l: usize, seed: u64) -> (DataMatrix, KernelMatrix) {
    latent(m, l, 2, seed)
}

/// Two views sharing `rank` latent factors plus 10% noise.
pub fn latent(m: usize, l: usize, rank: usize, seed: u64) -> (DataMatrix, KernelMatrix) {
    let mut r = rng(seed);
    let z = uniform(rank, l, &mut r);
    let x = uniform(m, rank, &mut r) * &z + uniform(m, l, &mut r) * 0.1;
    let xb = uniform(m + 2, rank, &mut r) * &z + uniform(m + 2, l, &mut r) * 0.1;
    (
        DataMatrix::new(x).unwrap(),
        linear_kernel(&DataMatrix::new(xb).unwrap()),
    )
}

/// Full-rank instance in which `Xᵀw = Ke*` is attainable with a feasible
/// `e*` (non-negative, `e*_k = 1`), so the best correlation over the
/// constraint set equals the unconstrained one.
pub fn planted(m: usize, l: usize, k: usize, seed: u64) -> (DataMatrix, KernelMatrix) {
    let mut r = rng(seed);
    let xb = uniform(l + 2, l, &mut r);
    let kernel = xb.tr_mul(&xb);
    let mut e = DVector::from_fn(l, |_, _| r.random_range(0.0..1.0));
    e[k] = 1.0;
    let target = &kernel * &e;
    let mut x = uniform(m, l, &mut r);
    x.set_row(0, &target.transpose());
    (DataMatrix::new(x).unwrap(), KernelMatrix::new(kernel).unwrap())
}

/// Cyclic coordinate descent for `min ‖Aw − y‖² + μ‖w‖₁`.
pub fn l1_coordinate_descent(a: &DMatrix<f64>, y: &DVector<f64>, mu: f64) -> DVector<f64> {
    let n = a.ncols();
    let mut w = DVector::zeros(n);
    let col_sq: Vec<f64> = (0..n).map(|j| a.column(j).norm_squared()).collect();
    for _ in 0..200_000 {
        let mut delta: f64 = 0.0;
        for j in 0..n {
            if col_sq[j] == 0.0 {
                continue;
            }
            let r = y - a * &w;
            let rho = a.column(j).dot(&r) + col_sq[j] * w[j];
            let new = soft_threshold(2.0 * rho, mu) / (2.0 * col_sq[j]);
            delta = delta.max((new - w[j]).abs());
            w[j] = new;
        }
        if delta < 1e-15 {
            break;
        }
    }
    w
}

pub fn soft_threshold(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

fn inverse_cholesky_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let chol = m.clone().cholesky().expect("positive definite block");
    chol.l().try_inverse().expect("invertible factor")
}

/// Largest `ρ` of `max aᵀCab b` s.t. `aᵀCaa a = bᵀCbb b = 1`, through
/// Cholesky whitening of both blocks.
pub fn generalized_rho_max(caa: &DMatrix<f64>, cab: &DMatrix<f64>, cbb: &DMatrix<f64>) -> f64 {
    let la = inverse_cholesky_factor(caa);
    let lb = inverse_cholesky_factor(cbb);
    let m = &la * cab * lb.transpose();
    m.singular_values().max()
}

/// Primal-dual CCA between `Xᵀw` and `Ke`: blocks `XXᵀ`, `XK`, `K²`.
pub fn primal_dual_rho_max(x: &DMatrix<f64>, k: &DMatrix<f64>) -> f64 {
    generalized_rho_max(&(x * x.transpose()), &(x * k), &(k * k))
}

/// Canonical correlations of ridge-regularized linear CCA on
/// feature-by-sample data: blocks `XaXaᵀ + cI`, `XaXbᵀ`, `XbXbᵀ + cI`.
pub fn regularized_linear_cca(xa: &DMatrix<f64>, xb: &DMatrix<f64>, c: f64) -> Vec<f64> {
    let caa = xa * xa.transpose() + DMatrix::identity(xa.nrows(), xa.nrows()) * c;
    let cbb = xb * xb.transpose() + DMatrix::identity(xb.nrows(), xb.nrows()) * c;
    let la = inverse_cholesky_factor(&caa);
    let lb = inverse_cholesky_factor(&cbb);
    let mut s: Vec<f64> = (&la * xa * xb.transpose() * lb.transpose())
        .singular_values()
        .iter()
        .copied()
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Records every coordinate update the solver makes.
#[derive(Default)]
pub struct StepLog {
    pub primal_steps: usize,
    pub dual_steps: usize,
    pub sign_crossings: usize,
    pub box_violations: usize,
    /// Dual coordinates that were updated at least once.
    pub dual_touched: BTreeSet<usize>,
}

impl SweepObserver for StepLog {
    fn primal_step(&mut self, _index: usize, before: f64, after: f64) {
        self.primal_steps += 1;
        if before * after < 0.0 {
            self.sign_crossings += 1;
        }
    }

    fn dual_step(&mut self, index: usize, _before: f64, after: f64) {
        self.dual_steps += 1;
        self.dual_touched.insert(index);
        if !(0.0..=1.0).contains(&after) {
            self.box_violations += 1;
        }
    }
}

/// Non-increasing within `rel` of the running value.
pub fn monotone(trace: &[f64], rel: f64) -> bool {
    trace
        .windows(2)
        .all(|w| w[1] <= w[0] + rel * w[0].abs().max(f64::MIN_POSITIVE))
}

/// Mean reciprocal rank of a uniformly shuffled list, by simulation.
pub fn simulated_random_mrr(n: usize, trials: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut order: Vec<usize> = (0..n).collect();
    let total: f64 = (0..trials)
        .map(|_| {
            order.shuffle(&mut r);
            let rank = order.iter().position(|&i| i == 0).unwrap() + 1;
            1.0 / rank as f64
        })
        .sum();
    total / trials as f64
}
