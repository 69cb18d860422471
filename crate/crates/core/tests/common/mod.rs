//! Independent reference implementations. These use explicit inverses and
//! LU determinants on the full N×N forms, so they share no code path with
//! the library's Cholesky-based n-dimensional evaluation.
#![allow(dead_code)]

use kernreg::linalg::SymMatrix;
use kernreg::problem::{sample_problem, GenConfig, RegressionProblem, Theta0Mode};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| r.sample::<f64, _>(StandardNormal))
}

pub fn gaussian_vector(r: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| r.sample::<f64, _>(StandardNormal))
}

/// `GGᵀ + shift·I` with Gaussian `G`.
pub fn random_spd(r: &mut ChaCha8Rng, n: usize, shift: f64) -> DMatrix<f64> {
    let g = gaussian_matrix(r, n, n);
    &g * g.transpose() + DMatrix::identity(n, n) * shift
}

pub fn sym(a: DMatrix<f64>) -> SymMatrix {
    SymMatrix::new((&a + a.transpose()) * 0.5).unwrap()
}

pub fn inv(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.clone().try_inverse().expect("invertible")
}

pub fn log_det(a: &DMatrix<f64>) -> f64 {
    let d = a.clone().lu().determinant();
    assert!(d > 0.0, "determinant {d}");
    d.ln()
}

pub fn problem(n: usize, big_n: usize, cond: f64, seed: u64) -> RegressionProblem {
    sample_problem(&GenConfig {
        n,
        sample_size: big_n,
        cond_target: cond,
        lambda1: 1.0,
        snr_target: 5.0,
        seed,
        theta0_mode: Theta0Mode::UnitGaussian,
    })
    .unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

pub fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
    assert!(
        (a - b).abs() <= tol * (1.0 + b.abs()),
        "{what}: {a} vs {b} (tol {tol})"
    );
}

pub struct Dense {
    pub phi: DMatrix<f64>,
    pub y: DVector<f64>,
    pub theta0: DVector<f64>,
    pub s2: f64,
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub q_inv: DMatrix<f64>,
}

impl Dense {
    pub fn new(problem: &RegressionProblem, p: &SymMatrix) -> Self {
        let phi = problem.phi().clone();
        let big_n = phi.nrows();
        let s2 = problem.sigma2();
        let p = p.as_matrix().clone();
        let q = &phi * &p * phi.transpose() + DMatrix::identity(big_n, big_n) * s2;
        let q_inv = inv(&q);
        Self { phi, y: problem.y().clone(), theta0: problem.theta0().clone(), s2, p, q, q_inv }
    }

    /// `PΦᵀQ⁻¹Y`.
    pub fn theta_hat(&self) -> DVector<f64> {
        &self.p * self.phi.transpose() * &self.q_inv * &self.y
    }

    pub fn eb(&self) -> f64 {
        self.y.dot(&(&self.q_inv * &self.y)) + log_det(&self.q)
    }

    pub fn sure_y(&self) -> f64 {
        let resid = (&self.y - &self.phi * self.theta_hat()).norm_squared();
        let h = &self.phi * &self.p * self.phi.transpose() * &self.q_inv;
        resid + 2.0 * self.s2 * h.trace()
    }

    pub fn eeb(&self) -> f64 {
        let f = &self.phi * &self.theta0;
        f.dot(&(&self.q_inv * &f)) + self.s2 * self.q_inv.trace() + log_det(&self.q)
    }

    /// `E‖Φθ₀ + V* − Φθ̂‖²` with `V*` an independent noise copy, in closed
    /// form from the hat matrix `H`.
    pub fn msey(&self) -> f64 {
        let big_n = self.phi.nrows();
        let h = &self.phi * &self.p * self.phi.transpose() * &self.q_inv;
        let i_h = DMatrix::identity(big_n, big_n) - &h;
        let bias = (&i_h * &self.phi * &self.theta0).norm_squared();
        bias + self.s2 * (&h * h.transpose()).trace() + big_n as f64 * self.s2
    }
}

/// `(ΦᵀΦ)⁻¹ΦᵀY` with an explicit inverse.
pub fn ls_explicit(problem: &RegressionProblem) -> DVector<f64> {
    let phi = problem.phi();
    inv(&(phi.transpose() * phi)) * phi.transpose() * problem.y()
}

pub fn wb_direct(p: &DMatrix<f64>, theta0: &DVector<f64>) -> f64 {
    theta0.dot(&(inv(p) * theta0)) + log_det(p)
}

pub fn wy_direct(p: &DMatrix<f64>, theta0: &DVector<f64>, sigma: &DMatrix<f64>, s2: f64) -> f64 {
    let pi = inv(p);
    let si = inv(sigma);
    let s4 = s2 * s2;
    s4 * theta0.dot(&(&pi * &si * &pi * theta0)) - 2.0 * s4 * (&si * &pi).trace()
}

/// TC entries `c·α^max(i,j)` with 1-based indices.
pub fn tc_direct(c: f64, alpha: f64, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| c * alpha.powi((i.max(j) + 1) as i32))
}

pub fn central_difference<F: Fn(&[f64]) -> DMatrix<f64>>(f: F, eta: &[f64], k: usize, h: f64) -> DMatrix<f64> {
    let mut plus = eta.to_vec();
    let mut minus = eta.to_vec();
    plus[k] += h;
    minus[k] -= h;
    (f(&plus) - f(&minus)) / (2.0 * h)
}

/// Largest entry-wise error relative to the largest entry of `b`.
pub fn matrix_rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = b.amax().max(1e-300);
    (a - b).amax() / scale
}
