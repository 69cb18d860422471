//! LS and regularized LS estimators with their quality measures.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::HyperParams;
use crate::linalg::{Cholesky, SymMatrix};
use crate::problem::RegressionProblem;
use crate::rng;

/// Denominators below this make Fit_g / Fit_y undefined.
pub const FIT_DEGENERACY_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Ls,
    Rls,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub theta_hat: DVector<f64>,
    pub method: Method,
    pub eta_used: Option<HyperParams>,
}

pub fn ls_estimate(problem: &RegressionProblem) -> Result<Estimate> {
    let theta_hat = problem.gram_cholesky().solve_vec(problem.phi_t_y());
    if theta_hat.iter().any(|v| !v.is_finite()) {
        return Err(Error::RankDeficient("non-finite least squares solution".into()));
    }
    Ok(Estimate { theta_hat, method: Method::Ls, eta_used: None })
}

/// The n×n quantities shared by the RLS estimate and the data-driven costs.
///
/// With `P = LLᵀ` and `K = LᵀΦᵀΦL`, the estimate is `L(K + σ²I)⁻¹LᵀΦᵀY`,
/// which never forms `P⁻¹`.
#[derive(Debug, Clone)]
pub struct RlsSystem {
    pub(crate) p_chol: Cholesky,
    pub(crate) k: SymMatrix,
    pub(crate) k_shift_chol: Cholesky,
    /// `(K + σ²I)⁻¹LᵀΦᵀY`.
    pub(crate) w: DVector<f64>,
    pub(crate) lt_b: DVector<f64>,
    pub(crate) theta_hat: DVector<f64>,
}

impl RlsSystem {
    pub fn new(problem: &RegressionProblem, p: &SymMatrix) -> Result<Self> {
        if p.dim() != problem.order() {
            return Err(Error::DimensionMismatch(format!(
                "P is {}x{}, problem has n = {}",
                p.dim(),
                p.dim(),
                problem.order()
            )));
        }
        let p_chol = p.cholesky()?;
        let l = p_chol.factor();
        let k = SymMatrix::symmetrized(l.tr_mul(&(problem.gram().as_matrix() * l)));
        let shifted = k.add(&SymMatrix::identity(k.dim()).scale(problem.sigma2()));
        let k_shift_chol = shifted.cholesky()?;
        let lt_b = l.tr_mul(problem.phi_t_y());
        let w = k_shift_chol.solve_vec(&lt_b);
        let theta_hat = l * &w;
        Ok(Self { p_chol, k, k_shift_chol, w, lt_b, theta_hat })
    }

    pub fn theta_hat(&self) -> &DVector<f64> {
        &self.theta_hat
    }

    /// `logdet(K + σ²I)`.
    pub fn logdet_shifted(&self) -> f64 {
        self.k_shift_chol.logdet()
    }
}

/// `θ̂ = (ΦᵀΦ + σ²P⁻¹)⁻¹ΦᵀY`.
pub fn rls_estimate(problem: &RegressionProblem, p: &SymMatrix) -> Result<Estimate> {
    let sys = RlsSystem::new(problem, p)?;
    Ok(Estimate { theta_hat: sys.theta_hat, method: Method::Rls, eta_used: None })
}

/// `100 (1 − ‖θ̂ − θ₀‖ / ‖θ₀ − θ̄₀‖)`.
pub fn fit_g(theta_hat: &DVector<f64>, theta0: &DVector<f64>) -> Result<f64> {
    if theta_hat.len() != theta0.len() {
        return Err(Error::DimensionMismatch("theta_hat and theta0 differ in length".into()));
    }
    let mean = theta0.mean();
    let denom = theta0.map(|v| v - mean).norm();
    if denom < FIT_DEGENERACY_TOL {
        return Err(Error::DegenerateReference(denom));
    }
    Ok(100.0 * (1.0 - (theta_hat - theta0).norm() / denom))
}

/// Output fit on a fresh data copy `Y* = Φθ₀ + V*`.
pub fn fit_y(theta_hat: &DVector<f64>, problem: &RegressionProblem, vstar: &DVector<f64>) -> Result<f64> {
    if vstar.len() != problem.sample_size() || theta_hat.len() != problem.order() {
        return Err(Error::DimensionMismatch("fit_y inputs do not match the problem".into()));
    }
    let ystar = problem.phi() * problem.theta0() + vstar;
    let mean = ystar.mean();
    let denom = ystar.map(|v| v - mean).norm();
    if denom < FIT_DEGENERACY_TOL {
        return Err(Error::DegenerateReference(denom));
    }
    Ok(100.0 * (1.0 - (problem.phi() * theta_hat - ystar).norm() / denom))
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub replicates: usize,
}

impl McEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let r = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / r;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0)
        } else {
            0.0
        };
        Self { mean, std_err: (var / r).sqrt(), replicates: xs.len() }
    }
}

fn noise_redraws<F>(problem: &RegressionProblem, replicates: usize, seed: u64, f: F) -> Result<McEstimate>
where
    F: Fn(&RegressionProblem, &mut rng::StreamRng) -> Result<f64> + Sync,
{
    if replicates < 2 {
        return Err(Error::InsufficientReplicates { needed: 2, got: replicates });
    }
    let sd = problem.sigma2().sqrt();
    let big_n = problem.sample_size();
    let xs = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut g = rng::stream(seed, &[rng::DATA, r]);
            let v = rng::normal_vector(&mut g, big_n) * sd;
            let redraw = problem.with_noise(v)?;
            f(&redraw, &mut g)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(McEstimate::from_samples(&xs))
}

/// `E‖θ̂ − θ₀‖²` over noise redraws with the regressors held fixed.
pub fn mse_g<F>(rule: F, problem: &RegressionProblem, replicates: usize, seed: u64) -> Result<McEstimate>
where
    F: Fn(&RegressionProblem) -> Result<DVector<f64>> + Sync,
{
    noise_redraws(problem, replicates, seed, |p, _| {
        Ok((rule(p)? - p.theta0()).norm_squared())
    })
}

/// `E‖Y* − Φθ̂‖²` with `Y* = Φθ₀ + V*` and `V*` an independent noise copy.
pub fn mse_y<F>(rule: F, problem: &RegressionProblem, replicates: usize, seed: u64) -> Result<McEstimate>
where
    F: Fn(&RegressionProblem) -> Result<DVector<f64>> + Sync,
{
    let sd = problem.sigma2().sqrt();
    noise_redraws(problem, replicates, seed, |p, g| {
        let vstar = rng::normal_vector(g, p.sample_size()) * sd;
        let ystar = p.phi() * p.theta0() + vstar;
        Ok((ystar - p.phi() * rule(p)?).norm_squared())
    })
}

/// `θ̂ = PΦᵀQ⁻¹Y` through the N×N matrix `Q = ΦPΦᵀ + σ²I`. Only sensible for small N.
pub fn rls_estimate_dense(problem: &RegressionProblem, p: &SymMatrix) -> Result<DVector<f64>> {
    let phi = problem.phi();
    let q = phi * p.as_matrix() * phi.transpose()
        + DMatrix::identity(phi.nrows(), phi.nrows()) * problem.sigma2();
    let qy = SymMatrix::symmetrized(q).cholesky()?.solve_vec(problem.y());
    Ok(p.as_matrix() * phi.tr_mul(&qy))
}
