//! Hyper-parameter cost functions. EB and SURE_y need only data; EEB and MSE_y
//! also read θ₀. W_b and W_y are the large-sample limits that F̄_EB and F̄_Sy
//! approach.
//!
//! Data-driven costs use the n×n forms from [`RlsSystem`]:
//! with `K = LᵀΦᵀΦL` and `P = LLᵀ`,
//! `logdet Q = (N − n) log σ² + logdet(K + σ²I)` and
//! `YᵀQ⁻¹Y = (YᵀY − bᵀL(K + σ²I)⁻¹Lᵀb) / σ²`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::estimators::RlsSystem;
use crate::kernels::{kernel_matrix, KernelFamily};
use crate::linalg::{eigen_sym, trace_of_product, SymMatrix};
use crate::problem::RegressionProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CostKind {
    Eb,
    SureY,
    Eeb,
    MseY,
    Wb,
    Wy,
    FbarEb,
    FbarSy,
}

impl CostKind {
    pub const ALL: [CostKind; 8] = [
        Self::Eb,
        Self::SureY,
        Self::Eeb,
        Self::MseY,
        Self::Wb,
        Self::Wy,
        Self::FbarEb,
        Self::FbarSy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Eb => "eb",
            Self::SureY => "surey",
            Self::Eeb => "eeb",
            Self::MseY => "msey",
            Self::Wb => "wb",
            Self::Wy => "wy",
            Self::FbarEb => "fbar_eb",
            Self::FbarSy => "fbar_sy",
        }
    }

    /// Needs θ₀ (and possibly Σ) rather than, or in addition to, the data.
    pub fn is_oracle(self) -> bool {
        matches!(self, Self::Eeb | Self::MseY | Self::Wb | Self::Wy)
    }
}

impl fmt::Display for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CostKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == key || (key == "sure_y" && *k == Self::SureY))
            .ok_or_else(|| {
                Error::config(
                    "cost",
                    format!("unknown cost `{s}` (expected eb, surey, eeb, msey, wb, wy, fbar_eb or fbar_sy)"),
                )
            })
    }
}

/// Oracle inputs for the limit costs.
#[derive(Debug, Clone, Copy)]
pub struct LimitInputs<'a> {
    pub theta0: &'a DVector<f64>,
    pub sigma: Option<&'a SymMatrix>,
    pub sigma2: f64,
}

/// What a cost is evaluated against.
#[derive(Debug, Clone, Copy)]
pub enum CostContext<'a> {
    /// A data set; oracle costs read the true parameters from it.
    Data(&'a RegressionProblem),
    Limit(LimitInputs<'a>),
}

impl<'a> CostContext<'a> {
    fn problem(&self) -> Result<&'a RegressionProblem> {
        match self {
            CostContext::Data(p) => Ok(p),
            CostContext::Limit(_) => Err(Error::MissingOracle("data set")),
        }
    }

    fn limit(&self) -> LimitInputs<'a> {
        match *self {
            CostContext::Data(p) => LimitInputs {
                theta0: p.theta0(),
                sigma: Some(p.covariance()),
                sigma2: p.sigma2(),
            },
            CostContext::Limit(l) => l,
        }
    }

    pub fn order(&self) -> usize {
        match self {
            CostContext::Data(p) => p.order(),
            CostContext::Limit(l) => l.theta0.len(),
        }
    }
}

/// Evaluates `kind` at the kernel matrix `p`.
pub fn evaluate_with_kernel(kind: CostKind, ctx: &CostContext, p: &SymMatrix) -> Result<f64> {
    match kind {
        CostKind::Eb => eb_at(ctx.problem()?, p),
        CostKind::SureY => sure_y_at(ctx.problem()?, p),
        CostKind::Eeb => eeb_at(ctx.problem()?, p),
        CostKind::MseY => msey_at(ctx.problem()?, p),
        CostKind::FbarEb => fbar_eb_at(ctx.problem()?, p),
        CostKind::FbarSy => fbar_sy_at(ctx.problem()?, p),
        CostKind::Wb => wb_at(p, ctx.limit().theta0),
        CostKind::Wy => {
            let l = ctx.limit();
            let sigma = l.sigma.ok_or(Error::MissingOracle("Sigma"))?;
            wy_at(p, l.theta0, sigma, l.sigma2)
        }
    }
}

pub fn evaluate(kind: CostKind, ctx: &CostContext, family: KernelFamily, eta: &[f64]) -> Result<f64> {
    let p = kernel_matrix(family, eta, ctx.order())?;
    evaluate_with_kernel(kind, ctx, &p)
}

fn log_det_q(problem: &RegressionProblem, sys: &RlsSystem) -> f64 {
    let (big_n, n) = (problem.sample_size() as f64, problem.order() as f64);
    (big_n - n) * problem.sigma2().ln() + sys.logdet_shifted()
}

/// `YᵀQ⁻¹Y + logdet Q`.
pub fn eb_at(problem: &RegressionProblem, p: &SymMatrix) -> Result<f64> {
    let sys = RlsSystem::new(problem, p)?;
    let quad = (problem.yty() - sys.lt_b.dot(&sys.w)) / problem.sigma2();
    Ok(quad + log_det_q(problem, &sys))
}

/// `‖Y − Φθ̂‖² + 2σ² Tr(ΦPΦᵀQ⁻¹)`, the trace taken as `Tr((K + σ²I)⁻¹K)`.
pub fn sure_y_at(problem: &RegressionProblem, p: &SymMatrix) -> Result<f64> {
    let sys = RlsSystem::new(problem, p)?;
    let resid = (problem.y() - problem.phi() * sys.theta_hat()).norm_squared();
    let n = problem.order();
    let inv = sys.k_shift_chol.inverse();
    let trace = n as f64 - problem.sigma2() * inv.trace();
    Ok(resid + 2.0 * problem.sigma2() * trace)
}

/// Spectral pieces of `Q⁻¹` restricted to θ₀: eigenvalues `λ` of `K` and
/// the squared coordinates of `L⁻¹θ₀` in its eigenbasis.
fn spectral_parts(problem: &RegressionProblem, sys: &RlsSystem) -> (Vec<f64>, Vec<f64>) {
    let eig = eigen_sym(&sys.k);
    let z = sys.p_chol.solve_lower_vec(problem.theta0());
    let zt = eig.vectors.tr_mul(&z);
    let lambdas = eig.values.iter().map(|&l| l.max(0.0)).collect();
    (lambdas, zt.iter().map(|v| v * v).collect())
}

/// `θ₀ᵀΦᵀQ⁻¹Φθ₀ + σ²Tr(Q⁻¹) + logdet Q`.
pub fn eeb_at(problem: &RegressionProblem, p: &SymMatrix) -> Result<f64> {
    let sys = RlsSystem::new(problem, p)?;
    let s2 = problem.sigma2();
    let extra = (problem.sample_size() - problem.order()) as f64;
    let (lam, z2) = spectral_parts(problem, &sys);
    let quad: f64 = lam.iter().zip(&z2).map(|(l, z)| z * l / (l + s2)).sum();
    let tr_qinv = extra / s2 + lam.iter().map(|l| 1.0 / (s2 + l)).sum::<f64>();
    Ok(quad + s2 * tr_qinv + log_det_q(problem, &sys))
}

/// `σ⁴θ₀ᵀΦᵀQ⁻²Φθ₀ + σ⁶Tr(Q⁻²) − 2σ⁴Tr(Q⁻¹) + 2Nσ²`.
pub fn msey_at(problem: &RegressionProblem, p: &SymMatrix) -> Result<f64> {
    let sys = RlsSystem::new(problem, p)?;
    let s2 = problem.sigma2();
    let big_n = problem.sample_size() as f64;
    let extra = (problem.sample_size() - problem.order()) as f64;
    let (lam, z2) = spectral_parts(problem, &sys);
    let quad: f64 = lam.iter().zip(&z2).map(|(l, z)| z * l / (l + s2).powi(2)).sum();
    let tr1 = extra / s2 + lam.iter().map(|l| 1.0 / (s2 + l)).sum::<f64>();
    let tr2 = extra / (s2 * s2) + lam.iter().map(|l| 1.0 / (s2 + l).powi(2)).sum::<f64>();
    let s4 = s2 * s2;
    Ok(s4 * quad + s4 * s2 * tr2 - 2.0 * s4 * tr1 + 2.0 * big_n * s2)
}

/// `θ₀ᵀP⁻¹θ₀ + logdet P`.
pub fn wb_at(p: &SymMatrix, theta0: &DVector<f64>) -> Result<f64> {
    if theta0.len() != p.dim() {
        return Err(Error::DimensionMismatch("theta0 does not match P".into()));
    }
    let c = p.cholesky()?;
    let z = c.solve_lower_vec(theta0);
    Ok(z.norm_squared() + c.logdet())
}

/// `σ⁴θ₀ᵀP⁻¹Σ⁻¹P⁻¹θ₀ − 2σ⁴Tr(Σ⁻¹P⁻¹)`.
pub fn wy_at(p: &SymMatrix, theta0: &DVector<f64>, sigma: &SymMatrix, sigma2: f64) -> Result<f64> {
    if theta0.len() != p.dim() || sigma.dim() != p.dim() {
        return Err(Error::DimensionMismatch("theta0 / Sigma do not match P".into()));
    }
    let pc = p.cholesky()?;
    let sc = sigma.cholesky()?;
    let u = pc.solve_vec(theta0);
    let quad = sc.solve_lower_vec(&u).norm_squared();
    let tr = trace_of_product(sc.inverse().as_matrix(), pc.inverse().as_matrix());
    let s4 = sigma2 * sigma2;
    Ok(s4 * quad - 2.0 * s4 * tr)
}

/// `S = P + σ²(ΦᵀΦ)⁻¹` together with `(ΦᵀΦ)⁻¹` and `θ̂_LS`.
pub(crate) struct SPieces {
    pub m_inv: SymMatrix,
    pub s: SymMatrix,
    pub theta_ls: DVector<f64>,
}

pub(crate) fn s_pieces(problem: &RegressionProblem, p: &SymMatrix) -> Result<SPieces> {
    if p.dim() != problem.order() {
        return Err(Error::DimensionMismatch("P does not match the problem order".into()));
    }
    let m_inv = problem.gram_cholesky().inverse();
    let s = p.add(&m_inv.scale(problem.sigma2()));
    let theta_ls = problem.gram_cholesky().solve_vec(problem.phi_t_y());
    Ok(SPieces { m_inv, s, theta_ls })
}

/// `θ̂_LSᵀS⁻¹θ̂_LS + logdet S`.
pub fn fbar_eb_at(problem: &RegressionProblem, p: &SymMatrix) -> Result<f64> {
    let sp = s_pieces(problem, p)?;
    let c = sp.s.cholesky()?;
    Ok(c.solve_lower_vec(&sp.theta_ls).norm_squared() + c.logdet())
}

/// `N[σ⁴θ̂_LSᵀS⁻¹(ΦᵀΦ)⁻¹S⁻¹θ̂_LS − 2σ⁴Tr((ΦᵀΦ)⁻¹S⁻¹)]`.
pub fn fbar_sy_at(problem: &RegressionProblem, p: &SymMatrix) -> Result<f64> {
    let sp = s_pieces(problem, p)?;
    let c = sp.s.cholesky()?;
    let u = c.solve_vec(&sp.theta_ls);
    let quad = sp.m_inv.quad_form(&u);
    let tr = trace_of_product(sp.m_inv.as_matrix(), c.inverse().as_matrix());
    let s4 = problem.sigma2().powi(2);
    Ok(problem.sample_size() as f64 * (s4 * quad - 2.0 * s4 * tr))
}

/// η-free offset with `F̄_EB = F_EB + offset`.
pub fn fbar_eb_offset(problem: &RegressionProblem) -> f64 {
    let s2 = problem.sigma2();
    let b = problem.phi_t_y();
    let proj = b.dot(&problem.gram_cholesky().solve_vec(b));
    let extra = (problem.sample_size() - problem.order()) as f64;
    proj / s2 - problem.yty() / s2 - extra * s2.ln() - problem.gram_cholesky().logdet()
}

/// η-free offset with `F̄_Sy = N (F_Sy + offset)`.
pub fn fbar_sy_offset(problem: &RegressionProblem) -> f64 {
    let b = problem.phi_t_y();
    let proj = b.dot(&problem.gram_cholesky().solve_vec(b));
    proj - problem.yty() - 2.0 * problem.order() as f64 * problem.sigma2()
}

macro_rules! family_cost {
    ($(#[$m:meta])* $name:ident, $at:ident) => {
        $(#[$m])*
        pub fn $name(problem: &RegressionProblem, family: KernelFamily, eta: &[f64]) -> Result<f64> {
            $at(problem, &kernel_matrix(family, eta, problem.order())?)
        }
    };
}

family_cost!(cost_eb, eb_at);
family_cost!(cost_sure_y, sure_y_at);
family_cost!(cost_eeb, eeb_at);
family_cost!(cost_msey, msey_at);
family_cost!(cost_fbar_eb, fbar_eb_at);
family_cost!(cost_fbar_sy, fbar_sy_at);

pub fn cost_wb(family: KernelFamily, eta: &[f64], theta0: &DVector<f64>) -> Result<f64> {
    wb_at(&kernel_matrix(family, eta, theta0.len())?, theta0)
}

pub fn cost_wy(
    family: KernelFamily,
    eta: &[f64],
    theta0: &DVector<f64>,
    sigma: &SymMatrix,
    sigma2: f64,
) -> Result<f64> {
    wy_at(&kernel_matrix(family, eta, theta0.len())?, theta0, sigma, sigma2)
}
