//! Finite-sample bounds on `|F̄ − W|`, the controlled condition-number sweep,
//! sandwich covariances of the tuned hyper-parameters, and Gaussian
//! quadratic-form moments.

use nalgebra::{DMatrix, DVector};

use crate::costs::{fbar_eb_at, fbar_sy_at, s_pieces, wb_at, wy_at};
use crate::error::{Error, Result};
use crate::kernels::{inv_kernel_derivatives, kernel_matrix, KernelFamily};
use crate::linalg::{cond_number, eigen_sym, frob_norm, numerical_rank, sqrt_psd, SymMatrix};
use crate::problem::{geometric_spectrum, random_orthogonal, RegressionProblem};
use crate::rng;

/// Terms bounding `|F̄_EB − W_b|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EbBoundTerms {
    pub e1b: f64,
    pub e2b: f64,
    pub e3b: f64,
    pub r1: usize,
}

impl EbBoundTerms {
    pub fn total(&self) -> f64 {
        self.e1b + self.e2b + self.e3b
    }

    pub fn values(&self) -> [f64; 3] {
        [self.e1b, self.e2b, self.e3b]
    }
}

/// Terms bounding `|F̄_Sy − W_y|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyBoundTerms {
    pub e1y: f64,
    pub e2y: f64,
    pub e3y: f64,
    pub e4y: f64,
    pub e5y: f64,
    pub r2: usize,
    pub delta_n: f64,
    /// Condition-number forms of `E_2y` and `E_5y`, which go through
    /// `λ_n(ΦᵀΦ/N − Σ)` and may be negative. Not bounds in general.
    pub e2y_display: f64,
    pub e5y_display: f64,
}

impl SyBoundTerms {
    pub fn total(&self) -> f64 {
        self.e1y + self.e2y + self.e3y + self.e4y + self.e5y
    }

    pub fn values(&self) -> [f64; 5] {
        [self.e1y, self.e2y, self.e3y, self.e4y, self.e5y]
    }
}

/// Both sides of one bound check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub gap: f64,
    pub bound: f64,
}

impl BoundCheck {
    pub fn holds(&self) -> bool {
        self.gap <= self.bound * (1.0 + 1e-10) + 1e-12
    }
}

struct Norms {
    m_inv: SymMatrix,
    s_inv: SymMatrix,
    p_inv: SymMatrix,
    m_inv_f: f64,
    s_inv_f: f64,
    p_inv_f: f64,
    theta: f64,
    phi_v: f64,
}

fn norms(problem: &RegressionProblem, p: &SymMatrix) -> Result<Norms> {
    let v = problem.noise().ok_or(Error::MissingOracle("noise V"))?;
    let sp = s_pieces(problem, p)?;
    let s_inv = sp.s.cholesky()?.inverse();
    let p_inv = p.cholesky()?.inverse();
    Ok(Norms {
        m_inv_f: frob_norm(sp.m_inv.as_matrix()),
        s_inv_f: frob_norm(s_inv.as_matrix()),
        p_inv_f: frob_norm(p_inv.as_matrix()),
        theta: problem.theta0().norm(),
        phi_v: problem.phi().tr_mul(v).norm(),
        m_inv: sp.m_inv,
        s_inv,
        p_inv,
    })
}

pub fn eb_bound_terms_at(problem: &RegressionProblem, p: &SymMatrix) -> Result<EbBoundTerms> {
    let z = norms(problem, p)?;
    let s2 = problem.sigma2();
    let n = p.dim();
    let root = sqrt_psd(p);
    let inner = DMatrix::identity(n, n) - root.as_matrix() * z.s_inv.as_matrix() * root.as_matrix();
    let r1 = numerical_rank(&inner);
    let e1b = z.theta * z.phi_v * z.m_inv_f * (z.s_inv_f + z.p_inv_f);
    let e2b = z.m_inv_f
        * (z.s_inv_f * (z.phi_v.powi(2) * z.m_inv_f + s2 * z.theta.powi(2) * z.p_inv_f)
            + (r1 as f64).sqrt()
                * s2
                * (z.s_inv_f * z.p_inv_f * p.trace()).max(z.p_inv.trace()));
    let e3b = s2 * z.theta * z.phi_v * z.m_inv_f.powi(2) * z.s_inv_f * z.p_inv_f;
    Ok(EbBoundTerms { e1b, e2b, e3b, r1 })
}

pub fn eb_bound_terms(problem: &RegressionProblem, family: KernelFamily, eta: &[f64]) -> Result<EbBoundTerms> {
    eb_bound_terms_at(problem, &kernel_matrix(family, eta, problem.order())?)
}

pub fn sy_bound_terms_at(problem: &RegressionProblem, p: &SymMatrix, delta_n: f64) -> Result<SyBoundTerms> {
    let z = norms(problem, p)?;
    let s2 = problem.sigma2();
    let s4 = s2 * s2;
    let n = p.dim();
    let big_n = problem.sample_size() as f64;
    let sigma = problem.covariance();
    let sig_inv = sigma.cholesky()?.inverse();
    let sig_inv_f = frob_norm(sig_inv.as_matrix());
    let delta = problem.gram().scale(1.0 / big_n).sub(sigma);
    let delta_f = frob_norm(delta.as_matrix());
    let r2 = numerical_rank(
        &(sig_inv.as_matrix() * z.p_inv.as_matrix()
            - z.m_inv.as_matrix() * z.s_inv.as_matrix() * big_n),
    );
    let rr = (r2 as f64).sqrt();
    let (m, s, pi, th, pv) = (z.m_inv_f, z.s_inv_f, z.p_inv_f, z.theta, z.phi_v);

    let e1y = s4 * th * pv * m * (big_n * m * s * s + sig_inv_f * pi * pi);
    let e2y = s4 * big_n * m * delta_f * sig_inv_f * pi * (th * th * s + 2.0 * rr);
    let e3y = s4
        * m
        * s
        * (pv * pv * big_n * m * m * s
            + s2 * th * th * big_n * m * s * pi
            + s2 * th * th * sig_inv_f * pi * pi
            + 2.0 * rr * s2 * big_n * m * pi);
    let e4y = s4 * s2 * th * pv * m * m * s * pi * (big_n * m * s + sig_inv_f * pi);
    let e5y = s4 * th * pv * big_n * m * m * delta_f * sig_inv_f * s * pi;

    // condition-number forms
    let lam1 = |a: &SymMatrix| eigen_sym(a).max();
    let cond = |a: &SymMatrix| {
        let e = eigen_sym(a);
        e.max() / e.min()
    };
    let sp = s_pieces(problem, p)?;
    let nf = n as f64;
    let gram = problem.gram();
    let de = eigen_sym(&delta);
    let (dl1, dln) = (de.max(), de.min());
    let scale_m = big_n / lam1(gram);
    let e2y_display = delta_n * nf * nf * s4 * scale_m * (dln / delta_n) / lam1(sigma) / lam1(p)
        * cond(gram)
        * (dl1 / dln)
        * cond(sigma)
        * cond(p)
        * (nf.sqrt() * th * th / lam1(&sp.s) * cond(&sp.s) + 2.0 * rr);
    let e5y_display = delta_n / big_n.sqrt()
        * s4
        * nf.powi(3)
        * th
        * scale_m.powi(2)
        * (dln / delta_n)
        / lam1(sigma)
        / lam1(&sp.s)
        / lam1(p)
        * cond(gram).powi(2)
        * (dl1 / dln)
        * cond(sigma)
        * cond(&sp.s)
        * cond(p)
        * pv
        / big_n.sqrt();

    Ok(SyBoundTerms {
        e1y,
        e2y,
        e3y,
        e4y,
        e5y,
        r2,
        delta_n,
        e2y_display,
        e5y_display,
    })
}

/// `δ_N = 1/√N` when `delta_n` is `None`.
pub fn sy_bound_terms(
    problem: &RegressionProblem,
    family: KernelFamily,
    eta: &[f64],
    delta_n: Option<f64>,
) -> Result<SyBoundTerms> {
    let d = delta_n.unwrap_or(1.0 / (problem.sample_size() as f64).sqrt());
    sy_bound_terms_at(problem, &kernel_matrix(family, eta, problem.order())?, d)
}

pub fn check_eb_bound(problem: &RegressionProblem, family: KernelFamily, eta: &[f64]) -> Result<(BoundCheck, EbBoundTerms)> {
    let p = kernel_matrix(family, eta, problem.order())?;
    let terms = eb_bound_terms_at(problem, &p)?;
    let gap = (fbar_eb_at(problem, &p)? - wb_at(&p, problem.theta0())?).abs();
    Ok((BoundCheck { gap, bound: terms.total() }, terms))
}

pub fn check_sy_bound(problem: &RegressionProblem, family: KernelFamily, eta: &[f64]) -> Result<(BoundCheck, SyBoundTerms)> {
    let p = kernel_matrix(family, eta, problem.order())?;
    let d = 1.0 / (problem.sample_size() as f64).sqrt();
    let terms = sy_bound_terms_at(problem, &p, d)?;
    let w = wy_at(&p, problem.theta0(), problem.covariance(), problem.sigma2())?;
    let gap = (fbar_sy_at(problem, &p)? - w).abs();
    Ok((BoundCheck { gap, bound: terms.total() }, terms))
}

/// One row of the reference table of condition-number powers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableEntry {
    pub term: &'static str,
    /// Rate at which the term is bounded in probability.
    pub rate: &'static str,
    pub cond_gram_power: u32,
    pub cond_p_power: u32,
}

pub const POWER_TABLE: [TableEntry; 8] = [
    TableEntry { term: "E1b", rate: "1/sqrt(N)", cond_gram_power: 1, cond_p_power: 1 },
    TableEntry { term: "E2b", rate: "1/N", cond_gram_power: 2, cond_p_power: 1 },
    TableEntry { term: "E3b", rate: "1/N^(3/2)", cond_gram_power: 2, cond_p_power: 1 },
    TableEntry { term: "E1y", rate: "1/sqrt(N)", cond_gram_power: 2, cond_p_power: 2 },
    TableEntry { term: "E3y", rate: "1/N", cond_gram_power: 3, cond_p_power: 2 },
    TableEntry { term: "E4y", rate: "1/N^(3/2)", cond_gram_power: 3, cond_p_power: 2 },
    TableEntry { term: "E2y", rate: "delta_N", cond_gram_power: 2, cond_p_power: 1 },
    TableEntry { term: "E5y", rate: "delta_N/sqrt(N)", cond_gram_power: 3, cond_p_power: 1 },
];

/// A controlled sweep over `cond(Σ)`: the Gaussian draws, rotation, θ₀, noise
/// and kernel stay fixed while the spectrum of Σ is stretched.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub family: KernelFamily,
    pub eta: Vec<f64>,
    pub n: usize,
    pub sample_size: usize,
    pub sigma2: f64,
    pub conds: Vec<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub cond_target: f64,
    pub cond_gram: f64,
    pub eb: EbBoundTerms,
    pub sy: SyBoundTerms,
}

pub fn cond_sweep(spec: &SweepSpec) -> Result<Vec<SweepPoint>> {
    if spec.n < 2 || spec.sample_size <= spec.n {
        return Err(Error::config("n", "sweep needs n >= 2 and N > n"));
    }
    let p = kernel_matrix(spec.family, &spec.eta, spec.n)?;
    let mut g = rng::stream(spec.seed, &[rng::COVARIANCE]);
    let u = random_orthogonal(&mut g, spec.n);
    let mut g = rng::stream(spec.seed, &[rng::THETA0]);
    let theta0 = rng::normal_vector(&mut g, spec.n);
    let mut g = rng::stream(spec.seed, &[rng::DATA]);
    let z = rng::normal_matrix(&mut g, spec.sample_size, spec.n);
    let v = rng::normal_vector(&mut g, spec.sample_size) * spec.sigma2.sqrt();
    spec.conds
        .iter()
        .map(|&c| {
            if !(c >= 1.0) {
                return Err(Error::config("conds", "condition levels must be >= 1"));
            }
            let d = geometric_spectrum(spec.n, c, 1.0);
            let root_d = DMatrix::from_diagonal(&DVector::from_iterator(spec.n, d.iter().map(|x| x.sqrt())));
            let sigma = SymMatrix::symmetrized(&u * DMatrix::from_diagonal(&DVector::from_vec(d)) * u.transpose());
            let phi = &z * (&u * root_d * u.transpose());
            let y = &phi * &theta0 + &v;
            let prob = RegressionProblem::new(phi, y, theta0.clone(), spec.sigma2, sigma, Some(v.clone()))?;
            let delta = 1.0 / (spec.sample_size as f64).sqrt();
            Ok(SweepPoint {
                cond_target: c,
                cond_gram: cond_number(prob.gram())?,
                eb: eb_bound_terms_at(&prob, &p)?,
                sy: sy_bound_terms_at(&prob, &p, delta)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerRow {
    pub entry: TableEntry,
    /// Least-squares slope of log(term) against log cond(ΦᵀΦ); NaN when the
    /// term vanishes somewhere on the sweep.
    pub slope: f64,
}

/// Ordinary least-squares slope and intercept of `y` on `x`.
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

pub const MIN_SWEEP_LEVELS: usize = 4;

pub fn cond_power_table(points: &[SweepPoint]) -> Result<Vec<PowerRow>> {
    if points.len() < MIN_SWEEP_LEVELS {
        return Err(Error::InsufficientSweep { needed: MIN_SWEEP_LEVELS, got: points.len() });
    }
    let x: Vec<f64> = points.iter().map(|p| p.cond_gram.ln()).collect();
    let term = |name: &str, p: &SweepPoint| -> f64 {
        match name {
            "E1b" => p.eb.e1b,
            "E2b" => p.eb.e2b,
            "E3b" => p.eb.e3b,
            "E1y" => p.sy.e1y,
            "E2y" => p.sy.e2y,
            "E3y" => p.sy.e3y,
            "E4y" => p.sy.e4y,
            _ => p.sy.e5y,
        }
    };
    Ok(POWER_TABLE
        .iter()
        .map(|entry| {
            let y: Vec<f64> = points.iter().map(|p| term(entry.term, p).ln()).collect();
            let slope = if y.iter().all(|v| v.is_finite()) { ols(&x, &y).0 } else { f64::NAN };
            PowerRow { entry: *entry, slope }
        })
        .collect())
}

/// `A⁻¹BA⁻¹` with its factors.
#[derive(Debug, Clone)]
pub struct SandwichCov {
    pub a: SymMatrix,
    pub b: SymMatrix,
    pub covariance: SymMatrix,
}

fn sandwich(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<SandwichCov> {
    let a = SymMatrix::symmetrized(a);
    let b = SymMatrix::symmetrized(b);
    let eig = eigen_sym(&a);
    let top = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if top == 0.0 || eig.values.iter().any(|v| v.abs() <= 1e-12 * top) {
        return Err(Error::SingularHessian);
    }
    let a_inv = a
        .as_matrix()
        .clone()
        .try_inverse()
        .ok_or(Error::SingularHessian)?;
    let covariance = SymMatrix::symmetrized(&a_inv * b.as_matrix() * &a_inv);
    Ok(SandwichCov { a, b, covariance })
}

fn limit_inputs<'a>(theta0: &'a DVector<f64>, sigma: &SymMatrix, n: usize) -> Result<SymMatrix> {
    if theta0.len() != n || sigma.dim() != n {
        return Err(Error::DimensionMismatch("theta0 / Sigma do not match".into()));
    }
    Ok(sigma.cholesky()?.inverse())
}

/// Asymptotic covariance of `√N(η̂_EB − η*_b)`.
pub fn sandwich_eb(
    family: KernelFamily,
    eta: &[f64],
    theta0: &DVector<f64>,
    sigma: &SymMatrix,
    sigma2: f64,
) -> Result<SandwichCov> {
    let n = theta0.len();
    let sig_inv = limit_inputs(theta0, sigma, n)?;
    let d = inv_kernel_derivatives(family, eta, n)?;
    let q = family.p();
    let mut a = DMatrix::zeros(q, q);
    let mut b = DMatrix::zeros(q, q);
    let si = sig_inv.as_matrix();
    for k in 0..q {
        for l in 0..q {
            a[(k, l)] = d.d2inv[k][l].quad_form(theta0)
                + (d.dinv[l].as_matrix() * d.dp[k].as_matrix()).trace()
                + (d.inv.as_matrix() * d.d2p[k][l].as_matrix()).trace();
            let left = d.dinv[k].as_matrix() * theta0;
            let right = d.dinv[l].as_matrix() * theta0;
            b[(k, l)] = 4.0 * sigma2 * left.dot(&(si * right));
        }
    }
    sandwich(a, b)
}

/// Asymptotic covariance of `√N(η̂_Sy − η*_y)`.
pub fn sandwich_sy(
    family: KernelFamily,
    eta: &[f64],
    theta0: &DVector<f64>,
    sigma: &SymMatrix,
    sigma2: f64,
) -> Result<SandwichCov> {
    let n = theta0.len();
    let sig_inv = limit_inputs(theta0, sigma, n)?;
    let d = inv_kernel_derivatives(family, eta, n)?;
    let q = family.p();
    let si = sig_inv.as_matrix();
    let pi = d.inv.as_matrix();
    let s4 = sigma2 * sigma2;
    let bracket: Vec<DMatrix<f64>> = (0..q)
        .map(|k| {
            let dk = d.dinv[k].as_matrix();
            pi * si * dk + dk * si * pi
        })
        .collect();
    let mut c = DMatrix::zeros(q, q);
    let mut dd = DMatrix::zeros(q, q);
    for k in 0..q {
        for l in 0..q {
            let d2 = d.d2inv[k][l].as_matrix();
            let t1 = (d.dinv[l].as_matrix() * theta0).dot(&(si * (d.dinv[k].as_matrix() * theta0)));
            let t2 = theta0.dot(&(pi * si * d2 * theta0));
            let t3 = (si * d2).trace();
            c[(k, l)] = 2.0 * s4 * (t1 + t2 - t3);
            let left = bracket[k].tr_mul(theta0);
            let right = &bracket[l] * theta0;
            dd[(k, l)] = 4.0 * s4 * s4 * sigma2 * left.dot(&(si * right));
        }
    }
    sandwich(c, dd)
}

/// Closed form `4σ²θ₀ᵀΣ⁻¹θ₀/n²` of the ridge EB variance.
pub fn ridge_eb_variance(theta0: &DVector<f64>, sigma: &SymMatrix, sigma2: f64) -> Result<f64> {
    let n = theta0.len() as f64;
    Ok(4.0 * sigma2 * inverse_power_form(theta0, sigma, 1)? / (n * n))
}

/// Closed form `4σ²θ₀ᵀΣ⁻³θ₀/Tr²(Σ⁻¹)` of the ridge SURE_y variance.
pub fn ridge_sy_variance(theta0: &DVector<f64>, sigma: &SymMatrix, sigma2: f64) -> Result<f64> {
    let t = inverse_trace(sigma)?;
    Ok(4.0 * sigma2 * inverse_power_form(theta0, sigma, 3)? / (t * t))
}

/// Ridge limit minimizers `(θ₀ᵀθ₀/n, θ₀ᵀΣ⁻¹θ₀/Tr(Σ⁻¹))`.
pub fn ridge_optima(theta0: &DVector<f64>, sigma: &SymMatrix) -> Result<(f64, f64)> {
    Ok((
        theta0.norm_squared() / theta0.len() as f64,
        inverse_power_form(theta0, sigma, 1)? / inverse_trace(sigma)?,
    ))
}

fn check_pd(sigma: &SymMatrix) -> Result<crate::linalg::EigenSym> {
    sigma.cholesky()?;
    let e = eigen_sym(sigma);
    if !(e.min() > 0.0) {
        return Err(Error::NotPositiveDefinite { index: sigma.dim() - 1, pivot: e.min() });
    }
    Ok(e)
}

/// `θᵀΣ⁻ᵏθ` through the eigen-decomposition of Σ.
fn inverse_power_form(theta: &DVector<f64>, sigma: &SymMatrix, k: i32) -> Result<f64> {
    if theta.len() != sigma.dim() {
        return Err(Error::DimensionMismatch("theta0 does not match Sigma".into()));
    }
    let e = check_pd(sigma)?;
    let g = e.vectors.tr_mul(theta);
    Ok(g.iter().zip(e.values.iter()).map(|(gi, l)| gi * gi / l.powi(k)).sum())
}

fn inverse_trace(sigma: &SymMatrix) -> Result<f64> {
    Ok(check_pd(sigma)?.values.iter().map(|l| 1.0 / l).sum())
}

/// `[θ₀ᵀΣ⁻¹θ₀/n²] / [θ₀ᵀΣ⁻³θ₀/Tr²(Σ⁻¹)]`, the ridge EB over SURE_y variance ratio.
pub fn variance_ratio(theta0: &DVector<f64>, sigma: &SymMatrix) -> Result<f64> {
    let n = theta0.len() as f64;
    let t = inverse_trace(sigma)?;
    Ok((inverse_power_form(theta0, sigma, 1)? / (n * n))
        / (inverse_power_form(theta0, sigma, 3)? / (t * t)))
}

fn check_moment_dims(a: &DMatrix<f64>, mu: &DVector<f64>, cov: &SymMatrix) -> Result<()> {
    let n = mu.len();
    if a.shape() != (n, n) || cov.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "A is {}x{}, mu has {} entries, covariance is {}x{}",
            a.nrows(),
            a.ncols(),
            n,
            cov.dim(),
            cov.dim()
        )));
    }
    Ok(())
}

/// `E(aᵀAa) = Tr(AΣ) + μᵀAμ` for `a ~ N(μ, Σ)`.
pub fn gaussian_quad_mean(a: &DMatrix<f64>, mu: &DVector<f64>, cov: &SymMatrix) -> Result<f64> {
    check_moment_dims(a, mu, cov)?;
    Ok((a * cov.as_matrix()).trace() + mu.dot(&(a * mu)))
}

/// `E(aᵀAa · aᵀBa)` for `a ~ N(μ, Σ)`.
pub fn gaussian_quartic_mean(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    mu: &DVector<f64>,
    cov: &SymMatrix,
) -> Result<f64> {
    check_moment_dims(a, mu, cov)?;
    check_moment_dims(b, mu, cov)?;
    let s = cov.as_matrix();
    let bs = b + b.transpose();
    let as_ = a + a.transpose();
    let cross = (a * s * &bs * s).trace() + mu.dot(&(&as_ * s * &bs * mu));
    Ok(cross + gaussian_quad_mean(a, mu, cov)? * gaussian_quad_mean(b, mu, cov)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn ridge_sandwich_unit_example() {
        let t = DVector::from_vec(vec![1.0, 1.0]);
        let i = SymMatrix::identity(2);
        let s = sandwich_eb(KernelFamily::Ridge, &[1.0], &t, &i, 1.0).unwrap();
        assert!(rel(s.a[(0, 0)], 2.0) < 1e-12);
        assert!(rel(s.b[(0, 0)], 8.0) < 1e-12);
        assert!(rel(s.covariance[(0, 0)], 2.0) < 1e-12);
        assert!(rel(ridge_eb_variance(&t, &i, 1.0).unwrap(), 2.0) < 1e-12);
    }

    #[test]
    fn variance_ratio_examples() {
        let t = DVector::from_vec(vec![0.3, -2.0]);
        assert!(rel(variance_ratio(&t, &SymMatrix::identity(2)).unwrap(), 1.0) < 1e-12);
        let ones = DVector::from_vec(vec![1.0, 1.0]);
        let mut prev = f64::INFINITY;
        for eps in [1e-2, 1e-4, 1e-6] {
            let r = variance_ratio(&ones, &SymMatrix::from_diagonal(&[1.0, eps])).unwrap();
            assert!(r < prev && r > 0.25);
            prev = r;
        }
        assert!(rel(prev, 0.25) < 1e-4);
    }

    #[test]
    fn quad_mean_examples() {
        let i = DMatrix::identity(2, 2);
        let cov = SymMatrix::identity(2);
        assert_eq!(gaussian_quad_mean(&i, &DVector::zeros(2), &cov).unwrap(), 2.0);
        assert_eq!(gaussian_quad_mean(&i, &DVector::from_vec(vec![1.0, 0.0]), &cov).unwrap(), 3.0);
        assert!(matches!(
            gaussian_quad_mean(&i, &DVector::zeros(3), &cov),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn quartic_chi_square() {
        // a ~ N(0, I_2): E[(aᵀa)²] = n(n + 2) = 8
        let i = DMatrix::identity(2, 2);
        let v = gaussian_quartic_mean(&i, &i, &DVector::zeros(2), &SymMatrix::identity(2)).unwrap();
        assert!((v - 8.0).abs() < 1e-14);
    }

    #[test]
    fn power_table_needs_four_levels() {
        assert!(matches!(
            cond_power_table(&[]),
            Err(Error::InsufficientSweep { needed: 4, got: 0 })
        ));
    }
}
