//! Synthetic linear regression problems `Y = Φθ₀ + V` with Gaussian regressors.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::kv::{format_float, format_list, KvDoc};
use crate::linalg::{gram, Cholesky, SymMatrix};
use crate::rng;

/// How the true parameter is produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Theta0Mode {
    /// i.i.d. standard normal entries drawn from the config seed.
    UnitGaussian,
    Supplied(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    /// Model order.
    pub n: usize,
    /// Number of samples.
    pub sample_size: usize,
    pub cond_target: f64,
    /// Largest eigenvalue of Σ.
    pub lambda1: f64,
    pub snr_target: f64,
    pub seed: u64,
    pub theta0_mode: Theta0Mode,
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("n", "must be at least 1"));
        }
        if self.sample_size <= self.n {
            return Err(Error::config("N", "must exceed n"));
        }
        validate_covariance_args(self.n, self.cond_target, self.lambda1)?;
        if !(self.snr_target > 0.0) || !self.snr_target.is_finite() {
            return Err(Error::config("snr_target", "must be positive"));
        }
        if let Theta0Mode::Supplied(v) = &self.theta0_mode {
            if v.len() != self.n {
                return Err(Error::config(
                    "theta0",
                    format!("has {} entries, expected n = {}", v.len(), self.n),
                ));
            }
        }
        Ok(())
    }
}

fn validate_covariance_args(n: usize, cond_target: f64, lambda1: f64) -> Result<()> {
    if !(cond_target >= 1.0) || !cond_target.is_finite() {
        return Err(Error::config("cond_target", "must be >= 1"));
    }
    if !(lambda1 > 0.0) || !lambda1.is_finite() {
        return Err(Error::config("lambda1", "must be positive"));
    }
    if n == 1 && cond_target != 1.0 {
        return Err(Error::config("cond_target", "must be 1 when n = 1"));
    }
    Ok(())
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// diagonal of R made positive.
pub fn random_orthogonal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let g = rng::normal_matrix(rng, n, n);
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Spectrum `λ₁ … λₙ` spaced geometrically from `lambda1` down to `lambda1 / cond_target`.
pub fn geometric_spectrum(n: usize, cond_target: f64, lambda1: f64) -> Vec<f64> {
    if n == 1 {
        return vec![lambda1];
    }
    (0..n)
        .map(|i| {
            if i == n - 1 {
                lambda1 / cond_target
            } else {
                lambda1 * cond_target.powf(-(i as f64) / (n - 1) as f64)
            }
        })
        .collect()
}

/// `Σ = U diag(λ) Uᵀ` with a seeded Haar rotation and geometric spectrum.
pub fn make_covariance(n: usize, cond_target: f64, lambda1: f64, seed: u64) -> Result<SymMatrix> {
    validate_covariance_args(n, cond_target, lambda1)?;
    let spectrum = geometric_spectrum(n, cond_target, lambda1);
    let mut r = rng::stream(seed, &[rng::COVARIANCE]);
    let u = random_orthogonal(&mut r, n);
    let d = DMatrix::from_diagonal(&DVector::from_vec(spectrum));
    Ok(SymMatrix::symmetrized(&u * d * u.transpose()))
}

/// A regression data set with its oracle information.
#[derive(Debug, Clone)]
pub struct RegressionProblem {
    phi: DMatrix<f64>,
    y: DVector<f64>,
    theta0: DVector<f64>,
    sigma2: f64,
    sigma: SymMatrix,
    noise: Option<DVector<f64>>,
    gram: SymMatrix,
    gram_chol: Cholesky,
    phi_t_y: DVector<f64>,
    yy: f64,
}

impl RegressionProblem {
    pub fn new(
        phi: DMatrix<f64>,
        y: DVector<f64>,
        theta0: DVector<f64>,
        sigma2: f64,
        sigma: SymMatrix,
        noise: Option<DVector<f64>>,
    ) -> Result<Self> {
        let (big_n, n) = phi.shape();
        if n == 0 || big_n < n {
            return Err(Error::DimensionMismatch(format!(
                "need N >= n >= 1, got N = {big_n}, n = {n}"
            )));
        }
        if y.len() != big_n {
            return Err(Error::DimensionMismatch(format!(
                "Y has {} entries, Phi has {big_n} rows",
                y.len()
            )));
        }
        if theta0.len() != n || sigma.dim() != n {
            return Err(Error::DimensionMismatch(
                "theta0 / Sigma do not match the number of regressors".into(),
            ));
        }
        if let Some(v) = &noise {
            if v.len() != big_n {
                return Err(Error::DimensionMismatch("V has wrong length".into()));
            }
        }
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::config("sigma2", "must be positive"));
        }
        sigma.cholesky()?;
        let gram = gram(&phi);
        let gram_chol = gram
            .cholesky()
            .map_err(|e| Error::RankDeficient(format!("PhiᵀPhi not positive definite: {e}")))?;
        let phi_t_y = phi.tr_mul(&y);
        let yy = y.norm_squared();
        Ok(Self {
            phi,
            y,
            theta0,
            sigma2,
            sigma,
            noise,
            gram,
            gram_chol,
            phi_t_y,
            yy,
        })
    }

    /// Same design, new outputs `Φθ₀ + v`.
    pub fn with_noise(&self, v: DVector<f64>) -> Result<Self> {
        if v.len() != self.sample_size() {
            return Err(Error::DimensionMismatch("V has wrong length".into()));
        }
        let y = &self.phi * &self.theta0 + &v;
        let mut p = self.clone();
        p.phi_t_y = p.phi.tr_mul(&y);
        p.yy = y.norm_squared();
        p.y = y;
        p.noise = Some(v);
        Ok(p)
    }

    pub fn sample_size(&self) -> usize {
        self.phi.nrows()
    }

    pub fn order(&self) -> usize {
        self.phi.ncols()
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn theta0(&self) -> &DVector<f64> {
        &self.theta0
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Ground-truth regressor covariance Σ.
    pub fn covariance(&self) -> &SymMatrix {
        &self.sigma
    }

    pub fn noise(&self) -> Option<&DVector<f64>> {
        self.noise.as_ref()
    }

    /// `ΦᵀΦ`.
    pub fn gram(&self) -> &SymMatrix {
        &self.gram
    }

    pub fn gram_cholesky(&self) -> &Cholesky {
        &self.gram_chol
    }

    /// `ΦᵀY`.
    pub fn phi_t_y(&self) -> &DVector<f64> {
        &self.phi_t_y
    }

    /// `YᵀY`.
    pub fn yty(&self) -> f64 {
        self.yy
    }
}

/// Variance of the noise-free output divided by σ².
pub fn compute_snr(problem: &RegressionProblem) -> f64 {
    output_variance(problem.phi(), problem.theta0()) / problem.sigma2()
}

fn output_variance(phi: &DMatrix<f64>, theta0: &DVector<f64>) -> f64 {
    let f = phi * theta0;
    let mean = f.mean();
    f.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / f.len() as f64
}

/// Draws `N` rows `φ ~ N(0, Σ)`, solves σ² so the realized snr equals
/// `snr_target`, and adds Gaussian noise.
pub fn draw_problem<R: Rng + ?Sized>(
    sigma: &SymMatrix,
    theta0: &DVector<f64>,
    sample_size: usize,
    snr_target: f64,
    rng: &mut R,
) -> Result<RegressionProblem> {
    let n = sigma.dim();
    if sample_size <= n {
        return Err(Error::config("N", "must exceed n"));
    }
    let l = sigma.cholesky()?;
    let z = rng::normal_matrix(rng, sample_size, n);
    let phi = z * l.factor().transpose();
    let var = output_variance(&phi, theta0);
    if !(var > 0.0) {
        return Err(Error::config(
            "theta0",
            "noise-free output has zero variance; snr cannot be enforced",
        ));
    }
    let sigma2 = var / snr_target;
    let v = rng::normal_vector(rng, sample_size) * sigma2.sqrt();
    let y = &phi * theta0 + &v;
    RegressionProblem::new(phi, y, theta0.clone(), sigma2, sigma.clone(), Some(v))
}

/// θ₀ for a config: supplied, or standard normal from the config seed.
pub fn theta0_for(cfg: &GenConfig) -> DVector<f64> {
    match &cfg.theta0_mode {
        Theta0Mode::Supplied(v) => DVector::from_column_slice(v),
        Theta0Mode::UnitGaussian => {
            let mut r = rng::stream(cfg.seed, &[rng::THETA0]);
            rng::normal_vector(&mut r, cfg.n)
        }
    }
}

const MAX_RANK_RETRIES: u64 = 3;

/// Deterministic given `cfg.seed`. Retries with the next sub-seed when the
/// drawn regressors are numerically rank deficient.
pub fn sample_problem(cfg: &GenConfig) -> Result<RegressionProblem> {
    cfg.validate()?;
    let sigma = make_covariance(cfg.n, cfg.cond_target, cfg.lambda1, cfg.seed)?;
    let theta0 = theta0_for(cfg);
    let mut last = None;
    for attempt in 0..=MAX_RANK_RETRIES {
        let mut r = rng::stream(cfg.seed, &[rng::DATA, attempt]);
        match draw_problem(&sigma, &theta0, cfg.sample_size, cfg.snr_target, &mut r) {
            Err(e @ Error::RankDeficient(_)) => last = Some(e),
            other => return other,
        }
    }
    Err(last.unwrap_or_else(|| Error::RankDeficient("retries exhausted".into())))
}

/// `(1/N) Σ (Xᵢ − X̄)(Xᵢ − X̄)ᵀ`.
pub fn empirical_covariance(samples: &[DVector<f64>]) -> Result<SymMatrix> {
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    let n = samples[0].len();
    if n == 0 || samples.iter().any(|s| s.len() != n) {
        return Err(Error::DimensionMismatch("samples differ in length".into()));
    }
    let count = samples.len() as f64;
    let mean = samples.iter().fold(DVector::zeros(n), |acc, s| acc + s) / count;
    let mut c = DMatrix::zeros(n, n);
    for s in samples {
        let d = s - &mean;
        c.ger(1.0, &d, &d, 1.0);
    }
    Ok(SymMatrix::symmetrized(c / count))
}

pub const BUNDLE_FORMAT: &str = "kernreg-bundle-v1";

/// Writes a bundle directory. `V.csv` is only written when the noise is known.
///
/// `Phi.csv` holds one row per sample with columns `phi_1..phi_n`.
/// `Sigma` in `meta.txt` is a flat list in column-major order.
pub fn write_bundle(problem: &RegressionProblem, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let n = problem.order();
    let mut w = csv::Writer::from_path(dir.join("Phi.csv"))?;
    w.write_record((1..=n).map(|j| format!("phi_{j}")))?;
    for row in problem.phi().row_iter() {
        w.write_record(row.iter().map(|&x| format_float(x)))?;
    }
    w.flush()?;
    write_column(&dir.join("Y.csv"), "y", problem.y())?;
    if let Some(v) = problem.noise() {
        write_column(&dir.join("V.csv"), "v", v)?;
    }
    let mut meta = KvDoc::new();
    meta.set("format", BUNDLE_FORMAT);
    meta.set("layout", "Phi.csv rows are samples t=1..N, columns phi_1..phi_n; Sigma is column-major");
    meta.set("N", problem.sample_size().to_string());
    meta.set("n", n.to_string());
    meta.set("sigma2", format_float(problem.sigma2()));
    meta.set("snr", format_float(compute_snr(problem)));
    meta.set("theta0", format_list(problem.theta0().as_slice()));
    meta.set("Sigma", format_list(problem.covariance().as_matrix().as_slice()));
    fs::write(dir.join("meta.txt"), meta.render())?;
    Ok(())
}

fn write_column(path: &Path, header: &str, v: &DVector<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([header])?;
    for &x in v.iter() {
        w.write_record([format_float(x)])?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|e| Error::parse(path.display().to_string(), e)))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_bundle(dir: &Path) -> Result<RegressionProblem> {
    let meta = KvDoc::parse(&fs::read_to_string(dir.join("meta.txt"))?)?;
    if meta.get("format") != Some(BUNDLE_FORMAT) {
        return Err(Error::config("format", format!("expected {BUNDLE_FORMAT}")));
    }
    let big_n: usize = meta.parse_value("N")?.ok_or_else(|| Error::config("N", "missing"))?;
    let n: usize = meta.parse_value("n")?.ok_or_else(|| Error::config("n", "missing"))?;
    let sigma2: f64 = meta
        .parse_value("sigma2")?
        .ok_or_else(|| Error::config("sigma2", "missing"))?;
    let theta0: Vec<f64> = meta
        .parse_list("theta0")?
        .ok_or_else(|| Error::config("theta0", "missing"))?;
    let sig: Vec<f64> = meta
        .parse_list("Sigma")?
        .ok_or_else(|| Error::config("Sigma", "missing"))?;
    if sig.len() != n * n || theta0.len() != n {
        return Err(Error::DimensionMismatch("meta.txt sizes disagree with n".into()));
    }
    let rows = read_rows(&dir.join("Phi.csv"))?;
    if rows.len() != big_n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch("Phi.csv shape disagrees with meta.txt".into()));
    }
    let phi = DMatrix::from_fn(big_n, n, |i, j| rows[i][j]);
    let y: Vec<f64> = read_rows(&dir.join("Y.csv"))?.into_iter().flatten().collect();
    let v_path = dir.join("V.csv");
    let noise = if v_path.exists() {
        Some(DVector::from_vec(
            read_rows(&v_path)?.into_iter().flatten().collect(),
        ))
    } else {
        None
    };
    RegressionProblem::new(
        phi,
        DVector::from_vec(y),
        DVector::from_vec(theta0),
        sigma2,
        SymMatrix::new(DMatrix::from_column_slice(n, n, &sig))?,
        noise,
    )
}
