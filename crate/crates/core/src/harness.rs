//! Monte Carlo comparison of EB and SURE_y tuning across sample sizes.

use std::fs;
use std::path::Path;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::asymptotics::{ols, ridge_eb_variance, ridge_sy_variance, sandwich_eb, sandwich_sy, variance_ratio};
use crate::costs::{fbar_eb_at, fbar_sy_at, wb_at, wy_at, CostContext, CostKind, LimitInputs};
use crate::error::{Error, Result};
use crate::estimators::{fit_g, fit_y, RlsSystem};
use crate::kernels::{kernel_matrix, HyperParams, KernelFamily};
use crate::kv::{format_float, format_list, KvDoc};
use crate::linalg::{frob_norm, SymMatrix};
use crate::optim::{minimize_cost, TuneOptions};
use crate::problem::{draw_problem, make_covariance};
use crate::rng;

/// Fraction of failed replicates above which the whole experiment fails.
pub const MAX_FAILURE_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub family: KernelFamily,
    pub n: usize,
    pub cond_target: f64,
    pub lambda1: f64,
    pub snr_target: f64,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub base_seed: u64,
    /// Fixed θ₀; drawn from `base_seed` when `None`.
    pub theta0: Option<Vec<f64>>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ExperimentConfig {
    /// Minutes-scale defaults.
    pub fn desk() -> Self {
        Self {
            family: KernelFamily::Ridge,
            n: 10,
            cond_target: 1e4,
            lambda1: 1.0,
            snr_target: 5.0,
            n_grid: vec![200, 500, 2000, 10_000, 50_000],
            replicates: 200,
            base_seed: 0,
            theta0: None,
        }
    }

    /// Full-size run: n = 50, cond(Σ) = 1e5, 1000 replicates.
    pub fn full_scale() -> Self {
        Self { n: 50, cond_target: 1e5, replicates: 1000, ..Self::desk() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("n", "must be at least 1"));
        }
        if self.replicates == 0 {
            return Err(Error::config("replicates", "must be at least 1"));
        }
        if self.n_grid.is_empty() {
            return Err(Error::config("N_grid", "must not be empty"));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("N_grid", "must be strictly increasing"));
        }
        if self.n_grid[0] <= self.n {
            return Err(Error::config("N_grid", "smallest N must exceed n"));
        }
        if !(self.cond_target >= 1.0) || !self.cond_target.is_finite() {
            return Err(Error::config("cond_target", "must be >= 1"));
        }
        if self.n == 1 && self.cond_target != 1.0 {
            return Err(Error::config("cond_target", "must be 1 when n = 1"));
        }
        if !(self.lambda1 > 0.0) || !self.lambda1.is_finite() {
            return Err(Error::config("lambda1", "must be positive"));
        }
        if !(self.snr_target > 0.0) || !self.snr_target.is_finite() {
            return Err(Error::config("snr_target", "must be positive"));
        }
        if let Some(t) = &self.theta0 {
            if t.len() != self.n {
                return Err(Error::config("theta0", format!("needs {} entries", self.n)));
            }
        }
        Ok(())
    }
}

/// One `(N, replicate)` outcome. Numeric fields are NaN when the replicate failed.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub sample_size: usize,
    pub replicate: usize,
    /// `ok` or an error code.
    pub status: String,
    pub sigma2: f64,
    pub fit_g_eb: f64,
    pub fit_g_sy: f64,
    pub fit_y_eb: f64,
    pub fit_y_sy: f64,
    /// `100 (1 − ‖ΦᵀΦ/N − Σ‖_F / ‖Σ‖_F)`.
    pub fit_pp: f64,
    /// `|F̄_EB(η*_b) − W_b(η*_b)|`.
    pub fbar_eb_gap: f64,
    /// `|F̄_Sy(η*_y) − W_y(η*_y)|`.
    pub fbar_sy_gap: f64,
    pub eta_eb_gap: f64,
    pub eta_sy_gap: f64,
    pub eta_eb: Vec<f64>,
    pub eta_sy: Vec<f64>,
    /// `√N (η̂_EB − η*_b)`.
    pub scaled_eb: Vec<f64>,
    pub scaled_sy: Vec<f64>,
}

impl Record {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    fn failed(sample_size: usize, replicate: usize, p: usize, e: &Error) -> Self {
        let nan = vec![f64::NAN; p];
        Self {
            sample_size,
            replicate,
            status: e.code().to_string(),
            sigma2: f64::NAN,
            fit_g_eb: f64::NAN,
            fit_g_sy: f64::NAN,
            fit_y_eb: f64::NAN,
            fit_y_sy: f64::NAN,
            fit_pp: f64::NAN,
            fbar_eb_gap: f64::NAN,
            fbar_sy_gap: f64::NAN,
            eta_eb_gap: f64::NAN,
            eta_sy_gap: f64::NAN,
            eta_eb: nan.clone(),
            eta_sy: nan.clone(),
            scaled_eb: nan.clone(),
            scaled_sy: nan,
        }
    }

    /// Scalar quantities in [`QUANTITIES`] order.
    pub fn quantities(&self) -> [f64; 9] {
        [
            self.fit_g_eb,
            self.fit_g_sy,
            self.fit_y_eb,
            self.fit_y_sy,
            self.fit_pp,
            self.fbar_eb_gap,
            self.fbar_sy_gap,
            self.eta_eb_gap,
            self.eta_sy_gap,
        ]
    }
}

pub const QUANTITIES: [&str; 9] = [
    "fit_g_eb",
    "fit_g_sy",
    "fit_y_eb",
    "fit_y_sy",
    "fit_pp",
    "fbar_eb_gap",
    "fbar_sy_gap",
    "eta_eb_gap",
    "eta_sy_gap",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub sample_size: usize,
    pub quantity: &'static str,
    pub mean: f64,
    pub median: f64,
    pub std_err: f64,
    pub n_valid: usize,
}

#[derive(Debug, Clone)]
pub struct McReport {
    pub config: ExperimentConfig,
    pub theta0: DVector<f64>,
    pub sigma: SymMatrix,
    pub eta_star_b: HyperParams,
    pub eta_star_y: HyperParams,
    /// Sorted by `(N, replicate)`.
    pub records: Vec<Record>,
    pub aggregates: Vec<Aggregate>,
}

impl McReport {
    pub fn records_at(&self, sample_size: usize) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(move |r| r.sample_size == sample_size && r.is_ok())
    }

    pub fn aggregate(&self, sample_size: usize, quantity: &str) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.sample_size == sample_size && a.quantity == quantity)
    }

    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| !r.is_ok()).count()
    }
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Deterministic fold over records sorted by `(N, replicate)`.
pub fn aggregate(records: &[Record], n_grid: &[usize]) -> Vec<Aggregate> {
    let mut out = Vec::new();
    for &big_n in n_grid {
        let rows: Vec<&Record> = records
            .iter()
            .filter(|r| r.sample_size == big_n && r.is_ok())
            .collect();
        for (qi, &name) in QUANTITIES.iter().enumerate() {
            let xs: Vec<f64> = rows
                .iter()
                .map(|r| r.quantities()[qi])
                .filter(|v| v.is_finite())
                .collect();
            let k = xs.len();
            let mean = if k > 0 { xs.iter().sum::<f64>() / k as f64 } else { f64::NAN };
            let std_err = if k > 1 {
                (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1) as f64 / k as f64).sqrt()
            } else {
                f64::NAN
            };
            out.push(Aggregate {
                sample_size: big_n,
                quantity: name,
                mean,
                median: median(&xs),
                std_err,
                n_valid: k,
            });
        }
    }
    out
}

/// Limit minimizers `(η*_b, η*_y)`. Neither depends on σ², so one pair serves
/// every replicate.
pub fn limit_optima(
    family: KernelFamily,
    theta0: &DVector<f64>,
    sigma: &SymMatrix,
    opts: &TuneOptions,
) -> Result<(HyperParams, HyperParams)> {
    if family == KernelFamily::Ridge {
        let (b, y) = crate::asymptotics::ridge_optima(theta0, sigma)?;
        return Ok((vec![b], vec![y]));
    }
    let ctx = CostContext::Limit(LimitInputs { theta0, sigma: Some(sigma), sigma2: 1.0 });
    let b = minimize_cost(CostKind::Wb, &ctx, family, opts)?.eta_hat;
    let y = minimize_cost(CostKind::Wy, &ctx, family, opts)?.eta_hat;
    Ok((b, y))
}

fn experiment_theta0(cfg: &ExperimentConfig) -> DVector<f64> {
    match &cfg.theta0 {
        Some(t) => DVector::from_column_slice(t),
        None => rng::normal_vector(&mut rng::stream(cfg.base_seed, &[rng::THETA0]), cfg.n),
    }
}

struct Setup<'a> {
    cfg: &'a ExperimentConfig,
    theta0: &'a DVector<f64>,
    sigma: &'a SymMatrix,
    eta_b: &'a [f64],
    eta_y: &'a [f64],
    opts: &'a TuneOptions,
}

fn run_replicate(s: &Setup, big_n: usize, r: usize) -> Result<Record> {
    let key = [big_n as u64, r as u64];
    let mut g = rng::stream(s.cfg.base_seed, &[rng::DATA, key[0], key[1]]);
    let prob = draw_problem(s.sigma, s.theta0, big_n, s.cfg.snr_target, &mut g)?;
    let family = s.cfg.family;
    let ctx = CostContext::Data(&prob);
    let eb = minimize_cost(CostKind::Eb, &ctx, family, s.opts)?;
    let sy = minimize_cost(CostKind::SureY, &ctx, family, s.opts)?;
    let n = s.cfg.n;
    let theta_eb = RlsSystem::new(&prob, &kernel_matrix(family, &eb.eta_hat, n)?)?.theta_hat;
    let theta_sy = RlsSystem::new(&prob, &kernel_matrix(family, &sy.eta_hat, n)?)?.theta_hat;

    let mut gv = rng::stream(s.cfg.base_seed, &[rng::NOISE_COPY, key[0], key[1]]);
    let vstar = rng::normal_vector(&mut gv, big_n) * prob.sigma2().sqrt();

    let pp = prob.gram().scale(1.0 / big_n as f64).sub(s.sigma);
    let fit_pp = 100.0 * (1.0 - frob_norm(pp.as_matrix()) / frob_norm(s.sigma.as_matrix()));

    let p_b = kernel_matrix(family, s.eta_b, n)?;
    let p_y = kernel_matrix(family, s.eta_y, n)?;
    let fbar_eb_gap = (fbar_eb_at(&prob, &p_b)? - wb_at(&p_b, s.theta0)?).abs();
    let fbar_sy_gap = (fbar_sy_at(&prob, &p_y)? - wy_at(&p_y, s.theta0, s.sigma, prob.sigma2())?).abs();

    let root = (big_n as f64).sqrt();
    let diff = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x - y).collect() };
    let d_eb = diff(&eb.eta_hat, s.eta_b);
    let d_sy = diff(&sy.eta_hat, s.eta_y);
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();

    Ok(Record {
        sample_size: big_n,
        replicate: r,
        status: "ok".into(),
        sigma2: prob.sigma2(),
        fit_g_eb: fit_g(&theta_eb, s.theta0)?,
        fit_g_sy: fit_g(&theta_sy, s.theta0)?,
        fit_y_eb: fit_y(&theta_eb, &prob, &vstar)?,
        fit_y_sy: fit_y(&theta_sy, &prob, &vstar)?,
        fit_pp,
        fbar_eb_gap,
        fbar_sy_gap,
        eta_eb_gap: norm(&d_eb),
        eta_sy_gap: norm(&d_sy),
        scaled_eb: d_eb.iter().map(|x| x * root).collect(),
        scaled_sy: d_sy.iter().map(|x| x * root).collect(),
        eta_eb: eb.eta_hat,
        eta_sy: sy.eta_hat,
    })
}

/// Runs every `(N, replicate)` pair. θ₀ and Σ are fixed per experiment; the
/// regressors and noise are redrawn per replicate from seeds derived from
/// `(base_seed, N, replicate)`, so the output does not depend on scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<McReport> {
    run_experiment_with(cfg, &TuneOptions::default())
}

pub fn run_experiment_with(cfg: &ExperimentConfig, opts: &TuneOptions) -> Result<McReport> {
    cfg.validate()?;
    let sigma = make_covariance(cfg.n, cfg.cond_target, cfg.lambda1, cfg.base_seed)?;
    let theta0 = experiment_theta0(cfg);
    let (eta_b, eta_y) = limit_optima(cfg.family, &theta0, &sigma, opts)?;
    let setup = Setup { cfg, theta0: &theta0, sigma: &sigma, eta_b: &eta_b, eta_y: &eta_y, opts };
    let jobs: Vec<(usize, usize)> = cfg
        .n_grid
        .iter()
        .flat_map(|&big_n| (0..cfg.replicates).map(move |r| (big_n, r)))
        .collect();
    let p = cfg.family.p();
    let records: Vec<Record> = jobs
        .par_iter()
        .map(|&(big_n, r)| {
            run_replicate(&setup, big_n, r).unwrap_or_else(|e| Record::failed(big_n, r, p, &e))
        })
        .collect();
    let failed = records.iter().filter(|r| !r.is_ok()).count();
    if failed as f64 > MAX_FAILURE_FRACTION * records.len() as f64 {
        return Err(Error::ExperimentFailed { failed, total: records.len() });
    }
    let aggregates = aggregate(&records, &cfg.n_grid);
    Ok(McReport { config: cfg.clone(), theta0, sigma, eta_star_b: eta_b, eta_star_y: eta_y, records, aggregates })
}

/// Per-component variance diagnostics for one estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceCheck {
    pub empirical: Vec<f64>,
    pub analytic: Vec<f64>,
    /// `empirical / analytic`.
    pub ratio: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalitySummary {
    pub sample_size: usize,
    pub replicates: usize,
    pub eb: VarianceCheck,
    pub sy: VarianceCheck,
    /// Empirical EB over SURE_y variance, first component.
    pub empirical_ratio: f64,
    /// Analytic EB over SURE_y variance, first component.
    pub analytic_ratio: f64,
}

pub const MIN_NORMALITY_REPLICATES: usize = 100;

fn sample_var(xs: &[f64]) -> f64 {
    let k = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / k;
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (k - 1.0)
}

/// Compares the spread of `√N(η̂ − η*)` at the largest N with the sandwich
/// covariances, evaluated at the mean σ² over replicates.
pub fn normality_diagnostics(report: &McReport) -> Result<NormalitySummary> {
    let big_n = *report.config.n_grid.last().ok_or_else(|| Error::config("N_grid", "empty"))?;
    let rows: Vec<&Record> = report.records_at(big_n).collect();
    if rows.len() < MIN_NORMALITY_REPLICATES {
        return Err(Error::InsufficientReplicates { needed: MIN_NORMALITY_REPLICATES, got: rows.len() });
    }
    let family = report.config.family;
    let sigma2 = rows.iter().map(|r| r.sigma2).sum::<f64>() / rows.len() as f64;
    let (t, s) = (&report.theta0, &report.sigma);
    let (an_eb, an_sy, analytic_ratio) = if family == KernelFamily::Ridge {
        (
            vec![ridge_eb_variance(t, s, sigma2)?],
            vec![ridge_sy_variance(t, s, sigma2)?],
            variance_ratio(t, s)?,
        )
    } else {
        let ce = sandwich_eb(family, &report.eta_star_b, t, s, sigma2)?.covariance;
        let cy = sandwich_sy(family, &report.eta_star_y, t, s, sigma2)?.covariance;
        let de: Vec<f64> = (0..family.p()).map(|k| ce[(k, k)]).collect();
        let dy: Vec<f64> = (0..family.p()).map(|k| cy[(k, k)]).collect();
        let ratio = de[0] / dy[0];
        (de, dy, ratio)
    };
    let check = |pick: &dyn Fn(&Record) -> &Vec<f64>, analytic: Vec<f64>| -> VarianceCheck {
        let empirical: Vec<f64> = (0..family.p())
            .map(|k| sample_var(&rows.iter().map(|r| pick(r)[k]).collect::<Vec<_>>()))
            .collect();
        let ratio = empirical.iter().zip(&analytic).map(|(e, a)| e / a).collect();
        VarianceCheck { empirical, analytic, ratio }
    };
    let eb = check(&|r| &r.scaled_eb, an_eb);
    let sy = check(&|r| &r.scaled_sy, an_sy);
    Ok(NormalitySummary {
        sample_size: big_n,
        replicates: rows.len(),
        empirical_ratio: eb.empirical[0] / sy.empirical[0],
        analytic_ratio,
        eb,
        sy,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Slope {
    pub quantity: &'static str,
    pub slope: f64,
    pub intercept: f64,
}

pub const GAP_QUANTITIES: [&str; 4] = ["fbar_eb_gap", "fbar_sy_gap", "eta_eb_gap", "eta_sy_gap"];

/// Least-squares line of `log(value)` against `log N`.
pub fn power_law_fit(ns: &[usize], values: &[f64]) -> Result<(f64, f64)> {
    if ns.len() < 4 {
        return Err(Error::InsufficientSweep { needed: 4, got: ns.len() });
    }
    if ns.len() != values.len() {
        return Err(Error::DimensionMismatch("grid and values differ in length".into()));
    }
    let x: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    Ok(ols(&x, &y))
}

/// Slopes of the median gaps against N on log-log axes.
pub fn convergence_slopes(report: &McReport) -> Result<Vec<Slope>> {
    let grid = &report.config.n_grid;
    GAP_QUANTITIES
        .iter()
        .map(|&q| {
            let med: Vec<f64> = grid
                .iter()
                .map(|&n| report.aggregate(n, q).map_or(f64::NAN, |a| a.median))
                .collect();
            let (slope, intercept) = power_law_fit(grid, &med)?;
            Ok(Slope { quantity: q, slope, intercept })
        })
        .collect()
}

fn list_header(prefix: &str, p: usize) -> Vec<String> {
    (1..=p).map(|k| format!("{prefix}_{k}")).collect()
}

/// Column order of `records.csv`.
pub fn records_header(p: usize) -> Vec<String> {
    let mut h: Vec<String> = ["N", "replicate", "status", "sigma2"].iter().map(|s| s.to_string()).collect();
    h.extend(QUANTITIES.iter().map(|s| s.to_string()));
    for prefix in ["eta_eb", "eta_sy", "scaled_eb", "scaled_sy"] {
        h.extend(list_header(prefix, p));
    }
    h
}

pub fn write_records(report: &McReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(records_header(report.config.family.p()))?;
    for r in &report.records {
        let mut row = vec![r.sample_size.to_string(), r.replicate.to_string(), r.status.clone(), format_float(r.sigma2)];
        row.extend(r.quantities().iter().map(|&v| format_float(v)));
        for v in [&r.eta_eb, &r.eta_sy, &r.scaled_eb, &r.scaled_sy] {
            row.extend(v.iter().map(|&x| format_float(x)));
        }
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregates(report: &McReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["N", "quantity", "mean", "median", "std_err", "n_valid"])?;
    for a in &report.aggregates {
        w.write_record([
            a.sample_size.to_string(),
            a.quantity.to_string(),
            format_float(a.mean),
            format_float(a.median),
            format_float(a.std_err),
            a.n_valid.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Experiment config as a key-value document; the manifest adds `run.*` keys.
pub fn config_to_kv(cfg: &ExperimentConfig) -> KvDoc {
    let mut d = KvDoc::new();
    d.set("family", cfg.family.name());
    d.set("n", cfg.n.to_string());
    d.set("cond_target", format_float(cfg.cond_target));
    d.set("lambda1", format_float(cfg.lambda1));
    d.set("snr_target", format_float(cfg.snr_target));
    d.set("N_grid", cfg.n_grid.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(","));
    d.set("replicates", cfg.replicates.to_string());
    d.set("seed", cfg.base_seed.to_string());
    if let Some(t) = &cfg.theta0 {
        d.set("theta0", format_list(t));
    }
    d
}

pub fn manifest(report: &McReport) -> KvDoc {
    let mut d = config_to_kv(&report.config);
    d.set("run.version", env!("CARGO_PKG_VERSION"));
    d.set("run.records", report.records.len().to_string());
    d.set("run.failed", report.failures().to_string());
    d.set("run.theta0", format_list(report.theta0.as_slice()));
    d.set("run.eta_star_b", format_list(&report.eta_star_b));
    d.set("run.eta_star_y", format_list(&report.eta_star_y));
    d
}

/// Writes the CSV outputs and `manifest.txt` into `dir`.
pub fn write_report(report: &McReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_records(report, &dir.join("records.csv"))?;
    write_aggregates(report, &dir.join("aggregates.csv"))?;
    fs::write(dir.join("manifest.txt"), manifest(report).render())?;
    Ok(())
}
