//! Typed views over flat `key = value` config files.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::costs::CostKind;
use crate::error::{Error, Result};
use crate::harness::ExperimentConfig;
use crate::kernels::KernelFamily;
use crate::kv::KvDoc;
use crate::linalg::SymMatrix;
use crate::problem::{GenConfig, Theta0Mode};

/// Keys with this prefix are run metadata and ignored when reading a config.
pub const METADATA_PREFIX: &str = "run.";

const GEN_KEYS: [&str; 7] = ["n", "N", "cond_target", "lambda1", "snr_target", "seed", "theta0"];

pub fn load(path: &Path) -> Result<KvDoc> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
    KvDoc::parse(&text)
}

fn check_keys(doc: &KvDoc, allowed: &[&str]) -> Result<()> {
    let allowed: BTreeSet<&str> = allowed.iter().copied().collect();
    for k in doc.keys() {
        if !k.starts_with(METADATA_PREFIX) && !allowed.contains(k) {
            return Err(Error::config(k, "unknown key"));
        }
    }
    Ok(())
}

fn value_or<T: std::str::FromStr>(doc: &KvDoc, key: &str, default: T) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    Ok(doc.parse_value(key)?.unwrap_or(default))
}

fn required<T: std::str::FromStr>(doc: &KvDoc, key: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    doc.parse_value(key)?.ok_or_else(|| Error::config(key, "missing"))
}

pub fn family(doc: &KvDoc) -> Result<KernelFamily> {
    doc.require("family")?.parse()
}

pub fn cost(doc: &KvDoc) -> Result<CostKind> {
    doc.require("cost")?.parse()
}

/// `n`, `N`, `cond_target`, `lambda1`, `snr_target`, `seed`, optional `theta0`.
pub fn gen_config(doc: &KvDoc) -> Result<GenConfig> {
    let n: usize = required(doc, "n")?;
    let theta0_mode = match doc.parse_list::<f64>("theta0")? {
        Some(v) => Theta0Mode::Supplied(v),
        None => Theta0Mode::UnitGaussian,
    };
    let cfg = GenConfig {
        n,
        sample_size: required(doc, "N")?,
        cond_target: value_or(doc, "cond_target", 1.0)?,
        lambda1: value_or(doc, "lambda1", 1.0)?,
        snr_target: value_or(doc, "snr_target", 5.0)?,
        seed: value_or(doc, "seed", 0)?,
        theta0_mode,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn generate_keys() -> Vec<&'static str> {
    GEN_KEYS.to_vec()
}

/// Where the data for `tune` and `bounds` comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Bundle(PathBuf),
    Generate(GenConfig),
}

/// `bundle = DIR` (relative to the config file) or the generation keys.
pub fn data_source(doc: &KvDoc, base: &Path) -> Result<DataSource> {
    match doc.get("bundle") {
        Some(dir) => Ok(DataSource::Bundle(base.join(dir))),
        None => Ok(DataSource::Generate(gen_config(doc)?)),
    }
}

/// Σ from `Sigma` (column-major) or `sigma_diag`; the identity when neither is set.
pub fn covariance(doc: &KvDoc, n: usize) -> Result<SymMatrix> {
    if let Some(v) = doc.parse_list::<f64>("Sigma")? {
        if v.len() != n * n {
            return Err(Error::config("Sigma", format!("needs {} entries", n * n)));
        }
        return SymMatrix::new(DMatrix::from_column_slice(n, n, &v))
            .map_err(|e| Error::config("Sigma", e.to_string()));
    }
    if let Some(d) = doc.parse_list::<f64>("sigma_diag")? {
        if d.len() != n {
            return Err(Error::config("sigma_diag", format!("needs {n} entries")));
        }
        if d.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::config("sigma_diag", "entries must be positive"));
        }
        return Ok(SymMatrix::from_diagonal(&d));
    }
    Ok(SymMatrix::identity(n))
}

pub fn positive(doc: &KvDoc, key: &str, default: f64) -> Result<f64> {
    let v: f64 = value_or(doc, key, default)?;
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::config(key, "must be positive"));
    }
    Ok(v)
}

pub fn eta(doc: &KvDoc, family: KernelFamily) -> Result<Vec<f64>> {
    let v: Vec<f64> = doc.parse_list("eta")?.ok_or_else(|| Error::config("eta", "missing"))?;
    if !family.in_interior(&v) {
        return Err(Error::config(
            "eta",
            format!("{v:?} is not an interior point for the {family} kernel"),
        ));
    }
    Ok(v)
}

pub const TUNE_KEYS: [&str; 14] = [
    "family", "cost", "bundle", "n", "N", "cond_target", "lambda1", "snr_target", "seed", "theta0",
    "Sigma", "sigma_diag", "sigma2", "starts",
];

pub const BOUNDS_KEYS: [&str; 11] = [
    "family", "eta", "bundle", "n", "N", "cond_target", "lambda1", "snr_target", "seed", "theta0",
    "instances",
];

pub const SWEEP_BOUNDS_KEYS: [&str; 2] = ["conds", "sigma2"];

pub const ASYMPTOTICS_KEYS: [&str; 9] = [
    "family", "n", "cond_target", "lambda1", "seed", "theta0", "Sigma", "sigma_diag", "sigma2",
];

pub const EXPERIMENT_KEYS: [&str; 9] = [
    "family", "n", "cond_target", "lambda1", "snr_target", "N_grid", "replicates", "seed", "theta0",
];

pub fn check_tune(doc: &KvDoc) -> Result<()> {
    check_keys(doc, &TUNE_KEYS)
}

pub fn check_bounds(doc: &KvDoc) -> Result<()> {
    let all: Vec<&str> = BOUNDS_KEYS.iter().chain(SWEEP_BOUNDS_KEYS.iter()).copied().collect();
    check_keys(doc, &all)
}

pub fn check_asymptotics(doc: &KvDoc) -> Result<()> {
    check_keys(doc, &ASYMPTOTICS_KEYS)
}

pub fn check_generate(doc: &KvDoc) -> Result<()> {
    check_keys(doc, &GEN_KEYS)
}

/// Reads an experiment config; missing keys take the desk defaults, or the
/// full-scale defaults when `full_scale` is set.
pub fn experiment_config(doc: &KvDoc, full_scale: bool) -> Result<ExperimentConfig> {
    check_keys(doc, &EXPERIMENT_KEYS)?;
    let base = if full_scale { ExperimentConfig::full_scale() } else { ExperimentConfig::desk() };
    let family = match doc.get("family") {
        Some(f) => f.parse()?,
        None => base.family,
    };
    let cfg = ExperimentConfig {
        family,
        n: value_or(doc, "n", base.n)?,
        cond_target: value_or(doc, "cond_target", base.cond_target)?,
        lambda1: value_or(doc, "lambda1", base.lambda1)?,
        snr_target: value_or(doc, "snr_target", base.snr_target)?,
        n_grid: doc.parse_list("N_grid")?.unwrap_or(base.n_grid),
        replicates: value_or(doc, "replicates", base.replicates)?,
        base_seed: value_or(doc, "seed", base.base_seed)?,
        theta0: doc.parse_list("theta0")?,
    };
    cfg.validate()?;
    Ok(cfg)
}
