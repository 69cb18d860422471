//! Command-line front end.
//!
//! Exit status 1 means the command line or config was rejected; 2 means the
//! computation itself failed.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use nalgebra::DVector;

use crate::asymptotics::{
    check_eb_bound, check_sy_bound, cond_power_table, cond_sweep, ridge_eb_variance, ridge_sy_variance,
    sandwich_eb, sandwich_sy, variance_ratio, SandwichCov, SweepSpec,
};
use crate::config::{self, DataSource};
use crate::costs::{CostContext, CostKind, LimitInputs};
use crate::error::{Error, Result};
use crate::harness::{
    convergence_slopes, limit_optima, normality_diagnostics, run_experiment, write_report, ExperimentConfig,
    McReport,
};
use crate::kv::{format_float, format_list, KvDoc};
use crate::optim::{minimize_cost, TuneOptions};
use crate::problem::{make_covariance, read_bundle, sample_problem, write_bundle, RegressionProblem};
use crate::rng;

const SCHEMAS: &str = "\
OUTPUT FILES
  generate     Phi.csv      header phi_1..phi_n, one row per sample t = 1..N
               Y.csv        header y, one row per sample
               V.csv        header v, the noise realization
               meta.txt     key = value: format, N, n, sigma2, snr, theta0, Sigma (column-major)
  tune         tune.txt     key = value: family, cost, eta_hat, cost_value, n_evals,
                            converged, restarts_used, near_ties
  bounds       bounds.csv   seed,N,cond_target,e1b,e2b,e3b,r1,eb_gap,eb_bound,eb_holds,
                            e1y,e2y,e3y,e4y,e5y,r2,delta_N,e2y_display,e5y_display,
                            sy_gap,sy_bound,sy_holds
               power_table.csv  term,rate,cond_gram_power,cond_p_power,empirical_slope
                            (only when `conds` is set)
  asymptotics  asymptotics.txt  key = value: eta_star_b, eta_star_y, sandwich factors
                            (row-major), variance_ratio
  sweep        records.csv  N,replicate,status,sigma2,fit_g_eb,fit_g_sy,fit_y_eb,fit_y_sy,
                            fit_pp,fbar_eb_gap,fbar_sy_gap,eta_eb_gap,eta_sy_gap,
                            eta_eb_k,eta_sy_k,scaled_eb_k,scaled_sy_k (k = 1..p)
               aggregates.csv  N,quantity,mean,median,std_err,n_valid
               slopes.csv   quantity,slope,intercept (log median gap against log N)
               manifest.txt the config plus run.* metadata; re-reads as a config
  normality    the sweep files plus normality.txt

Floating-point values are written with 17 significant digits.
Config files are flat `key = value` text; `#` starts a comment.";

#[derive(Debug, Parser)]
#[command(
    name = "kernreg",
    version,
    about = "Kernel-regularized least squares with EB and SURE hyper-parameter tuning",
    after_help = SCHEMAS
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Config file (flat key = value)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; nothing is written outside it
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Overrides the `seed` key of the config
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads for parallel sections
    #[arg(long, global = true, value_name = "INT")]
    threads: Option<usize>,
    /// Use n = 50, cond = 1e5, R = 1000 as defaults for sweep and normality
    #[arg(long, global = true)]
    full_scale: bool,
    /// Only print errors
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a synthetic regression problem and write it as a bundle
    Generate,
    /// Minimize a cost over the kernel hyper-parameters
    Tune,
    /// Evaluate the finite-sample bound terms and check both inequalities
    Bounds,
    /// Sandwich covariances at the limit minimizers and the ridge variance ratio
    Asymptotics,
    /// Monte Carlo sweep over N comparing EB and SURE_y
    Sweep,
    /// Sweep, then compare the spread of the tuned hyper-parameters with the sandwich variances
    Normality,
}

struct Ctx {
    doc: KvDoc,
    base: PathBuf,
    out: Option<PathBuf>,
    quiet: bool,
    full_scale: bool,
}

impl Ctx {
    fn say(&self, text: &str) {
        if !self.quiet {
            println!("{text}");
        }
    }

    fn out_file(&self, name: &str) -> Result<Option<PathBuf>> {
        match &self.out {
            None => Ok(None),
            Some(d) => {
                fs::create_dir_all(d)?;
                Ok(Some(d.join(name)))
            }
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig { .. } | Error::Parse { .. } => 1,
        _ => 2,
    }
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let mut doc = match &cli.config {
        Some(p) => config::load(p)?,
        None => KvDoc::new(),
    };
    if let Some(s) = cli.seed {
        doc.set("seed", s.to_string());
    }
    let base = cli
        .config
        .as_deref()
        .and_then(Path::parent)
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let ctx = Ctx { doc, base, out: cli.out, quiet: cli.quiet, full_scale: cli.full_scale };
    if cli.config.is_none() && matches!(cli.command, Command::Tune | Command::Bounds | Command::Generate) {
        return Err(Error::config("config", "this subcommand needs --config"));
    }
    if let Some(0) = cli.threads {
        return Err(Error::config("threads", "must be at least 1"));
    }
    let work = || match cli.command {
        Command::Generate => generate(&ctx),
        Command::Tune => tune(&ctx),
        Command::Bounds => bounds(&ctx),
        Command::Asymptotics => asymptotics(&ctx),
        Command::Sweep => sweep(&ctx).map(|_| ()),
        Command::Normality => normality(&ctx),
    };
    match cli.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::config("threads", e.to_string()))?
            .install(work),
        None => work(),
    }
}

fn generate(ctx: &Ctx) -> Result<()> {
    config::check_generate(&ctx.doc)?;
    let cfg = config::gen_config(&ctx.doc)?;
    let out = ctx.out.as_ref().ok_or_else(|| Error::config("out", "generate needs --out"))?;
    let problem = sample_problem(&cfg)?;
    write_bundle(&problem, out)?;
    ctx.say(&format!(
        "wrote N = {} n = {} sigma2 = {} to {}",
        problem.sample_size(),
        problem.order(),
        format_float(problem.sigma2()),
        out.display()
    ));
    Ok(())
}

fn load_problem(ctx: &Ctx) -> Result<RegressionProblem> {
    match config::data_source(&ctx.doc, &ctx.base)? {
        DataSource::Bundle(dir) => read_bundle(&dir),
        DataSource::Generate(cfg) => sample_problem(&cfg),
    }
}

fn tune(ctx: &Ctx) -> Result<()> {
    let doc = &ctx.doc;
    config::check_tune(doc)?;
    let family = config::family(doc)?;
    let kind = config::cost(doc)?;
    let mut opts = TuneOptions::default();
    if let Some(s) = doc.parse_value::<usize>("starts")? {
        if s == 0 {
            return Err(Error::config("starts", "must be at least 1"));
        }
        opts.starts = Some(s);
    }
    let limit_only = matches!(kind, CostKind::Wb | CostKind::Wy)
        && doc.get("bundle").is_none()
        && doc.get("N").is_none();
    let problem;
    let theta0;
    let sigma;
    let result = if limit_only {
        theta0 = DVector::from_vec(
            doc.parse_list::<f64>("theta0")?
                .ok_or_else(|| Error::config("theta0", "missing"))?,
        );
        if theta0.is_empty() {
            return Err(Error::config("theta0", "must not be empty"));
        }
        sigma = config::covariance(doc, theta0.len())?;
        let sigma2 = config::positive(doc, "sigma2", 1.0)?;
        let c = CostContext::Limit(LimitInputs { theta0: &theta0, sigma: Some(&sigma), sigma2 });
        minimize_cost(kind, &c, family, &opts)?
    } else {
        problem = load_problem(ctx)?;
        minimize_cost(kind, &CostContext::Data(&problem), family, &opts)?
    };
    let mut kv = KvDoc::new();
    kv.set("family", family.name());
    kv.set("cost", kind.name());
    kv.set("eta_hat", format_list(&result.eta_hat));
    kv.set("cost_value", format_float(result.cost));
    kv.set("n_evals", result.n_evals.to_string());
    kv.set("converged", result.converged.to_string());
    kv.set("restarts_used", result.restarts_used.to_string());
    kv.set(
        "near_ties",
        result.near_ties.iter().map(|t| format!("[{}]", format_list(t))).collect::<Vec<_>>().join(" "),
    );
    ctx.say(kv.render().trim_end());
    if let Some(path) = ctx.out_file("tune.txt")? {
        fs::write(path, kv.render())?;
    }
    Ok(())
}

fn bounds(ctx: &Ctx) -> Result<()> {
    let doc = &ctx.doc;
    config::check_bounds(doc)?;
    let family = config::family(doc)?;
    let eta = config::eta(doc, family)?;
    let instances: usize = doc.parse_value("instances")?.unwrap_or(1);
    if instances == 0 {
        return Err(Error::config("instances", "must be at least 1"));
    }
    let problems: Vec<(u64, f64, RegressionProblem)> = match config::data_source(doc, &ctx.base)? {
        DataSource::Bundle(dir) => {
            if instances != 1 {
                return Err(Error::config("instances", "a bundle holds exactly one instance"));
            }
            vec![(0, f64::NAN, read_bundle(&dir)?)]
        }
        DataSource::Generate(cfg) => (0..instances as u64)
            .map(|i| {
                let mut c = cfg.clone();
                c.seed = cfg.seed.wrapping_add(i);
                Ok((c.seed, c.cond_target, sample_problem(&c)?))
            })
            .collect::<Result<_>>()?,
    };
    if eta.len() != family.p() {
        return Err(Error::config("eta", "wrong length"));
    }
    let mut csv_rows = Vec::new();
    let mut violations = (0, 0);
    let mut text = String::new();
    for (seed, cond, p) in &problems {
        let (cb, eb) = check_eb_bound(p, family, &eta)?;
        let (cy, sy) = check_sy_bound(p, family, &eta)?;
        violations.0 += usize::from(!cb.holds());
        violations.1 += usize::from(!cy.holds());
        let _ = writeln!(
            text,
            "seed {seed}: E1b {} E2b {} E3b {} r1 {} |Fbar_EB - W_b| {} <= {} {}",
            format_float(eb.e1b),
            format_float(eb.e2b),
            format_float(eb.e3b),
            eb.r1,
            format_float(cb.gap),
            format_float(cb.bound),
            if cb.holds() { "holds" } else { "VIOLATED" }
        );
        let _ = writeln!(
            text,
            "seed {seed}: E1y {} E2y {} E3y {} E4y {} E5y {} r2 {} |Fbar_Sy - W_y| {} <= {} {}",
            format_float(sy.e1y),
            format_float(sy.e2y),
            format_float(sy.e3y),
            format_float(sy.e4y),
            format_float(sy.e5y),
            sy.r2,
            format_float(cy.gap),
            format_float(cy.bound),
            if cy.holds() { "holds" } else { "VIOLATED" }
        );
        let mut row = vec![seed.to_string(), p.sample_size().to_string(), format_float(*cond)];
        row.extend(eb.values().iter().map(|&v| format_float(v)));
        row.push(eb.r1.to_string());
        row.extend([format_float(cb.gap), format_float(cb.bound), cb.holds().to_string()]);
        row.extend(sy.values().iter().map(|&v| format_float(v)));
        row.push(sy.r2.to_string());
        row.extend([sy.delta_n, sy.e2y_display, sy.e5y_display, cy.gap, cy.bound].map(format_float));
        row.push(cy.holds().to_string());
        csv_rows.push(row);
    }
    let _ = write!(
        text,
        "verdict: EB bound {} ({} violations), SURE_y bound {} ({} violations) over {} instances",
        if violations.0 == 0 { "holds" } else { "fails" },
        violations.0,
        if violations.1 == 0 { "holds" } else { "fails" },
        violations.1,
        problems.len()
    );
    ctx.say(&text);
    if let Some(path) = ctx.out_file("bounds.csv")? {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "seed", "N", "cond_target", "e1b", "e2b", "e3b", "r1", "eb_gap", "eb_bound", "eb_holds", "e1y",
            "e2y", "e3y", "e4y", "e5y", "r2", "delta_N", "e2y_display", "e5y_display", "sy_gap", "sy_bound",
            "sy_holds",
        ])?;
        for r in &csv_rows {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    if let Some(conds) = doc.parse_list::<f64>("conds")? {
        let gen = config::gen_config(doc)?;
        let spec = SweepSpec {
            family,
            eta: eta.clone(),
            n: gen.n,
            sample_size: gen.sample_size,
            sigma2: config::positive(doc, "sigma2", 1.0)?,
            conds,
            seed: gen.seed,
        };
        let table = cond_power_table(&cond_sweep(&spec)?)?;
        let mut t = String::from("term  rate             cond(PhiTPhi)  cond(P)  empirical slope\n");
        for r in &table {
            let _ = writeln!(
                t,
                "{:<5} {:<16} {:>13}  {:>7}  {:.3}",
                r.entry.term, r.entry.rate, r.entry.cond_gram_power, r.entry.cond_p_power, r.slope
            );
        }
        ctx.say(t.trim_end());
        if let Some(path) = ctx.out_file("power_table.csv")? {
            let mut w = csv::Writer::from_path(path)?;
            w.write_record(["term", "rate", "cond_gram_power", "cond_p_power", "empirical_slope"])?;
            for r in &table {
                w.write_record([
                    r.entry.term.to_string(),
                    r.entry.rate.to_string(),
                    r.entry.cond_gram_power.to_string(),
                    r.entry.cond_p_power.to_string(),
                    format_float(r.slope),
                ])?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn matrix_kv(kv: &mut KvDoc, key: &str, m: &crate::linalg::SymMatrix) {
    // row-major; the matrix is symmetric so this equals column-major
    kv.set(key, format_list(m.as_matrix().as_slice()));
}

fn sandwich_kv(kv: &mut KvDoc, prefix: &str, s: &SandwichCov) {
    matrix_kv(kv, &format!("{prefix}_hessian"), &s.a);
    matrix_kv(kv, &format!("{prefix}_score_cov"), &s.b);
    matrix_kv(kv, &format!("{prefix}_covariance"), &s.covariance);
}

fn asymptotics(ctx: &Ctx) -> Result<()> {
    let doc = &ctx.doc;
    config::check_asymptotics(doc)?;
    let family = match doc.get("family") {
        Some(f) => f.parse()?,
        None => crate::kernels::KernelFamily::Ridge,
    };
    let seed: u64 = doc.parse_value("seed")?.unwrap_or(0);
    let theta0 = match doc.parse_list::<f64>("theta0")? {
        Some(v) if v.is_empty() => return Err(Error::config("theta0", "must not be empty")),
        Some(v) => DVector::from_vec(v),
        None => {
            let n: usize = doc.parse_value("n")?.unwrap_or(2);
            if n == 0 {
                return Err(Error::config("n", "must be at least 1"));
            }
            rng::normal_vector(&mut rng::stream(seed, &[rng::THETA0]), n)
        }
    };
    let n = theta0.len();
    let sigma = if doc.get("Sigma").is_some() || doc.get("sigma_diag").is_some() {
        config::covariance(doc, n)?
    } else {
        let cond = config::positive(doc, "cond_target", 1.0)?;
        let lambda1 = config::positive(doc, "lambda1", 1.0)?;
        make_covariance(n, cond, lambda1, seed)?
    };
    let sigma2 = config::positive(doc, "sigma2", 1.0)?;
    let (eta_b, eta_y) = limit_optima(family, &theta0, &sigma, &TuneOptions::default())?;
    let eb = sandwich_eb(family, &eta_b, &theta0, &sigma, sigma2)?;
    let sy = sandwich_sy(family, &eta_y, &theta0, &sigma, sigma2)?;
    let mut kv = KvDoc::new();
    kv.set("family", family.name());
    kv.set("theta0", format_list(theta0.as_slice()));
    kv.set("sigma2", format_float(sigma2));
    kv.set("eta_star_b", format_list(&eta_b));
    kv.set("eta_star_y", format_list(&eta_y));
    sandwich_kv(&mut kv, "eb", &eb);
    sandwich_kv(&mut kv, "sy", &sy);
    kv.set("variance_ratio", format_float(variance_ratio(&theta0, &sigma)?));
    if family == crate::kernels::KernelFamily::Ridge {
        kv.set("ridge_eb_variance", format_float(ridge_eb_variance(&theta0, &sigma, sigma2)?));
        kv.set("ridge_sy_variance", format_float(ridge_sy_variance(&theta0, &sigma, sigma2)?));
    }
    ctx.say(kv.render().trim_end());
    if let Some(path) = ctx.out_file("asymptotics.txt")? {
        fs::write(path, kv.render())?;
    }
    Ok(())
}

fn experiment(ctx: &Ctx) -> Result<ExperimentConfig> {
    config::experiment_config(&ctx.doc, ctx.full_scale)
}

fn sweep_with(ctx: &Ctx, cfg: &ExperimentConfig) -> Result<McReport> {
    let report = run_experiment(cfg)?;
    let mut text = format!(
        "{} records ({} failed); eta*_b = [{}], eta*_y = [{}]\n     N  median fit_g EB/Sy    median fit_y EB/Sy    median Fbar gap EB/Sy",
        report.records.len(),
        report.failures(),
        format_list(&report.eta_star_b),
        format_list(&report.eta_star_y)
    );
    for &n in &cfg.n_grid {
        let m = |q: &str| report.aggregate(n, q).map_or(f64::NAN, |a| a.median);
        let _ = write!(
            text,
            "\n{n:>6}  {:>8.3} {:>8.3}     {:>8.3} {:>8.3}     {:>10.4e} {:>10.4e}",
            m("fit_g_eb"),
            m("fit_g_sy"),
            m("fit_y_eb"),
            m("fit_y_sy"),
            m("fbar_eb_gap"),
            m("fbar_sy_gap")
        );
    }
    let slopes = if cfg.n_grid.len() >= 4 { Some(convergence_slopes(&report)?) } else { None };
    if let Some(s) = &slopes {
        for row in s {
            let _ = write!(text, "\nslope {}: {:.4} (intercept {:.4})", row.quantity, row.slope, row.intercept);
        }
    }
    ctx.say(&text);
    if let Some(dir) = &ctx.out {
        write_report(&report, dir)?;
        if let Some(s) = &slopes {
            let mut w = csv::Writer::from_path(dir.join("slopes.csv"))?;
            w.write_record(["quantity", "slope", "intercept"])?;
            for row in s {
                w.write_record([row.quantity.to_string(), format_float(row.slope), format_float(row.intercept)])?;
            }
            w.flush()?;
        }
    }
    Ok(report)
}

fn sweep(ctx: &Ctx) -> Result<McReport> {
    let cfg = experiment(ctx)?;
    sweep_with(ctx, &cfg)
}

fn normality(ctx: &Ctx) -> Result<()> {
    let cfg = experiment(ctx)?;
    if cfg.replicates < crate::harness::MIN_NORMALITY_REPLICATES {
        return Err(Error::config(
            "replicates",
            format!("normality needs at least {}", crate::harness::MIN_NORMALITY_REPLICATES),
        ));
    }
    let report = sweep_with(ctx, &cfg)?;
    let s = normality_diagnostics(&report)?;
    let mut kv = KvDoc::new();
    kv.set("N", s.sample_size.to_string());
    kv.set("replicates", s.replicates.to_string());
    kv.set("eb_empirical_variance", format_list(&s.eb.empirical));
    kv.set("eb_analytic_variance", format_list(&s.eb.analytic));
    kv.set("eb_ratio", format_list(&s.eb.ratio));
    kv.set("sy_empirical_variance", format_list(&s.sy.empirical));
    kv.set("sy_analytic_variance", format_list(&s.sy.analytic));
    kv.set("sy_ratio", format_list(&s.sy.ratio));
    kv.set("empirical_eb_over_sy", format_float(s.empirical_ratio));
    kv.set("analytic_eb_over_sy", format_float(s.analytic_ratio));
    ctx.say(kv.render().trim_end());
    if let Some(path) = ctx.out_file("normality.txt")? {
        fs::write(path, kv.render())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn help_exits_zero_and_bad_flags_one() {
        assert_eq!(run(["kernreg", "--help"]), 0);
        assert_eq!(run(["kernreg", "frobnicate"]), 1);
        assert_eq!(run(["kernreg", "tune"]), 1);
    }
}
