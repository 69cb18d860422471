//! Draws an ill-conditioned regression problem and writes it as a bundle.
//!
//! cargo run --example generate_problem -- /tmp/bundle

use kernreg::linalg::cond_number;
use kernreg::problem::{compute_snr, read_bundle, sample_problem, write_bundle, GenConfig, Theta0Mode};

fn main() -> kernreg::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "generated_bundle".into());
    let cfg = GenConfig {
        n: 10,
        sample_size: 500,
        cond_target: 1e4,
        lambda1: 1.0,
        snr_target: 5.0,
        seed: 7,
        theta0_mode: Theta0Mode::UnitGaussian,
    };
    let problem = sample_problem(&cfg)?;
    println!("cond(Sigma)   = {:.1}", cond_number(problem.covariance())?);
    println!("cond(Phi'Phi) = {:.1}", cond_number(problem.gram())?);
    println!("snr           = {:.6}", compute_snr(&problem));
    println!("sigma2        = {:.6}", problem.sigma2());

    write_bundle(&problem, dir.as_ref())?;
    let back = read_bundle(dir.as_ref())?;
    assert_eq!(back.y(), problem.y());
    println!("bundle written to {dir}");
    Ok(())
}
