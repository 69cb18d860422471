//! Finite-sample bounds on |Fbar - W| and how the bound terms grow with cond(Phi'Phi).

use kernreg::asymptotics::{check_eb_bound, check_sy_bound, cond_power_table, cond_sweep, SweepSpec};
use kernreg::kernels::KernelFamily;
use kernreg::problem::{sample_problem, GenConfig, Theta0Mode};

fn main() -> kernreg::Result<()> {
    let family = KernelFamily::Dc;
    let eta = [2.0, 0.9, 0.3];
    for seed in 0..5 {
        let problem = sample_problem(&GenConfig {
            n: 6,
            sample_size: 300,
            cond_target: 100.0,
            lambda1: 1.0,
            snr_target: 5.0,
            seed,
            theta0_mode: Theta0Mode::UnitGaussian,
        })?;
        let (cb, eb) = check_eb_bound(&problem, family, &eta)?;
        let (cy, sy) = check_sy_bound(&problem, family, &eta)?;
        println!(
            "seed {seed}: EB gap {:.3e} <= {:.3e} ({:?})   SURE_y gap {:.3e} <= {:.3e} ({:?})",
            cb.gap,
            eb.total(),
            cb.holds(),
            cy.gap,
            sy.total(),
            cy.holds()
        );
    }

    let points = cond_sweep(&SweepSpec {
        family,
        eta: eta.to_vec(),
        n: 6,
        sample_size: 300,
        sigma2: 1.0,
        conds: vec![10.0, 100.0, 1e3, 1e4, 1e5],
        seed: 0,
    })?;
    println!("\nterm  table power of cond(Phi'Phi)  empirical slope");
    for row in cond_power_table(&points)? {
        println!("{:<5} {:>27}  {:>15.3}", row.entry.term, row.entry.cond_gram_power, row.slope);
    }
    Ok(())
}
