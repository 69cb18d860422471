//! Every data-driven and oracle cost tuned on one data set, for each kernel.

use kernreg::costs::{CostContext, CostKind};
use kernreg::estimators::{fit_g, rls_estimate};
use kernreg::kernels::{kernel_matrix, KernelFamily};
use kernreg::optim::{minimize_cost, TuneOptions};
use kernreg::problem::{sample_problem, GenConfig, Theta0Mode};

fn main() -> kernreg::Result<()> {
    let problem = sample_problem(&GenConfig {
        n: 20,
        sample_size: 300,
        cond_target: 1e3,
        lambda1: 1.0,
        snr_target: 5.0,
        seed: 11,
        theta0_mode: Theta0Mode::UnitGaussian,
    })?;
    let ctx = CostContext::Data(&problem);
    let opts = TuneOptions::default();
    println!("{:<6} {:<6} {:>10} {:>8}  eta_hat", "kernel", "cost", "cost", "Fit_g");
    for family in [KernelFamily::Ridge, KernelFamily::Tc, KernelFamily::Dc, KernelFamily::Ss] {
        for kind in [CostKind::Eb, CostKind::SureY, CostKind::Eeb, CostKind::MseY] {
            let r = minimize_cost(kind, &ctx, family, &opts)?;
            let p = kernel_matrix(family, &r.eta_hat, problem.order())?;
            let est = rls_estimate(&problem, &p)?;
            let fit = fit_g(&est.theta_hat, problem.theta0())?;
            let eta: Vec<String> = r.eta_hat.iter().map(|v| format!("{v:.4}")).collect();
            println!("{:<6} {:<6} {:>10.3} {:>8.2}  [{}]", family.name(), kind.name(), r.cost, fit, eta.join(", "));
        }
    }
    Ok(())
}
