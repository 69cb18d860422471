//! Spread of sqrt(N)(eta_hat - eta*) against the sandwich variances for ridge.
//!
//! cargo run --release --example normality_check

use kernreg::harness::{normality_diagnostics, run_experiment, ExperimentConfig};

fn main() -> kernreg::Result<()> {
    let cfg = ExperimentConfig {
        n: 2,
        cond_target: 1e2,
        n_grid: vec![5000],
        replicates: 200,
        ..ExperimentConfig::desk()
    };
    let report = run_experiment(&cfg)?;
    let s = normality_diagnostics(&report)?;
    println!("N = {}, R = {}", s.sample_size, s.replicates);
    println!("EB     empirical {:.4e}  analytic {:.4e}", s.eb.empirical[0], s.eb.analytic[0]);
    println!("SURE_y empirical {:.4e}  analytic {:.4e}", s.sy.empirical[0], s.sy.analytic[0]);
    println!("EB/SURE_y variance: empirical {:.4}  analytic {:.4}", s.empirical_ratio, s.analytic_ratio);
    Ok(())
}
