//! A small Monte Carlo sweep over N comparing EB and SURE_y.
//!
//! cargo run --release --example convergence_sweep -- [out_dir]

use kernreg::harness::{convergence_slopes, run_experiment, write_report, ExperimentConfig};

fn main() -> kernreg::Result<()> {
    let cfg = ExperimentConfig {
        n: 5,
        cond_target: 1e3,
        n_grid: vec![100, 300, 1000, 3000],
        replicates: 50,
        ..ExperimentConfig::desk()
    };
    let report = run_experiment(&cfg)?;
    println!("{:>6} {:>10} {:>10} {:>10} {:>10}", "N", "Fit_g EB", "Fit_g Sy", "Fit_y EB", "Fit_y Sy");
    for &n in &cfg.n_grid {
        let m = |q| report.aggregate(n, q).map_or(f64::NAN, |a| a.median);
        println!(
            "{n:>6} {:>10.2} {:>10.2} {:>10.2} {:>10.2}",
            m("fit_g_eb"),
            m("fit_g_sy"),
            m("fit_y_eb"),
            m("fit_y_sy")
        );
    }
    for s in convergence_slopes(&report)? {
        println!("log-log slope of {}: {:.3}", s.quantity, s.slope);
    }
    if let Some(dir) = std::env::args().nth(1) {
        write_report(&report, dir.as_ref())?;
        println!("records written to {dir}");
    }
    Ok(())
}
