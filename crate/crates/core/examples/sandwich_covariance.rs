//! Asymptotic covariances of the EB and SURE_y hyper-parameter estimators.

use kernreg::asymptotics::{ridge_eb_variance, ridge_sy_variance, sandwich_eb, sandwich_sy, variance_ratio};
use kernreg::harness::limit_optima;
use kernreg::kernels::KernelFamily;
use kernreg::linalg::SymMatrix;
use kernreg::optim::TuneOptions;
use kernreg::problem::make_covariance;
use nalgebra::DVector;

fn main() -> kernreg::Result<()> {
    let theta0 = DVector::from_vec(vec![1.0, -0.5, 0.25, 0.8]);
    let sigma = make_covariance(4, 1e3, 1.0, 5)?;
    let sigma2 = 0.5;

    let (b, y) = limit_optima(KernelFamily::Ridge, &theta0, &sigma, &TuneOptions::default())?;
    let eb = sandwich_eb(KernelFamily::Ridge, &b, &theta0, &sigma, sigma2)?;
    let sy = sandwich_sy(KernelFamily::Ridge, &y, &theta0, &sigma, sigma2)?;
    println!("ridge: eta*_b = {:.5}, eta*_y = {:.5}", b[0], y[0]);
    println!("  EB     sandwich {:.6e}  closed form {:.6e}", eb.covariance[(0, 0)], ridge_eb_variance(&theta0, &sigma, sigma2)?);
    println!("  SURE_y sandwich {:.6e}  closed form {:.6e}", sy.covariance[(0, 0)], ridge_sy_variance(&theta0, &sigma, sigma2)?);

    // the ratio tends to 1/n^2 as the smallest eigenvalue of Sigma goes to 0
    for n in [2usize, 5] {
        let mut d = vec![1.0; n];
        d[n - 1] = 1e-8;
        let t = DVector::from_element(n, 1.0);
        let r = variance_ratio(&t, &SymMatrix::from_diagonal(&d))?;
        println!("variance_ratio(n = {n}, lambda_n = 1e-8) = {r:.6}  (1/n^2 = {:.6})", 1.0 / (n * n) as f64);
    }

    let (b, y) = limit_optima(KernelFamily::Tc, &theta0, &sigma, &TuneOptions::default())?;
    let eb = sandwich_eb(KernelFamily::Tc, &b, &theta0, &sigma, sigma2)?;
    let sy = sandwich_sy(KernelFamily::Tc, &y, &theta0, &sigma, sigma2)?;
    println!("\nTC: eta*_b = {b:.4?}, eta*_y = {y:.4?}");
    println!("EB covariance {:.4e}", eb.covariance.as_matrix());
    println!("SURE_y covariance {:.4e}", sy.covariance.as_matrix());
    Ok(())
}
