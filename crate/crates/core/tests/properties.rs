mod common;

use common::*;
use kernreg::asymptotics::{gaussian_quad_mean, ridge_optima, variance_ratio};
use kernreg::costs::{
    cost_eb, cost_fbar_sy, cost_msey, cost_sure_y, eb_at, fbar_sy_offset, sure_y_at, CostContext, CostKind,
};
use kernreg::estimators::{fit_g, rls_estimate};
use kernreg::harness::{manifest, median, run_experiment, write_records, ExperimentConfig};
use kernreg::kernels::{inv_kernel_derivatives, kernel_hess, kernel_matrix, KernelFamily};
use kernreg::kv::{format_float, KvDoc};
use kernreg::linalg::{cholesky_solve, cond_number, eigen_sym, fro_inverse_bound, frob_norm, logdet_pd, SymMatrix};
use kernreg::optim::{minimize_cost, TuneOptions};
use kernreg::problem::{make_covariance, sample_problem, GenConfig, Theta0Mode};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn eta_strategy(family: KernelFamily) -> BoxedStrategy<Vec<f64>> {
    let c = (-3.0f64..3.0).prop_map(|e| 10f64.powf(e));
    match family {
        KernelFamily::Ridge => c.prop_map(|c| vec![c]).boxed(),
        KernelFamily::Tc | KernelFamily::Ss => (c, 0.05f64..0.99).prop_map(|(c, a)| vec![c, a]).boxed(),
        KernelFamily::Dc => (c, 0.05f64..0.99, -0.95f64..0.95).prop_map(|(c, a, r)| vec![c, a, r]).boxed(),
    }
}

fn family_and_eta() -> impl Strategy<Value = (KernelFamily, Vec<f64>)> {
    prop_oneof![
        eta_strategy(KernelFamily::Ridge).prop_map(|e| (KernelFamily::Ridge, e)),
        eta_strategy(KernelFamily::Tc).prop_map(|e| (KernelFamily::Tc, e)),
        eta_strategy(KernelFamily::Dc).prop_map(|e| (KernelFamily::Dc, e)),
        eta_strategy(KernelFamily::Ss).prop_map(|e| (KernelFamily::Ss, e)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn kernels_are_psd((family, eta) in family_and_eta(), n in 1usize..12) {
        let p = kernel_matrix(family, &eta, n).unwrap();
        let min = eigen_sym(&p).min();
        prop_assert!(min >= -1e-12 * p.trace(), "{family} {eta:?}: {min}");
    }

    #[test]
    fn mixed_partials_are_symmetric((family, eta) in family_and_eta(), n in 1usize..8) {
        for k in 0..family.p() {
            for l in 0..family.p() {
                let a = kernel_hess(family, &eta, n, k, l).unwrap();
                let b = kernel_hess(family, &eta, n, l, k).unwrap();
                prop_assert_eq!(a.as_matrix(), b.as_matrix());
            }
        }
    }

    #[test]
    fn float_text_round_trips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
        let back: f64 = format_float(x).parse().unwrap();
        prop_assert_eq!(back.to_bits(), x.to_bits());
    }

    #[test]
    fn reparameterization_round_trips((family, eta) in family_and_eta()) {
        let x = family.to_unconstrained(&eta).unwrap();
        let back = family.from_unconstrained(&x);
        for (a, b) in back.iter().zip(&eta) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cholesky_solve_inverts(seed in any::<u64>(), n in 1usize..10) {
        let a = sym(random_spd(&mut rng(seed), n, 0.1));
        let x = cholesky_solve(&a, &DMatrix::identity(n, n)).unwrap();
        let cond = cond_number(&a).unwrap();
        let err = (&x * a.as_matrix() - DMatrix::<f64>::identity(n, n)).amax();
        prop_assert!(err <= 1e-8f64.max(1e3 * cond * f64::EPSILON), "err {err}, cond {cond}");
    }

    #[test]
    fn logdet_is_sum_of_log_eigenvalues(seed in any::<u64>(), n in 1usize..50) {
        let a = sym(random_spd(&mut rng(seed), n, 1.0));
        let want: f64 = eigen_sym(&a).values.iter().map(|l| l.ln()).sum();
        prop_assert!((logdet_pd(&a).unwrap() - want).abs() <= 1e-9);
    }

    #[test]
    fn frobenius_bound_dominates(seed in any::<u64>(), n in 1usize..8, shift in 1e-4f64..1.0) {
        let a = sym(random_spd(&mut rng(seed), n, shift));
        prop_assert!(fro_inverse_bound(&a).unwrap() >= frob_norm(&inv(a.as_matrix())) * (1.0 - 1e-12));
    }

    #[test]
    fn generation_is_reproducible(seed in any::<u64>(), n in 1usize..6, extra in 1usize..40) {
        let cfg = GenConfig {
            n,
            sample_size: n + extra,
            cond_target: if n == 1 { 1.0 } else { 100.0 },
            lambda1: 1.0,
            snr_target: 5.0,
            seed,
            theta0_mode: Theta0Mode::UnitGaussian,
        };
        let a = sample_problem(&cfg).unwrap();
        let b = sample_problem(&cfg).unwrap();
        prop_assert_eq!(a.phi(), b.phi());
        prop_assert_eq!(a.y(), b.y());
        prop_assert_eq!(a.sigma2().to_bits(), b.sigma2().to_bits());
    }

    #[test]
    fn derivatives_match_central_differences(
        (family, eta) in prop_oneof![
            ((0.1f64..10.0), (0.2f64..0.95)).prop_map(|(c, a)| (KernelFamily::Tc, vec![c, a])),
            ((0.1f64..10.0), (0.2f64..0.95)).prop_map(|(c, a)| (KernelFamily::Ss, vec![c, a])),
            ((0.1f64..10.0), (0.2f64..0.95), (-0.8f64..0.8)).prop_map(|(c, a, r)| (KernelFamily::Dc, vec![c, a, r])),
        ],
        n in 2usize..6,
    ) {
        let d = inv_kernel_derivatives(family, &eta, n).unwrap();
        let p_of = |e: &[f64]| kernel_matrix(family, e, n).unwrap().into_matrix();
        for k in 0..family.p() {
            let h = 1e-6 * (1.0 + eta[k].abs());
            let fd = central_difference(p_of, &eta, k, h);
            prop_assert!(matrix_rel_err(d.dp[k].as_matrix(), &fd) <= 1e-5);
            for l in 0..family.p() {
                let grad = |e: &[f64]| inv_kernel_derivatives(family, e, n).unwrap().dp[l].as_matrix().clone();
                let fd = central_difference(grad, &eta, k, 1e-5 * (1.0 + eta[k].abs()));
                prop_assert!(matrix_rel_err(d.d2p[k][l].as_matrix(), &fd) <= 1e-5);
            }
        }
    }

    #[test]
    fn covariance_condition_is_exact(seed in any::<u64>(), n in 2usize..20, idx in 0usize..4) {
        let cond = [1.0, 10.0, 1e3, 1e5][idx];
        let s = make_covariance(n, cond, 1.0, seed).unwrap();
        prop_assert!(rel_err(cond_number(&s).unwrap(), cond) <= 1e-10);
    }

    #[test]
    fn fit_g_is_perfect_only_at_truth(seed in any::<u64>(), n in 2usize..10, bump in 1e-6f64..1.0) {
        let mut r = rng(seed);
        let t0 = gaussian_vector(&mut r, n);
        prop_assume!(t0.iter().any(|v| (v - t0[0]).abs() > 1e-3));
        prop_assert_eq!(fit_g(&t0, &t0).unwrap(), 100.0);
        let mut th = t0.clone();
        th[seed as usize % n] += bump;
        prop_assert!(fit_g(&th, &t0).unwrap() < 100.0);
    }

    #[test]
    fn ridge_shrinkage_is_monotone(seed in 0u64..1000) {
        let p = problem(4, 40, 100.0, seed);
        let norms: Vec<f64> = (0..=30)
            .map(|i| {
                let t = 10f64.powf(-3.0 + 0.2 * i as f64);
                rls_estimate(&p, &SymMatrix::identity(4).scale(t)).unwrap().theta_hat.norm()
            })
            .collect();
        for w in norms.windows(2) {
            prop_assert!(w[1] >= w[0] * (1.0 - 1e-12));
        }
    }

    #[test]
    fn n_form_costs_match_dense((family, eta) in family_and_eta(), seed in 0u64..1000) {
        let p = problem(3, 12, 10.0, seed);
        let k = kernel_matrix(family, &eta, 3).unwrap();
        prop_assume!(eigen_sym(&k).min() > 1e-10 * k.trace());
        let d = Dense::new(&p, &k);
        prop_assert!(rel_err(eb_at(&p, &k).unwrap(), d.eb()) <= 1e-7 || (eb_at(&p, &k).unwrap() - d.eb()).abs() <= 1e-7);
        prop_assert!(rel_err(sure_y_at(&p, &k).unwrap(), d.sure_y()) <= 1e-7);
    }

    #[test]
    fn fbar_sy_offset_is_eta_free(seed in 0u64..1000, e1 in eta_strategy(KernelFamily::Tc), e2 in eta_strategy(KernelFamily::Tc)) {
        let p = problem(4, 50, 100.0, seed);
        let big_n = p.sample_size() as f64;
        let off = |e: &[f64]| cost_fbar_sy(&p, KernelFamily::Tc, e).unwrap() / big_n - cost_sure_y(&p, KernelFamily::Tc, e).unwrap();
        let (a, b) = (off(&e1), off(&e2));
        let scale = 1.0 + cost_sure_y(&p, KernelFamily::Tc, &e1).unwrap().abs();
        prop_assert!((a - b).abs() <= 1e-9 * scale, "{a} vs {b}");
        prop_assert!((a - fbar_sy_offset(&p)).abs() <= 1e-9 * scale);
    }

    #[test]
    fn variance_ratio_ignores_theta_scale(seed in any::<u64>(), n in 2usize..8, c in prop_oneof![-100.0f64..-0.01, 0.01f64..100.0]) {
        let mut r = rng(seed);
        let sigma = sym(random_spd(&mut r, n, 0.1));
        let t = gaussian_vector(&mut r, n);
        let a = variance_ratio(&t, &sigma).unwrap();
        let b = variance_ratio(&(&t * c), &sigma).unwrap();
        prop_assert!(rel_err(b, a) <= 1e-10);
    }

    #[test]
    fn quad_mean_is_linear(seed in any::<u64>(), n in 1usize..6) {
        let mut r = rng(seed);
        let a = gaussian_matrix(&mut r, n, n);
        let b = gaussian_matrix(&mut r, n, n);
        let mu = gaussian_vector(&mut r, n);
        let cov = sym(random_spd(&mut r, n, 0.1));
        let sum = gaussian_quad_mean(&(&a + &b), &mu, &cov).unwrap();
        let parts = gaussian_quad_mean(&a, &mu, &cov).unwrap() + gaussian_quad_mean(&b, &mu, &cov).unwrap();
        prop_assert!((sum - parts).abs() <= 1e-12 * (1.0 + sum.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn msey_minimizer_beats_sure_y_minimizer(seed in 0u64..1000) {
        let p = problem(5, 60, 100.0, seed);
        let ctx = CostContext::Data(&p);
        let opts = TuneOptions::default();
        let own = minimize_cost(CostKind::MseY, &ctx, KernelFamily::Tc, &opts).unwrap();
        let sy = minimize_cost(CostKind::SureY, &ctx, KernelFamily::Tc, &opts).unwrap();
        let at_own = cost_msey(&p, KernelFamily::Tc, &own.eta_hat).unwrap();
        let at_sy = cost_msey(&p, KernelFamily::Tc, &sy.eta_hat).unwrap();
        prop_assert!(at_own <= at_sy + 1e-9, "{at_own} vs {at_sy}");
    }
}

#[test]
fn gram_deviation_shrinks_in_median() {
    let med = |big_n: usize| {
        let xs: Vec<f64> = (0..20)
            .map(|s| {
                let p = problem(4, big_n, 10.0, s);
                frob_norm(p.gram().scale(1.0 / big_n as f64).sub(p.covariance()).as_matrix())
            })
            .collect();
        median(&xs)
    };
    let (a, b, c) = (med(100), med(1000), med(10_000));
    assert!(a >= b && b >= c, "{a} {b} {c}");
}

#[test]
fn tuned_hyperparameters_converge_in_median() {
    let opts = TuneOptions::default();
    let gaps = |big_n: usize| {
        let (mut eb, mut sy) = (Vec::new(), Vec::new());
        for s in 0..50 {
            let p = problem(5, big_n, 10.0, 1000 + s);
            let (b, y) = ridge_optima(p.theta0(), p.covariance()).unwrap();
            let ctx = CostContext::Data(&p);
            eb.push((minimize_cost(CostKind::Eb, &ctx, KernelFamily::Ridge, &opts).unwrap().eta_hat[0] - b).abs());
            sy.push((minimize_cost(CostKind::SureY, &ctx, KernelFamily::Ridge, &opts).unwrap().eta_hat[0] - y).abs());
        }
        (median(&eb), median(&sy))
    };
    let (e1, s1) = gaps(200);
    let (e2, s2) = gaps(2000);
    let (e3, s3) = gaps(20_000);
    assert!(e1 > e2 && e2 > e3, "EB {e1} {e2} {e3}");
    assert!(s1 > s2 && s2 > s3, "SURE_y {s1} {s2} {s3}");
}

fn tiny_experiment() -> ExperimentConfig {
    ExperimentConfig {
        family: KernelFamily::Tc,
        n: 4,
        cond_target: 100.0,
        n_grid: vec![50, 200, 800],
        replicates: 12,
        base_seed: 5,
        ..ExperimentConfig::desk()
    }
}

#[test]
fn experiment_csv_is_byte_identical() {
    let cfg = tiny_experiment();
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    write_records(&run_experiment(&cfg).unwrap(), &a).unwrap();
    write_records(&run_experiment(&cfg).unwrap(), &b).unwrap();
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn aggregates_do_not_depend_on_scheduling() {
    let cfg = tiny_experiment();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| run_experiment(&cfg)).unwrap();
    let b = four.install(|| run_experiment(&cfg)).unwrap();
    assert_eq!(a.aggregates, b.aggregates);
}

#[test]
fn fit_pp_improves_with_sample_size() {
    let report = run_experiment(&tiny_experiment()).unwrap();
    let med: Vec<f64> = [50, 200, 800].iter().map(|&n| report.aggregate(n, "fit_pp").unwrap().median).collect();
    assert!(med[0] <= med[1] && med[1] <= med[2], "{med:?}");
}

#[test]
fn manifest_reparses_to_same_config() {
    let cfg = tiny_experiment();
    let report = run_experiment(&cfg).unwrap();
    let doc = KvDoc::parse(&manifest(&report).render()).unwrap();
    assert_eq!(kernreg::config::experiment_config(&doc, false).unwrap(), cfg);
}

#[test]
fn eb_cost_is_eta_continuous_near_optimum() {
    let p = problem(3, 30, 10.0, 3);
    let ctx = CostContext::Data(&p);
    let r = minimize_cost(CostKind::Eb, &ctx, KernelFamily::Ridge, &TuneOptions::default()).unwrap();
    let at = |e: f64| cost_eb(&p, KernelFamily::Ridge, &[e]).unwrap();
    let e = r.eta_hat[0];
    assert!(at(e) <= at(e * 1.001) && at(e) <= at(e * 0.999));
}
