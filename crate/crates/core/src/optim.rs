//! Multi-start Nelder-Mead over the unconstrained hyper-parameter coordinates.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::costs::{evaluate, CostContext, CostKind};
use crate::error::{Error, Result};
use crate::kernels::{HyperParams, KernelFamily};

#[derive(Debug, Clone, PartialEq)]
pub struct TuneOptions {
    /// Number of start points; `None` picks 8 for p ≤ 2 and 16 for p = 3.
    pub starts: Option<usize>,
    pub max_evals: usize,
    /// Simplex diameter, in unconstrained coordinates, that counts as converged.
    pub tol: f64,
    /// Local minima whose cost is within this of the best are reported as near ties.
    pub tie_tol: f64,
}

impl Default for TuneOptions {
    fn default() -> Self {
        Self { starts: None, max_evals: 4000, tol: 1e-9, tie_tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub eta_hat: HyperParams,
    pub cost: f64,
    pub n_evals: usize,
    pub converged: bool,
    pub restarts_used: usize,
    /// Other local minima within `tie_tol` of the best cost.
    pub near_ties: Vec<HyperParams>,
}

#[derive(Debug, Clone)]
pub struct LocalMin {
    pub x: Vec<f64>,
    pub f: f64,
    pub n_evals: usize,
    pub converged: bool,
}

/// Plain Nelder-Mead with the standard coefficients (1, 2, 0.5, 0.5).
/// Non-finite function values are treated as `+∞`.
pub fn nelder_mead<F>(f: F, x0: &[f64], step: f64, tol: f64, max_evals: usize) -> LocalMin
where
    F: Fn(&[f64]) -> f64,
{
    let d = x0.len();
    let evals = std::cell::Cell::new(0usize);
    let eval = |x: &[f64]| {
        evals.set(evals.get() + 1);
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for i in 0..d {
        let mut x = x0.to_vec();
        x[i] += step;
        let v = eval(&x);
        simplex.push((x, v));
    }
    let order = |s: &mut Vec<(Vec<f64>, f64)>| {
        s.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| cmp_lex(&a.0, &b.0)))
    };
    let diameter = |s: &[(Vec<f64>, f64)]| {
        s[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(&s[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    };
    order(&mut simplex);
    let mut converged = false;
    while evals.get() < max_evals {
        if diameter(&simplex) < tol {
            converged = true;
            break;
        }
        let worst = simplex[d].clone();
        let centroid: Vec<f64> = (0..d)
            .map(|j| simplex[..d].iter().map(|(x, _)| x[j]).sum::<f64>() / d as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect()
        };
        let xr = along(1.0);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = eval(&xe);
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let xc = along(0.5);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(-0.5);
                let fc = eval(&xc);
                (xc, fc)
            };
            if fc < worst.1.min(fr) {
                simplex[d] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = best.iter().zip(&v.0).map(|(b, y)| b + 0.5 * (y - b)).collect();
                    let fx = eval(&x);
                    *v = (x, fx);
                }
            }
        }
        order(&mut simplex);
    }
    if !converged && diameter(&simplex) < tol {
        converged = true;
    }
    let (x, fx) = simplex.swap_remove(0);
    LocalMin { x, f: fx, n_evals: evals.get(), converged }
}

fn cmp_lex(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// Radical inverse in base `b`.
fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= b as f64;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

/// Deterministic low-discrepancy start points in unconstrained coordinates.
/// Ranges: log c ∈ [−8, 8], α ∈ [0.1, 0.99] mapped by logit, atanh ρ ∈ [−2, 2].
pub fn start_points(family: KernelFamily, count: usize) -> Vec<Vec<f64>> {
    const BASES: [u64; 3] = [2, 3, 5];
    let lo_a = (0.1f64 / 0.9).ln();
    let hi_a = (0.99f64 / 0.01).ln();
    (0..count as u64)
        .map(|i| {
            (0..family.p())
                .map(|k| {
                    // offset by 1/2 cell so the first point sits mid-range
                    let u = (radical_inverse(i, BASES[k]) + 0.5 / count as f64).fract();
                    match k {
                        0 => -8.0 + 16.0 * u,
                        1 => lo_a + (hi_a - lo_a) * u,
                        _ => -2.0 + 4.0 * u,
                    }
                })
                .collect()
        })
        .collect()
}

fn default_starts(family: KernelFamily) -> usize {
    if family.p() <= 2 {
        8
    } else {
        16
    }
}

/// Minimizes `f(η)` from a deterministic set of starts and merges the local
/// minima by `(cost, η)` order.
pub fn minimize<F>(family: KernelFamily, f: F, opts: &TuneOptions) -> Result<TuneResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let count = opts.starts.unwrap_or_else(|| default_starts(family)).max(1);
    let starts = start_points(family, count);
    let objective = |x: &[f64]| f(&family.from_unconstrained(x));
    let mut mins: Vec<LocalMin> = starts
        .par_iter()
        .map(|x0| {
            let first = nelder_mead(objective, x0, 1.0, opts.tol, opts.max_evals);
            if !first.f.is_finite() {
                return first;
            }
            // restart from the result to avoid premature collapse
            let second = nelder_mead(objective, &first.x, 0.1, opts.tol, opts.max_evals);
            let pick = if second.f <= first.f { second.clone() } else { first.clone() };
            LocalMin { n_evals: first.n_evals + second.n_evals, ..pick }
        })
        .collect();
    let n_evals = mins.iter().map(|m| m.n_evals).sum();
    mins.retain(|m| m.f.is_finite());
    if mins.is_empty() {
        return Err(Error::NoFiniteCost);
    }
    let mut etas: Vec<(HyperParams, &LocalMin)> =
        mins.iter().map(|m| (family.from_unconstrained(&m.x), m)).collect();
    etas.sort_by(|a, b| a.1.f.total_cmp(&b.1.f).then_with(|| cmp_lex(&a.0, &b.0)));
    let (best_eta, best) = (&etas[0].0, etas[0].1);
    let mut near_ties: Vec<HyperParams> = Vec::new();
    for (eta, m) in &etas[1..] {
        let distinct = eta
            .iter()
            .zip(best_eta)
            .any(|(a, b)| (a - b).abs() > 1e-6 * (1.0 + b.abs()));
        let fresh = near_ties.iter().all(|t| {
            t.iter().zip(eta).any(|(a, b)| (a - b).abs() > 1e-6 * (1.0 + b.abs()))
        });
        if m.f - best.f <= opts.tie_tol && distinct && fresh {
            near_ties.push(eta.clone());
        }
    }
    Ok(TuneResult {
        eta_hat: best_eta.clone(),
        cost: best.f,
        n_evals,
        converged: best.converged,
        restarts_used: count,
        near_ties,
    })
}

/// Tunes `family` by minimizing `kind`; costs at non-PD `η` count as `+∞`.
pub fn minimize_cost(
    kind: CostKind,
    ctx: &CostContext,
    family: KernelFamily,
    opts: &TuneOptions,
) -> Result<TuneResult> {
    minimize(
        family,
        |eta| evaluate(kind, ctx, family, eta).unwrap_or(f64::INFINITY),
        opts,
    )
}
