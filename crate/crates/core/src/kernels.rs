//! Kernel families `P(η)` with analytic derivatives.
//!
//! Indices in the formulas run from 1, so entry `(i, j)` of the matrix uses
//! `i + 1` and `j + 1`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// Hyper-parameter vector `η`; layout is family specific (see [`KernelFamily`]).
pub type HyperParams = Vec<f64>;

/// Margin used by the reparameterization to keep α and ρ off the boundary.
pub const REPARAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KernelFamily {
    /// `η = (η)`, `P = ηI`.
    Ridge,
    /// Tuned/correlated: `η = (c, α)`, `P_ij = c α^max(i,j)`.
    Tc,
    /// Diagonal/correlated: `η = (c, α, ρ)`, `P_ij = c α^((i+j)/2) ρ^|i-j|`.
    Dc,
    /// Stable spline: `η = (c, α)`, `P_ij = c (α^(i+j+m)/2 − α^(3m)/6)` with `m = max(i,j)`.
    Ss,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 4] = [Self::Ridge, Self::Tc, Self::Dc, Self::Ss];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ridge => "ridge",
            Self::Tc => "tc",
            Self::Dc => "dc",
            Self::Ss => "ss",
        }
    }

    /// Number of hyper-parameters.
    pub fn p(self) -> usize {
        match self {
            Self::Ridge => 1,
            Self::Tc | Self::Ss => 2,
            Self::Dc => 3,
        }
    }

    fn check_len(self, eta: &[f64]) -> Result<()> {
        if eta.len() != self.p() {
            return Err(Error::DimensionMismatch(format!(
                "{} kernel takes {} hyper-parameters, got {}",
                self.name(),
                self.p(),
                eta.len()
            )));
        }
        Ok(())
    }

    /// `η ∈ Ω`: c ≥ 0, α ∈ [0, 1], |ρ| ≤ 1, ridge η ≥ 0.
    pub fn in_domain(self, eta: &[f64]) -> bool {
        eta.len() == self.p()
            && eta.iter().all(|v| v.is_finite())
            && eta[0] >= 0.0
            && match self {
                Self::Ridge => true,
                Self::Tc | Self::Ss => (0.0..=1.0).contains(&eta[1]),
                Self::Dc => (0.0..=1.0).contains(&eta[1]) && eta[2].abs() <= 1.0,
            }
    }

    pub fn in_interior(self, eta: &[f64]) -> bool {
        eta.len() == self.p()
            && eta.iter().all(|v| v.is_finite())
            && eta[0] > 0.0
            && match self {
                Self::Ridge => true,
                Self::Tc | Self::Ss => eta[1] > 0.0 && eta[1] < 1.0,
                Self::Dc => eta[1] > 0.0 && eta[1] < 1.0 && eta[2].abs() < 1.0,
            }
    }

    fn require_domain(self, eta: &[f64]) -> Result<()> {
        self.check_len(eta)?;
        if !self.in_domain(eta) {
            return Err(Error::DomainViolation(format!("{} kernel at {eta:?}", self.name())));
        }
        Ok(())
    }

    fn require_interior(self, eta: &[f64]) -> Result<()> {
        self.check_len(eta)?;
        if !self.in_interior(eta) {
            return Err(Error::DomainViolation(format!(
                "{} kernel at {eta:?} is not interior",
                self.name()
            )));
        }
        Ok(())
    }

    /// Maps `η` in the interior of Ω to unconstrained optimizer coordinates.
    pub fn to_unconstrained(self, eta: &[f64]) -> Result<Vec<f64>> {
        self.require_interior(eta)?;
        let mut x = vec![eta[0].ln()];
        if self.p() >= 2 {
            let a = ((eta[1] - REPARAM_EPS) / (1.0 - 2.0 * REPARAM_EPS)).clamp(1e-300, 1.0 - 1e-16);
            x.push((a / (1.0 - a)).ln());
        }
        if self.p() == 3 {
            x.push((eta[2] / (1.0 - REPARAM_EPS)).atanh());
        }
        Ok(x)
    }

    /// Inverse of [`Self::to_unconstrained`]; every finite input lands in the interior.
    pub fn from_unconstrained(self, x: &[f64]) -> HyperParams {
        let mut eta = vec![x[0].exp()];
        if self.p() >= 2 {
            let s = 1.0 / (1.0 + (-x[1]).exp());
            eta.push(REPARAM_EPS + (1.0 - 2.0 * REPARAM_EPS) * s);
        }
        if self.p() == 3 {
            eta.push((1.0 - REPARAM_EPS) * x[2].tanh());
        }
        eta
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ridge" => Ok(Self::Ridge),
            "tc" => Ok(Self::Tc),
            "dc" => Ok(Self::Dc),
            "ss" => Ok(Self::Ss),
            other => Err(Error::config(
                "family",
                format!("unknown kernel `{other}` (expected ridge, tc, dc or ss)"),
            )),
        }
    }
}

/// `d^order/dx^order x^e`, with `x^0 = 1` and zero coefficients giving exactly 0.
fn dpow(x: f64, e: f64, order: u32) -> f64 {
    let mut coef = 1.0;
    for k in 0..order {
        coef *= e - k as f64;
    }
    if coef == 0.0 {
        return 0.0;
    }
    let r = e - order as f64;
    if r == 0.0 {
        coef
    } else if r.fract() == 0.0 {
        coef * x.powi(r as i32)
    } else {
        coef * x.powf(r)
    }
}

/// Entry of the shape function `K` (so `P = c K`) differentiated `da` times in α
/// and `dr` times in ρ.
fn shape_entry(family: KernelFamily, eta: &[f64], i: usize, j: usize, da: u32, dr: u32) -> f64 {
    let (fi, fj) = ((i + 1) as f64, (j + 1) as f64);
    let m = fi.max(fj);
    match family {
        KernelFamily::Ridge => {
            if i == j && da == 0 && dr == 0 {
                1.0
            } else {
                0.0
            }
        }
        KernelFamily::Tc => {
            if dr > 0 {
                0.0
            } else {
                dpow(eta[1], m, da)
            }
        }
        KernelFamily::Ss => {
            if dr > 0 {
                0.0
            } else {
                dpow(eta[1], fi + fj + m, da) / 2.0 - dpow(eta[1], 3.0 * m, da) / 6.0
            }
        }
        KernelFamily::Dc => {
            let s = (fi + fj) / 2.0;
            let d = (fi - fj).abs();
            dpow(eta[1], s, da) * dpow(eta[2], d, dr)
        }
    }
}

fn build(n: usize, f: impl Fn(usize, usize) -> f64) -> SymMatrix {
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            let v = f(i, j);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    SymMatrix::symmetrized(m)
}

/// Order of differentiation in (c, α, ρ) for a list of hyper-parameter indices.
fn orders(indices: &[usize]) -> [u32; 3] {
    let mut o = [0u32; 3];
    for &k in indices {
        o[k] += 1;
    }
    o
}

fn derivative(family: KernelFamily, eta: &[f64], n: usize, indices: &[usize]) -> SymMatrix {
    let [dc, da, dr] = orders(indices);
    if family == KernelFamily::Ridge {
        return if dc == 1 { SymMatrix::identity(n) } else { SymMatrix::zeros(n) };
    }
    let scale = match dc {
        0 => eta[0],
        1 => 1.0,
        _ => return SymMatrix::zeros(n),
    };
    build(n, |i, j| scale * shape_entry(family, eta, i, j, da, dr))
}

pub fn kernel_matrix(family: KernelFamily, eta: &[f64], n: usize) -> Result<SymMatrix> {
    family.require_domain(eta)?;
    if family == KernelFamily::Ridge {
        return Ok(SymMatrix::identity(n).scale(eta[0]));
    }
    Ok(derivative(family, eta, n, &[]))
}

fn check_index(family: KernelFamily, k: usize) -> Result<()> {
    if k >= family.p() {
        return Err(Error::IndexOutOfRange { index: k, p: family.p() });
    }
    Ok(())
}

/// `∂P/∂η_k`.
pub fn kernel_grad(family: KernelFamily, eta: &[f64], n: usize, k: usize) -> Result<SymMatrix> {
    check_index(family, k)?;
    family.require_interior(eta)?;
    Ok(derivative(family, eta, n, &[k]))
}

/// `∂²P/∂η_k∂η_l`.
pub fn kernel_hess(
    family: KernelFamily,
    eta: &[f64],
    n: usize,
    k: usize,
    l: usize,
) -> Result<SymMatrix> {
    check_index(family, k)?;
    check_index(family, l)?;
    family.require_interior(eta)?;
    Ok(derivative(family, eta, n, &[k, l]))
}

/// Kernel matrix and its inverse, with derivatives up to second order.
#[derive(Debug, Clone)]
pub struct KernelDerivatives {
    pub p: SymMatrix,
    pub inv: SymMatrix,
    /// `∂P/∂η_k`.
    pub dp: Vec<SymMatrix>,
    /// `∂²P/∂η_k∂η_l`.
    pub d2p: Vec<Vec<SymMatrix>>,
    /// `∂P⁻¹/∂η_k`.
    pub dinv: Vec<SymMatrix>,
    /// `∂²P⁻¹/∂η_k∂η_l`.
    pub d2inv: Vec<Vec<SymMatrix>>,
}

/// Uses `∂P⁻¹_k = −P⁻¹P_kP⁻¹` and
/// `∂²P⁻¹_kl = P⁻¹P_lP⁻¹P_kP⁻¹ − P⁻¹P_klP⁻¹ + P⁻¹P_kP⁻¹P_lP⁻¹`.
pub fn inv_kernel_derivatives(family: KernelFamily, eta: &[f64], n: usize) -> Result<KernelDerivatives> {
    let p = kernel_matrix(family, eta, n)?;
    family.require_interior(eta)?;
    let inv = p.cholesky()?.inverse();
    let pi = inv.as_matrix();
    let q = family.p();
    let dp: Vec<SymMatrix> = (0..q).map(|k| derivative(family, eta, n, &[k])).collect();
    let d2p: Vec<Vec<SymMatrix>> = (0..q)
        .map(|k| (0..q).map(|l| derivative(family, eta, n, &[k, l])).collect())
        .collect();
    // G_k = P⁻¹ P_k
    let g: Vec<DMatrix<f64>> = dp.iter().map(|d| pi * d.as_matrix()).collect();
    let dinv = g
        .iter()
        .map(|gk| SymMatrix::symmetrized(-(gk * pi)))
        .collect();
    let d2inv = (0..q)
        .map(|k| {
            (0..q)
                .map(|l| {
                    let m = &g[l] * &g[k] * pi - pi * d2p[k][l].as_matrix() * pi
                        + &g[k] * &g[l] * pi;
                    SymMatrix::symmetrized(m)
                })
                .collect()
        })
        .collect();
    Ok(KernelDerivatives { p, inv, dp, d2p, dinv, d2inv })
}
