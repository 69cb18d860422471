//! Dense symmetric linear algebra with explicit positive-definiteness checks.
//!
//! Every inverse-bearing quantity in the crate goes through [`Cholesky`];
//! explicit inverses are only formed by solving against the identity.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative asymmetry accepted (and removed) by [`SymMatrix::new`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A pivot at or below `PD_TOL * trace / dim` is treated as non-positive.
pub const PD_TOL: f64 = 1e-12;

/// Relative singular-value cutoff used by [`numerical_rank`].
pub const RANK_TOL: f64 = 1e-10;

/// Square symmetric matrix. Storage is exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Validates symmetry, then stores `(A + Aᵀ)/2`.
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "expected square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.nrows() == 0 {
            return Err(Error::DimensionMismatch("empty matrix".into()));
        }
        let scale = a.amax();
        let asym = (&a - a.transpose()).amax();
        if scale > 0.0 && asym > SYMMETRY_TOL * scale {
            return Err(Error::NotSymmetric(asym / scale));
        }
        Ok(Self::symmetrized(a))
    }

    /// Symmetrizes without the tolerance check. For products that are
    /// symmetric in exact arithmetic.
    pub(crate) fn symmetrized(a: DMatrix<f64>) -> Self {
        let s = (&a + a.transpose()) * 0.5;
        SymMatrix(s)
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(DMatrix::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn scale(&self, s: f64) -> Self {
        SymMatrix(&self.0 * s)
    }

    pub fn add(&self, other: &SymMatrix) -> Self {
        SymMatrix(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &SymMatrix) -> Self {
        SymMatrix(&self.0 - &other.0)
    }

    pub fn quad_form(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.0 * x))
    }

    pub fn cholesky(&self) -> Result<Cholesky> {
        Cholesky::new(self)
    }
}

impl std::ops::Index<(usize, usize)> for SymMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// Lower-triangular Cholesky factor `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DMatrix<f64>,
}

impl Cholesky {
    pub fn new(a: &SymMatrix) -> Result<Self> {
        let n = a.dim();
        let m = a.as_matrix();
        let trace = m.trace();
        let cutoff = PD_TOL * (trace / n as f64).abs();
        let mut l = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let mut d = m[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > cutoff) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { index: j, pivot: d });
            }
            let ljj = d.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = m[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// Solves `L x = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut DMatrix<f64>) {
        let n = self.dim();
        for c in 0..b.ncols() {
            for i in 0..n {
                let mut s = b[(i, c)];
                for k in 0..i {
                    s -= self.l[(i, k)] * b[(k, c)];
                }
                b[(i, c)] = s / self.l[(i, i)];
            }
        }
    }

    /// Solves `Lᵀ x = b` in place.
    pub fn solve_upper_in_place(&self, b: &mut DMatrix<f64>) {
        let n = self.dim();
        for c in 0..b.ncols() {
            for i in (0..n).rev() {
                let mut s = b[(i, c)];
                for k in (i + 1)..n {
                    s -= self.l[(k, i)] * b[(k, c)];
                }
                b[(i, c)] = s / self.l[(i, i)];
            }
        }
    }

    pub fn solve(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if b.nrows() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "rhs has {} rows, factor has order {}",
                b.nrows(),
                self.dim()
            )));
        }
        let mut x = b.clone();
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        Ok(x)
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        DVector::from_column_slice(x.as_slice())
    }

    /// `L⁻¹ b`.
    pub fn solve_lower_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
        self.solve_lower_in_place(&mut x);
        DVector::from_column_slice(x.as_slice())
    }

    pub fn inverse(&self) -> SymMatrix {
        let n = self.dim();
        let mut x = DMatrix::identity(n, n);
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        SymMatrix::symmetrized(x)
    }

    pub fn logdet(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }
}

/// Solves `A X = B` for positive definite `A`.
pub fn cholesky_solve(a: &SymMatrix, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.cholesky()?.solve(b)
}

pub fn logdet_pd(a: &SymMatrix) -> Result<f64> {
    Ok(a.cholesky()?.logdet())
}

/// Eigen-decomposition with eigenvalues sorted in descending order.
#[derive(Debug, Clone)]
pub struct EigenSym {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenSym {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.vectors * DMatrix::from_diagonal(&self.values) * self.vectors.transpose()
    }

    pub fn max(&self) -> f64 {
        self.values[0]
    }

    pub fn min(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

pub fn eigen_sym(a: &SymMatrix) -> EigenSym {
    let eig = SymmetricEigen::new(a.as_matrix().clone());
    let n = a.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    EigenSym { values, vectors }
}

/// `λ₁ / λₙ` of a positive definite matrix.
pub fn cond_number(a: &SymMatrix) -> Result<f64> {
    let eig = eigen_sym(a);
    let (hi, lo) = (eig.max(), eig.min());
    if !(lo > 0.0) {
        return Err(Error::NotPositiveDefinite {
            index: a.dim() - 1,
            pivot: lo,
        });
    }
    Ok(hi / lo)
}

pub fn frob_norm(a: &DMatrix<f64>) -> f64 {
    a.norm()
}

/// `√n · cond(A) / λ₁(A)`, an upper bound on `‖A⁻¹‖_F`.
pub fn fro_inverse_bound(a: &SymMatrix) -> Result<f64> {
    let eig = eigen_sym(a);
    let (hi, lo) = (eig.max(), eig.min());
    if !(lo > 0.0) {
        return Err(Error::NotPositiveDefinite {
            index: a.dim() - 1,
            pivot: lo,
        });
    }
    Ok((a.dim() as f64).sqrt() * (hi / lo) / hi)
}

/// Number of singular values above `RANK_TOL` times the largest.
pub fn numerical_rank(a: &DMatrix<f64>) -> usize {
    let sv = a.clone().singular_values();
    let top = sv.iter().cloned().fold(0.0_f64, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * top).count()
}

/// Principal square root of a positive semidefinite matrix.
pub fn sqrt_psd(a: &SymMatrix) -> SymMatrix {
    let eig = eigen_sym(a);
    let d = eig.values.map(|v| v.max(0.0).sqrt());
    SymMatrix::symmetrized(&eig.vectors * DMatrix::from_diagonal(&d) * eig.vectors.transpose())
}

/// `Aᵀ A` as a symmetric matrix.
pub fn gram(a: &DMatrix<f64>) -> SymMatrix {
    SymMatrix::symmetrized(a.tr_mul(a))
}

/// `Tr(A B)` without forming the product.
pub fn trace_of_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(&b.transpose()).sum()
}
