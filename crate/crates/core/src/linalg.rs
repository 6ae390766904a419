//! Small dense linear-algebra helpers over `nalgebra`.
//!
//! Every rank decision in the crate goes through a *relative* threshold:
//! a singular value (or eigenvalue) counts as zero when it is below
//! `rank_tol * largest`. This keeps verdicts invariant under rescaling of
//! the features.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{Error, Result};

/// Default relative rank threshold.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Symmetry tolerance, relative to the largest entry magnitude (floored at 1).
const SYMMETRY_TOL: f64 = 1e-9;

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn ensure_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::mismatch("square matrix", m.nrows(), m.ncols()));
    }
    let scale = m.amax().max(1.0);
    let asym = max_asymmetry(m);
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut vals: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// Smallest eigenvalue exceeding `rank_tol * λ_max`; 0 when the matrix is
/// numerically zero.
pub fn min_positive_eigenvalue(m: &DMatrix<f64>, rank_tol: f64) -> Result<f64> {
    ensure_symmetric(m)?;
    let vals = sym_eigenvalues(m);
    let lmax = vals.last().copied().unwrap_or(0.0);
    if lmax <= f64::MIN_POSITIVE {
        return Ok(0.0);
    }
    let cut = rank_tol * lmax;
    Ok(vals.into_iter().find(|&v| v > cut).unwrap_or(0.0))
}

/// Orthonormal basis of the span of a set of vectors, from the left singular
/// vectors of the stacked column matrix.
#[derive(Debug, Clone)]
pub struct SpanBasis {
    /// `dim × rank`, orthonormal columns.
    pub basis: DMatrix<f64>,
    pub singular_values: Vec<f64>,
}

impl SpanBasis {
    pub fn from_vectors<'a, I>(dim: usize, vectors: I, rank_tol: f64) -> Self
    where
        I: IntoIterator<Item = &'a DVector<f64>>,
    {
        let cols: Vec<&DVector<f64>> = vectors.into_iter().collect();
        if cols.is_empty() || dim == 0 {
            return Self::empty(dim);
        }
        let stacked = DMatrix::from_fn(dim, cols.len(), |i, j| cols[j][i]);
        Self::from_columns(&stacked, rank_tol)
    }

    /// Basis of the column space of `m`.
    pub fn from_columns(m: &DMatrix<f64>, rank_tol: f64) -> Self {
        let dim = m.nrows();
        if m.ncols() == 0 || dim == 0 {
            return Self::empty(dim);
        }
        let svd = SVD::new(m.clone(), true, false);
        let u = svd.u.expect("left singular vectors requested");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
        let smax = sigma.first().copied().unwrap_or(0.0);
        let keep: Vec<usize> = order
            .iter()
            .zip(&sigma)
            .filter(|(_, &s)| smax > 0.0 && s > rank_tol * smax)
            .map(|(&i, _)| i)
            .collect();
        let basis = DMatrix::from_fn(dim, keep.len(), |i, j| u[(i, keep[j])]);
        SpanBasis {
            basis,
            singular_values: sigma,
        }
    }

    fn empty(dim: usize) -> Self {
        SpanBasis {
            basis: DMatrix::zeros(dim, 0),
            singular_values: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Orthogonal projection of `v` onto the span.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.rank() == 0 {
            return DVector::zeros(v.len());
        }
        &self.basis * (self.basis.transpose() * v)
    }

    /// Euclidean distance from `v` to the span.
    pub fn residual(&self, v: &DVector<f64>) -> f64 {
        (v - self.project(v)).norm()
    }

    /// `λ_min(Uᵀ M U)`, the smallest Rayleigh quotient of `m` restricted to the span.
    pub fn min_eig_restricted(&self, m: &DMatrix<f64>) -> Option<f64> {
        if self.rank() == 0 {
            return None;
        }
        let restricted = self.basis.transpose() * m * &self.basis;
        let sym = (&restricted + restricted.transpose()) * 0.5;
        Some(min_eigenvalue(&sym))
    }
}

/// Rank of a set of vectors under a relative singular-value threshold.
pub fn span_rank<'a, I>(dim: usize, vectors: I, rank_tol: f64) -> usize
where
    I: IntoIterator<Item = &'a DVector<f64>>,
{
    SpanBasis::from_vectors(dim, vectors, rank_tol).rank()
}

/// Numerical rank of a symmetric PSD matrix via its eigenvalues.
pub fn psd_rank(m: &DMatrix<f64>, rank_tol: f64) -> usize {
    let vals = sym_eigenvalues(m);
    let lmax = vals.last().copied().unwrap_or(0.0);
    if lmax <= f64::MIN_POSITIVE {
        return 0;
    }
    vals.iter().filter(|&&v| v > rank_tol * lmax).count()
}

/// Solves `Λ w = b` for symmetric positive-definite `Λ` by Cholesky.
pub fn ridge_solve(lambda: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    ensure_symmetric(lambda)?;
    if b.len() != lambda.nrows() {
        return Err(Error::mismatch("ridge_solve rhs", lambda.nrows(), b.len()));
    }
    let chol = Cholesky::new(lambda.clone()).ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.solve(b))
}

pub fn outer(v: &DVector<f64>) -> DMatrix<f64> {
    v * v.transpose()
}
