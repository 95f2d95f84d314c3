//! Reproducing kernel and Christoffel function of a Gram matrix.
//!
//! `K(z, y) = Q(z)^T G^{-1} Q(y)` is evaluated as `(L^{-1} Q(z)) . (L^{-1} Q(y))`
//! with `G = L L^T`, so the inverse is never formed.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::poly_basis::{BasisSpec, GramMatrix};

/// Lower-triangular Cholesky factor `L` with `A = L L^T`.
///
/// Fails with [`Error::NotPositiveDefinite`] on the first pivot that is not
/// strictly positive.
pub fn cholesky(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "cholesky needs a square matrix");
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(Error::NotPositiveDefinite {
                pivot: j,
                value: diag,
            });
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut v = a[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / ljj;
        }
    }
    Ok(l)
}

/// Solves `L x = b` in place for lower-triangular `L`.
pub fn forward_solve(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = l.nrows();
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v -= l[(i, k)] * b[k];
        }
        b[i] = v / l[(i, i)];
    }
}

/// Solves `L^T x = b` in place for lower-triangular `L`.
pub fn backward_solve(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = l.nrows();
    for i in (0..n).rev() {
        let mut v = b[i];
        for k in i + 1..n {
            v -= l[(k, i)] * b[k];
        }
        b[i] = v / l[(i, i)];
    }
}

/// A factorized Gram matrix, ready for kernel evaluation.
#[derive(Debug, Clone)]
pub struct KernelState {
    gram: GramMatrix,
    factor: DMatrix<f64>,
    ridge_used: f64,
    condition_estimate: f64,
}

impl KernelState {
    pub fn spec(&self) -> &BasisSpec {
        self.gram.spec()
    }

    pub fn gram(&self) -> &GramMatrix {
        &self.gram
    }

    /// Lower-triangular factor of `gram + ridge_used * (trace / d) * I`.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn ridge_used(&self) -> f64 {
        self.ridge_used
    }

    /// `(max L_ii / min L_ii)^2`, a cheap lower bound on the condition number.
    pub fn condition_estimate(&self) -> f64 {
        self.condition_estimate
    }

    /// `L^{-1} Q(y)` for raw coordinate `y`.
    pub fn whitened_basis(&self, y: f64) -> Vec<f64> {
        let mut q = self.spec().eval(y);
        forward_solve(&self.factor, &mut q);
        q
    }

    /// Reproducing kernel `K(z, y)`.
    pub fn kernel(&self, z: f64, y: f64) -> f64 {
        let a = self.whitened_basis(z);
        if z == y {
            return a.iter().map(|v| v * v).sum();
        }
        let b = self.whitened_basis(y);
        a.iter().zip(&b).map(|(p, q)| p * q).sum()
    }

    /// Christoffel function `1 / K(y, y)`.
    pub fn christoffel(&self, y: f64) -> f64 {
        1.0 / self.kernel(y, y)
    }

    /// Coefficients `c` with `K(z, y) = sum_t c_t Q_t(y)`, i.e. `G^{-1} Q(z)`.
    pub fn kernel_coefficients(&self, z: f64) -> Vec<f64> {
        let mut a = self.whitened_basis(z);
        backward_solve(&self.factor, &mut a);
        a
    }
}

/// Factorizes `gram`, adding `ridge * (trace / d) * I` when a ridge is given.
pub fn factorize(gram: &GramMatrix, ridge: Option<f64>) -> Result<KernelState> {
    let d = gram.dim();
    let ridge_used = ridge.unwrap_or(0.0);
    let mut a = gram.entries().clone();
    if ridge_used > 0.0 {
        let shift = ridge_used * gram.trace() / d as f64;
        for i in 0..d {
            a[(i, i)] += shift;
        }
    }
    let factor = cholesky(&a)?;
    let diag = factor.diagonal();
    let condition_estimate = (diag.max() / diag.min()).powi(2).max(1.0);
    Ok(KernelState {
        gram: gram.clone(),
        factor,
        ridge_used,
        condition_estimate,
    })
}

pub fn kernel(state: &KernelState, z: f64, y: f64) -> f64 {
    state.kernel(z, y)
}

pub fn christoffel(state: &KernelState, y: f64) -> f64 {
    state.christoffel(y)
}

/// `L^{-1} M L^{-T}` for a symmetric `M`, symmetrized against roundoff.
pub(crate) fn congruence(l: &DMatrix<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    // X = L^{-1} M, column by column
    let mut x = m.clone();
    for j in 0..n {
        let mut col: Vec<f64> = x.column(j).iter().copied().collect();
        forward_solve(l, &mut col);
        x.set_column(j, &DVector::from_vec(col));
    }
    // L^{-1} X^T = L^{-1} M L^{-T} since M is symmetric
    let mut xt = x.transpose();
    for j in 0..n {
        let mut col: Vec<f64> = xt.column(j).iter().copied().collect();
        forward_solve(l, &mut col);
        xt.set_column(j, &DVector::from_vec(col));
    }
    (&xt + xt.transpose()) * 0.5
}
