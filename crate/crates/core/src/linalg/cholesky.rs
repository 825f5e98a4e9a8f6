//! Modified Cholesky factorization `M = L D Lᵀ` with `L` unit lower
//! triangular and `D` a positive diagonal.
//!
//! The same container holds either the covariance factors `(L, D)` or the
//! inverse factors `(T, D)` with `Σ⁻¹ = Tᵀ D⁻¹ T`; the two are related by
//! `T = L⁻¹`.

use serde::Serialize;

use super::matrix::{Matrix, SymMatrix};
use crate::error::{Error, Result};

/// Relative pivot threshold used by [`is_positive_definite`].
pub const PD_RELATIVE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CholeskyFactors {
    unit_lower: Matrix,
    diag: Vec<f64>,
}

impl CholeskyFactors {
    /// Validates the unit-lower and positive-diagonal invariants.
    pub fn new(unit_lower: Matrix, diag: Vec<f64>) -> Result<Self> {
        let p = diag.len();
        if unit_lower.rows() != p || unit_lower.cols() != p {
            return Err(Error::DimMismatch {
                expected: format!("{p}x{p} factor"),
                actual: format!("{}x{}", unit_lower.rows(), unit_lower.cols()),
            });
        }
        check_unit_lower(&unit_lower)?;
        if let Some(j) = diag.iter().position(|d| !(*d > 0.0)) {
            return Err(Error::NotPositiveDefinite {
                column: j + 1,
                pivot: diag[j],
            });
        }
        Ok(CholeskyFactors { unit_lower, diag })
    }

    pub fn unit_lower(&self) -> &Matrix {
        &self.unit_lower
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// `Σ_j log d_jj`, the log-determinant of `L D Lᵀ`.
    pub fn log_det(&self) -> f64 {
        self.diag.iter().map(|d| d.ln()).sum()
    }

    /// Swaps between covariance factors `(L, D)` and inverse factors
    /// `(T, D)`: the diagonal is shared, the triangle is inverted.
    pub fn inverted(&self) -> CholeskyFactors {
        CholeskyFactors {
            unit_lower: invert_unit_lower(&self.unit_lower),
            diag: self.diag.clone(),
        }
    }
}

fn check_unit_lower(t: &Matrix) -> Result<()> {
    let p = t.rows();
    for i in 0..p {
        if t[(i, i)] != 1.0 {
            return Err(Error::InvalidParameter(format!(
                "factor diagonal entry ({}, {}) is {} rather than 1",
                i + 1,
                i + 1,
                t[(i, i)]
            )));
        }
        if t.row(i)[i + 1..].iter().any(|&v| v != 0.0) {
            return Err(Error::InvalidParameter(format!(
                "factor row {} has entries above the diagonal",
                i + 1
            )));
        }
    }
    Ok(())
}

/// Column-by-column modified Cholesky factorization.
///
/// For `i > j`:
/// `d_jj = m_jj - Σ_{q<j} l_jq² d_qq` and
/// `l_ij = (m_ij - Σ_{q<j} l_iq l_jq d_qq) / d_jj`.
///
/// Fails with [`Error::NotPositiveDefinite`] at the first pivot `d_jj <= tol`.
pub fn modified_cholesky(m: &SymMatrix, tol: f64) -> Result<CholeskyFactors> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "pivot tolerance must be positive, got {tol}"
        )));
    }
    let p = m.dim();
    let mut l = Matrix::identity(p);
    let mut d = vec![0.0; p];
    // Scratch column: w_q = l_jq d_qq for the current column j.
    let mut w = vec![0.0; p];
    for j in 0..p {
        let lj = l.row(j);
        let mut djj = m[(j, j)];
        for q in 0..j {
            w[q] = lj[q] * d[q];
            djj -= lj[q] * w[q];
        }
        if !(djj > tol) {
            return Err(Error::NotPositiveDefinite {
                column: j + 1,
                pivot: djj,
            });
        }
        d[j] = djj;
        for i in j + 1..p {
            let li = l.row(i);
            let s: f64 = li[..j].iter().zip(&w[..j]).map(|(a, b)| a * b).sum();
            l[(i, j)] = (m[(i, j)] - s) / djj;
        }
    }
    Ok(CholeskyFactors {
        unit_lower: l,
        diag: d,
    })
}

/// `L · diag(D) · Lᵀ`.
///
/// Entries whose index ranges share no nonzero factor entries are never
/// touched, so zero patterns in `L` carry over exactly.
pub fn reconstruct(f: &CholeskyFactors) -> SymMatrix {
    let l = &f.unit_lower;
    let d = &f.diag;
    let p = d.len();
    let first_nz: Vec<usize> = (0..p)
        .map(|i| l.row(i).iter().position(|&v| v != 0.0).unwrap_or(i))
        .collect();
    SymMatrix::from_lower_fn(p, |i, j| {
        let (li, lj) = (l.row(i), l.row(j));
        (first_nz[i].max(first_nz[j])..=j)
            .map(|q| li[q] * lj[q] * d[q])
            .sum()
    })
}

/// Inverse of a unit lower-triangular matrix by forward substitution.
///
/// Only the lower triangle of `t` is read; its diagonal is taken to be 1.
pub fn invert_unit_lower(t: &Matrix) -> Matrix {
    let p = t.rows();
    let mut inv = Matrix::identity(p);
    // Column c of the inverse solves T x = e_c; x_i = 0 for i < c.
    for c in 0..p {
        for i in c + 1..p {
            let ti = t.row(i);
            let mut s = 0.0;
            for q in c..i {
                s += ti[q] * inv[(q, c)];
            }
            inv[(i, c)] = -s;
        }
    }
    inv
}

/// `Tᵀ D⁻¹ T`: the precision matrix described by inverse factors.
pub fn precision_from_inverse_factors(f: &CholeskyFactors) -> SymMatrix {
    let t = &f.unit_lower;
    let d = &f.diag;
    let p = d.len();
    let last_nz: Vec<usize> = (0..p)
        .map(|c| (c..p).rev().find(|&r| t[(r, c)] != 0.0).unwrap_or(c))
        .collect();
    SymMatrix::from_lower_fn(p, |i, j| {
        // (TᵀD⁻¹T)_ij = Σ_r t_ri t_rj / d_rr over r >= max(i, j) = i.
        (i..=last_nz[i].min(last_nz[j]))
            .map(|r| t[(r, i)] * t[(r, j)] / d[r])
            .sum()
    })
}

/// Default pivot tolerance: `1e-12 · max diagonal`.
pub fn default_pd_tol(m: &SymMatrix) -> f64 {
    let max_diag = m.diag().into_iter().fold(0.0_f64, f64::max);
    PD_RELATIVE_TOL * max_diag
}

/// True when [`modified_cholesky`] succeeds with every pivot above `tol`
/// (defaults to [`default_pd_tol`]).
pub fn is_positive_definite(m: &SymMatrix, tol: Option<f64>) -> bool {
    let tol = tol.unwrap_or_else(|| default_pd_tol(m));
    if !(tol > 0.0) {
        return false;
    }
    modified_cholesky(m, tol).is_ok()
}
