//! Losses, sparsity recovery, and eigenspace agreement.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    frobenius_norm, is_positive_definite, operator_norm, sym_eigen, sym_eigenvalues, EigenDecomposition,
    SymMatrix,
};

/// Relative zero threshold for estimates without structural zeros.
pub const PENALIZED_ZERO_REL_TOL: f64 = 1e-8;

fn check_dims(est: &SymMatrix, truth: &SymMatrix) -> Result<()> {
    if est.dim() != truth.dim() {
        return Err(Error::DimMismatch {
            expected: format!("{0}x{0}", truth.dim()),
            actual: format!("{0}x{0}", est.dim()),
        });
    }
    Ok(())
}

/// `‖est − truth‖` in the operator norm.
pub fn operator_loss(est: &SymMatrix, truth: &SymMatrix) -> Result<f64> {
    check_dims(est, truth)?;
    operator_norm(est.difference(truth)?.as_matrix())
}

pub fn frobenius_loss(est: &SymMatrix, truth: &SymMatrix) -> Result<f64> {
    check_dims(est, truth)?;
    Ok(frobenius_norm(est.difference(truth)?.as_matrix()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SparsityRates {
    /// Share of truly nonzero entries estimated nonzero.
    pub tpr: f64,
    /// Share of truly zero entries estimated zero; `None` when the truth has
    /// no zeros.
    pub tnr: Option<f64>,
}

/// True positive and true negative rates over all `(i, j)` pairs, diagonal
/// included. An estimated entry counts as zero when `|σ̂_ij| <= zero_tol`;
/// true zeros are exact.
pub fn sparsity_rates(est: &SymMatrix, truth: &SymMatrix, zero_tol: f64) -> Result<SparsityRates> {
    check_dims(est, truth)?;
    let (mut pos, mut tp, mut neg, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (&e, &t) in est.as_slice().iter().zip(truth.as_slice()) {
        let est_zero = e.abs() <= zero_tol;
        if t != 0.0 {
            pos += 1;
            tp += usize::from(!est_zero);
        } else {
            neg += 1;
            tn += usize::from(est_zero);
        }
    }
    Ok(SparsityRates {
        tpr: if pos == 0 { 1.0 } else { tp as f64 / pos as f64 },
        tnr: (neg > 0).then(|| tn as f64 / neg as f64),
    })
}

/// Zero threshold for estimates whose zeros are not structural.
pub fn relative_zero_tol(est: &SymMatrix) -> f64 {
    PENALIZED_ZERO_REL_TOL * est.max_abs()
}

/// `K(q) = Σ_{i<=q} Σ_{j<=q} (ê_iᵀ e_j)²` for every `q = 1..p`.
pub fn kq_curve(est: &EigenDecomposition, truth: &EigenDecomposition) -> Result<Vec<f64>> {
    let p = truth.values.len();
    if est.values.len() != p {
        return Err(Error::DimMismatch {
            expected: format!("{p} eigenvectors"),
            actual: format!("{}", est.values.len()),
        });
    }
    let inner = est.vectors.transpose().matmul(&truth.vectors)?;
    let sq = |i: usize, j: usize| inner[(i, j)] * inner[(i, j)];
    let mut out = Vec::with_capacity(p);
    let mut acc = 0.0;
    for q in 0..p {
        for j in 0..=q {
            acc += sq(q, j);
        }
        for i in 0..q {
            acc += sq(i, q);
        }
        out.push(acc);
    }
    Ok(out)
}

/// Krzanowski's eigenspace agreement for the top `q` eigenvectors.
pub fn krzanowski(est: &SymMatrix, truth: &SymMatrix, q: usize) -> Result<f64> {
    check_dims(est, truth)?;
    if q == 0 || q > truth.dim() {
        return Err(Error::InvalidParameter(format!(
            "q must lie in 1..={}, got {q}",
            truth.dim()
        )));
    }
    let curve = kq_curve(&sym_eigen(est)?, &sym_eigen(truth)?)?;
    Ok(curve[q - 1])
}

#[derive(Clone, Debug, Serialize)]
pub struct MetricsReport {
    pub operator_loss: f64,
    pub frobenius_loss: f64,
    pub tpr: f64,
    pub tnr: Option<f64>,
    pub kq_curve: Vec<f64>,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    pub positive_definite: bool,
}

/// All metrics of `est` against `truth`; `truth_eig` is passed in so it can
/// be shared across estimates.
pub fn evaluate(
    est: &SymMatrix,
    truth: &SymMatrix,
    truth_eig: &EigenDecomposition,
    zero_tol: f64,
    with_eigenvectors: bool,
) -> Result<MetricsReport> {
    check_dims(est, truth)?;
    let rates = sparsity_rates(est, truth, zero_tol)?;
    let (eigenvalues, kq_curve) = if with_eigenvectors {
        let eig = sym_eigen(est)?;
        let kq = kq_curve(&eig, truth_eig)?;
        (eig.values, kq)
    } else {
        (sym_eigenvalues(est)?, Vec::new())
    };
    Ok(MetricsReport {
        operator_loss: operator_loss(est, truth)?,
        frobenius_loss: frobenius_loss(est, truth)?,
        tpr: rates.tpr,
        tnr: rates.tnr,
        kq_curve,
        eigenvalues,
        positive_definite: is_positive_definite(est, None),
    })
}
