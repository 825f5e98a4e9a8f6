//! Self-contained dense linear algebra.

mod cholesky;
mod eigen;
mod matrix;

pub use cholesky::{
    default_pd_tol, invert_unit_lower, is_positive_definite, modified_cholesky,
    precision_from_inverse_factors, reconstruct, CholeskyFactors, PD_RELATIVE_TOL,
};
pub use eigen::{
    frobenius_norm, jacobi_eigen, operator_norm, sym_eigen, sym_eigenvalues, EigenDecomposition,
    MAX_EIGEN_ITERATIONS,
};
pub use matrix::{dot, Matrix, SymMatrix};

/// Solves the small SPD system `g x = b` by an ordinary Cholesky
/// factorization; `None` when `g` is not numerically positive definite.
pub(crate) fn solve_spd(g: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let k = b.len();
    let mut r = Matrix::zeros(k, k);
    let scale = (0..k).fold(0.0_f64, |m, i| m.max(g[(i, i)]));
    for j in 0..k {
        let mut s = g[(j, j)];
        for q in 0..j {
            s -= r[(j, q)] * r[(j, q)];
        }
        if !(s > 1e-13 * scale) {
            return None;
        }
        let rjj = s.sqrt();
        r[(j, j)] = rjj;
        for i in j + 1..k {
            let mut s = g[(i, j)];
            for q in 0..j {
                s -= r[(i, q)] * r[(j, q)];
            }
            r[(i, j)] = s / rjj;
        }
    }
    let mut y = vec![0.0; k];
    for i in 0..k {
        let s: f64 = (0..i).map(|q| r[(i, q)] * y[q]).sum();
        y[i] = (b[i] - s) / r[(i, i)];
    }
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|q| r[(q, i)] * x[q]).sum();
        x[i] = (y[i] - s) / r[(i, i)];
    }
    Some(x)
}
