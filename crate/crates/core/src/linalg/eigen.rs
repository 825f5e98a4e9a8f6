//! Symmetric eigendecomposition and matrix norms.
//!
//! [`sym_eigen`] reduces to tridiagonal form with Householder reflections and
//! then runs the implicit QL iteration. [`jacobi_eigen`] is a cyclic Jacobi
//! solver kept as an independent second route.

use serde::Serialize;

use super::matrix::{Matrix, SymMatrix};
use crate::error::{Error, Result};

/// Iteration cap for both solvers: QL iterations per eigenvalue, or Jacobi
/// sweeps.
pub const MAX_EIGEN_ITERATIONS: usize = 100;

#[derive(Clone, Debug, Serialize)]
pub struct EigenDecomposition {
    /// Sorted non-increasing.
    pub values: Vec<f64>,
    /// Column `i` is the unit eigenvector for `values[i]`.
    pub vectors: Matrix,
}

impl EigenDecomposition {
    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.vectors.column(i)
    }

    fn sorted(values: Vec<f64>, vectors: Matrix) -> Self {
        let p = values.len();
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
        let mut out = Matrix::zeros(p, p);
        for (dst, &src) in order.iter().enumerate() {
            // First nonzero component positive.
            let sign = (0..p)
                .map(|r| vectors[(r, src)])
                .find(|v| v.abs() > 1e-12)
                .map_or(1.0, |v| v.signum());
            for r in 0..p {
                out[(r, dst)] = sign * vectors[(r, src)];
            }
        }
        EigenDecomposition {
            values: order.iter().map(|&i| values[i]).collect(),
            vectors: out,
        }
    }
}

/// Eigenvalues (descending) and orthonormal eigenvectors of `m`.
pub fn sym_eigen(m: &SymMatrix) -> Result<EigenDecomposition> {
    let p = m.dim();
    let mut v = m.as_matrix().clone();
    let mut d = vec![0.0; p];
    let mut e = vec![0.0; p];
    tridiagonalize(&mut v, &mut d, &mut e, true);
    tridiagonal_ql(&mut d, &mut e, Some(&mut v))?;
    Ok(EigenDecomposition::sorted(d, v))
}

/// Eigenvalues only, descending.
pub fn sym_eigenvalues(m: &SymMatrix) -> Result<Vec<f64>> {
    let p = m.dim();
    let mut v = m.as_matrix().clone();
    let mut d = vec![0.0; p];
    let mut e = vec![0.0; p];
    tridiagonalize(&mut v, &mut d, &mut e, false);
    tridiagonal_ql(&mut d, &mut e, None)?;
    d.sort_by(|a, b| b.total_cmp(a));
    Ok(d)
}

// Householder reduction to tridiagonal form (EISPACK tred2 ordering). On
// return `d` holds the diagonal, `e[1..]` the subdiagonal, and `v` the
// accumulated orthogonal transform when `accumulate` is set.
fn tridiagonalize(v: &mut Matrix, d: &mut [f64], e: &mut [f64], accumulate: bool) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in j + 1..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    if !accumulate {
        for j in 0..n {
            d[j] = v[(j, j)];
        }
        e[0] = 0.0;
        return;
    }

    for i in 0..n.saturating_sub(1) {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    v[(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = 0.0;
    }
    v[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

// Implicit QL on the tridiagonal (d, e); rotations are applied to `v` when
// given.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], mut v: Option<&mut Matrix>) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_EIGEN_ITERATIONS {
                    return Err(Error::NoConvergence {
                        iterations: MAX_EIGEN_ITERATIONS,
                    });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(v) = v.as_deref_mut() {
                        for k in 0..n {
                            let vh = v[(k, i + 1)];
                            v[(k, i + 1)] = s * v[(k, i)] + c * vh;
                            v[(k, i)] = c * v[(k, i)] - s * vh;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Cyclic Jacobi eigen solver, capped at [`MAX_EIGEN_ITERATIONS`] sweeps.
pub fn jacobi_eigen(m: &SymMatrix) -> Result<EigenDecomposition> {
    let p = m.dim();
    let mut a = m.as_matrix().clone();
    let mut v = Matrix::identity(p);
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    for _ in 0..MAX_EIGEN_ITERATIONS {
        let off: f64 = (0..p)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off.sqrt() <= 1e-15 * scale * p as f64 {
            let values = a.diag();
            return Ok(EigenDecomposition::sorted(values, v));
        }
        for q in 1..p {
            for r in 0..q {
                let apq = a[(r, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(r, r)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..p {
                    let akr = a[(k, r)];
                    let akq = a[(k, q)];
                    a[(k, r)] = c * akr - s * akq;
                    a[(k, q)] = s * akr + c * akq;
                }
                for k in 0..p {
                    let ark = a[(r, k)];
                    let aqk = a[(q, k)];
                    a[(r, k)] = c * ark - s * aqk;
                    a[(q, k)] = s * ark + c * aqk;
                }
                for k in 0..p {
                    let vkr = v[(k, r)];
                    let vkq = v[(k, q)];
                    v[(k, r)] = c * vkr - s * vkq;
                    v[(k, q)] = s * vkr + c * vkq;
                }
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_EIGEN_ITERATIONS,
    })
}

/// Matrix 2-norm: `sqrt(λ_max(M Mᵀ))`, or `max |λ|` for symmetric input.
pub fn operator_norm(m: &Matrix) -> Result<f64> {
    if m.rows() == 0 || m.cols() == 0 {
        return Ok(0.0);
    }
    if m.is_symmetric(0.0) {
        let vals = sym_eigenvalues(&SymMatrix::new(m.clone())?)?;
        return Ok(vals.iter().fold(0.0_f64, |a, v| a.max(v.abs())));
    }
    let gram = SymMatrix::symmetrize(&m.matmul(&m.transpose())?)?;
    let top = sym_eigenvalues(&gram)?[0];
    Ok(top.max(0.0).sqrt())
}

pub fn frobenius_norm(m: &Matrix) -> f64 {
    m.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt()
}
