//! Independent reference computations for the integration tests. Nothing
//! here calls into the factorization code under test.
#![allow(dead_code)]

use covchol::linalg::{Matrix, SymMatrix};
use covchol::rng::{seeded_rng, standard_normals};
use covchol::{center, DataMatrix};

pub fn gaussian(seed: u64, rows: usize, cols: usize) -> Matrix {
    let mut rng = seeded_rng(seed);
    Matrix::from_row_major(rows, cols, standard_normals(&mut rng, rows * cols)).unwrap()
}

/// `AᵀA + eps·I` with Gaussian `A`.
pub fn random_spd(seed: u64, p: usize, eps: f64) -> SymMatrix {
    let a = gaussian(seed, p + 2, p);
    let mut g = a.gram();
    for i in 0..p {
        g[(i, i)] += eps;
    }
    SymMatrix::symmetrize(&g).unwrap()
}

/// Centered `n × p` data with correlated columns: `G B` for Gaussian `G`
/// and a random mixing matrix `B = I + 0.5 W`.
pub fn correlated_data(seed: u64, n: usize, p: usize) -> DataMatrix {
    let g = gaussian(seed, n, p);
    let w = gaussian(seed ^ 0x5eed, p, p);
    let b = Matrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { 0.0 } + 0.5 * w[(i, j)]);
    center(&g.matmul(&b).unwrap()).unwrap()
}

/// Gaussian elimination with partial pivoting on `[A | B]`.
pub fn solve(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.rows();
    let m = b.cols();
    let mut aug: Vec<Vec<f64>> = (0..n)
        .map(|i| a.row(i).iter().chain(b.row(i)).copied().collect())
        .collect();
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&x, &y| aug[x][c].abs().total_cmp(&aug[y][c].abs()))
            .unwrap();
        aug.swap(c, piv);
        let pv = aug[c][c];
        assert!(pv.abs() > 1e-300, "singular system");
        for r in 0..n {
            if r != c {
                let f = aug[r][c] / pv;
                if f != 0.0 {
                    for q in c..n + m {
                        aug[r][q] -= f * aug[c][q];
                    }
                }
            }
        }
    }
    Matrix::from_fn(n, m, |i, j| aug[i][n + j] / aug[i][i])
}

pub fn inverse(a: &Matrix) -> Matrix {
    solve(a, &Matrix::identity(a.rows()))
}

/// `log |det A|` by LU with partial pivoting.
pub fn log_abs_det(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    let mut acc = 0.0;
    for c in 0..n {
        let piv = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
        m.swap(c, piv);
        acc += m[c][c].abs().ln();
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for q in c..n {
                m[r][q] -= f * m[c][q];
            }
        }
    }
    acc
}

/// Least squares through the normal equations.
pub fn ols(y: &[f64], cols: &[Vec<f64>]) -> Vec<f64> {
    let k = cols.len();
    let g = Matrix::from_fn(k, k, |a, b| dotp(&cols[a], &cols[b]));
    let rhs = Matrix::from_fn(k, 1, |a, _| dotp(&cols[a], y));
    solve(&g, &rhs).column(0)
}

pub fn dotp(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Unit lower-triangular matrix whose row `i` is zero in columns
/// `0..lead[i]`, other entries drawn from `seed`.
pub fn unit_lower_with_leading_zeros(seed: u64, lead: &[usize]) -> Matrix {
    let p = lead.len();
    let g = gaussian(seed, p, p);
    Matrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else if j < i && j >= lead[i] {
            0.5 * g[(i, j)]
        } else {
            0.0
        }
    })
}
