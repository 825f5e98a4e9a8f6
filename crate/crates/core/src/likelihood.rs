//! Normal negative log-likelihood in the inverse-factor parameterization
//! `Ω = Tᵀ D⁻¹ T`, up to an additive constant:
//!
//! `g(T, D) = Σ_j ( n log d_jj + Σ_i (x_ij + Σ_v t_jv x_iv)² / d_jj )`.
//!
//! Gradients are closed form. Two checks live here: inverse-factor banding
//! is a stationary point of `g` over the banded parameters, while covariance
//! factor banding is not stationary for the banded-covariance likelihood.

use serde::Serialize;

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::estimators::chol_banding;
use crate::linalg::{dot, CholeskyFactors};

/// Central finite-difference step used by the gradient checks.
pub const FD_STEP: f64 = 1e-5;

/// A free parameter of a `k`-banded `(T, D)` pair, 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FreeParam {
    /// `t_{row,col}` with `row − k <= col < row`.
    T { row: usize, col: usize },
    /// `d_{index,index}`.
    D { index: usize },
}

#[derive(Clone, Debug, Serialize)]
pub struct LikelihoodValue {
    pub value: f64,
    pub gradient: Vec<(FreeParam, f64)>,
}

impl LikelihoodValue {
    pub fn max_abs_gradient(&self) -> f64 {
        self.gradient.iter().fold(0.0, |m, (_, g)| m.max(g.abs()))
    }
}

/// Free parameters for dimension `p` and band `k`, row by row.
pub fn free_parameters(p: usize, k: usize) -> Vec<FreeParam> {
    let mut out = Vec::new();
    for row in 0..p {
        for col in row.saturating_sub(k)..row {
            out.push(FreeParam::T { row, col });
        }
        out.push(FreeParam::D { index: row });
    }
    out
}

/// Value and gradient of `g(T, D)` at the inverse factors `factors`.
pub fn neg_loglik_td(data: &DataMatrix, factors: &CholeskyFactors, k: usize) -> Result<LikelihoodValue> {
    data.require_centered()?;
    let (n, p) = (data.n(), data.p());
    if factors.dim() != p {
        return Err(Error::DimMismatch {
            expected: format!("{p}x{p} factors"),
            actual: format!("{0}x{0}", factors.dim()),
        });
    }
    let t = factors.unit_lower();
    for row in 0..p {
        if let Some(col) = (0..row.saturating_sub(k)).find(|&c| t[(row, c)] != 0.0) {
            return Err(Error::InvalidParameter(format!(
                "factor entry ({}, {}) lies outside band {k}",
                row + 1,
                col + 1
            )));
        }
    }
    let cols = data.values().columns();
    let d = factors.diag();
    let mut value = 0.0;
    let mut gradient = Vec::new();
    for j in 0..p {
        let lo = j.saturating_sub(k);
        let mut r = cols[j].clone();
        for v in lo..j {
            let tv = t[(j, v)];
            r.iter_mut().zip(&cols[v]).for_each(|(a, x)| *a += tv * x);
        }
        let rr = dot(&r, &r);
        value += n as f64 * d[j].ln() + rr / d[j];
        for v in lo..j {
            gradient.push((FreeParam::T { row: j, col: v }, 2.0 * dot(&r, &cols[v]) / d[j]));
        }
        gradient.push((FreeParam::D { index: j }, n as f64 / d[j] - rr / (d[j] * d[j])));
    }
    Ok(LikelihoodValue { value, gradient })
}

/// Copy of `factors` with one free parameter shifted by `delta`.
pub fn perturb(factors: &CholeskyFactors, param: FreeParam, delta: f64) -> Result<CholeskyFactors> {
    let mut t = factors.unit_lower().clone();
    let mut d = factors.diag().to_vec();
    match param {
        FreeParam::T { row, col } => t[(row, col)] += delta,
        FreeParam::D { index } => d[index] += delta,
    }
    CholeskyFactors::new(t, d)
}

/// `b(l21, l32, D)`: the negative log-likelihood of three variables under
/// `σ31 = 0`, written through the covariance factor entries.
pub fn banded_three_objective(data: &DataMatrix, l21: f64, l32: f64, d: [f64; 3]) -> Result<f64> {
    let [x1, x2, x3] = three_columns(data)?;
    let n = data.n() as f64;
    let r2: f64 = x2.iter().zip(&x1).map(|(b, a)| (b - l21 * a).powi(2)).sum();
    let r3: f64 = (0..x1.len())
        .map(|i| (x3[i] + l32 * l21 * x1[i] - l32 * x2[i]).powi(2))
        .sum();
    Ok(n * d.iter().map(|v| v.ln()).sum::<f64>() + dot(&x1, &x1) / d[0] + r2 / d[1] + r3 / d[2])
}

/// `∂b/∂l21` from the general derivative.
pub fn banded_three_partial_l21(data: &DataMatrix, l21: f64, l32: f64, d: [f64; 3]) -> Result<f64> {
    let [x1, x2, x3] = three_columns(data)?;
    let (x11, x12, x13) = (dot(&x1, &x1), dot(&x1, &x2), dot(&x1, &x3));
    Ok((2.0 * l21 * x11 - 2.0 * x12) / d[1]
        + (2.0 * l32 * x13 - 2.0 * l32 * l32 * x12 + 2.0 * l21 * l32 * l32 * x11) / d[2])
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BandingGradientCheck {
    /// `∂b/∂l21` evaluated at the banding solution.
    pub gradient: f64,
    /// `2 l̂32 x1ᵀx3 / d̂33`.
    pub closed_form: f64,
    pub l21: f64,
    pub l32: f64,
    pub d: [f64; 3],
}

/// Evaluates `∂b/∂l21` at the covariance-factor banding estimate with
/// `k = 1` for three variables, alongside its closed form.
pub fn covariance_banding_gradient(data: &DataMatrix) -> Result<BandingGradientCheck> {
    let [x1, _, x3] = three_columns(data)?;
    let est = chol_banding(data, 1)?;
    let f = est.factors.as_ref().expect("chol banding returns factors");
    let (l21, l32) = (f.unit_lower()[(1, 0)], f.unit_lower()[(2, 1)]);
    let d = [f.diag()[0], f.diag()[1], f.diag()[2]];
    Ok(BandingGradientCheck {
        gradient: banded_three_partial_l21(data, l21, l32, d)?,
        closed_form: 2.0 * l32 * dot(&x1, &x3) / d[2],
        l21,
        l32,
        d,
    })
}

fn three_columns(data: &DataMatrix) -> Result<[Vec<f64>; 3]> {
    data.require_centered()?;
    if data.p() != 3 {
        return Err(Error::DimMismatch {
            expected: "3 variables".into(),
            actual: format!("{} variables", data.p()),
        });
    }
    let mut cols = data.values().columns().into_iter();
    Ok([cols.next().unwrap(), cols.next().unwrap(), cols.next().unwrap()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::center;
    use crate::linalg::Matrix;
    use approx::assert_abs_diff_eq;

    fn data() -> DataMatrix {
        center(
            &Matrix::from_rows(&[
                [0.3, 1.2, -0.7],
                [1.1, 0.4, 0.2],
                [-0.8, -0.9, 0.5],
                [0.2, 0.7, 1.4],
                [-1.5, -0.3, -0.6],
                [0.9, -0.2, 0.1],
            ])
            .unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn identity_t_plug_in() {
        let x = data();
        let n = x.n() as f64;
        let d: Vec<f64> = x.values().columns().iter().map(|c| dot(c, c) / n).collect();
        let f = CholeskyFactors::new(Matrix::identity(3), d.clone()).unwrap();
        let v = neg_loglik_td(&x, &f, 0).unwrap();
        let expect: f64 = d.iter().map(|dj| n * (dj.ln() + 1.0)).sum();
        assert_abs_diff_eq!(v.value, expect, epsilon = 1e-12);
        assert!(v.max_abs_gradient() < 1e-12);
    }

    #[test]
    fn out_of_band_entry_rejected() {
        let x = data();
        let mut t = Matrix::identity(3);
        t[(2, 0)] = 0.1;
        let f = CholeskyFactors::new(t, vec![1.0; 3]).unwrap();
        assert!(neg_loglik_td(&x, &f, 1).is_err());
        assert!(neg_loglik_td(&x, &f, 2).is_ok());
    }

    #[test]
    fn free_parameter_layout() {
        let ps = free_parameters(3, 1);
        assert_eq!(
            ps,
            vec![
                FreeParam::D { index: 0 },
                FreeParam::T { row: 1, col: 0 },
                FreeParam::D { index: 1 },
                FreeParam::T { row: 2, col: 1 },
                FreeParam::D { index: 2 },
            ]
        );
    }

    #[test]
    fn orthogonal_first_and_third_give_zero_gradient() {
        // Make x3 orthogonal to x1 by projecting it out.
        let x = data();
        let cols = x.values().columns();
        let c = dot(&cols[0], &cols[2]) / dot(&cols[0], &cols[0]);
        let m = Matrix::from_fn(x.n(), 3, |i, j| {
            if j == 2 {
                cols[2][i] - c * cols[0][i]
            } else {
                cols[j][i]
            }
        });
        let x = DataMatrix::from_centered(m).unwrap();
        let check = covariance_banding_gradient(&x).unwrap();
        assert_abs_diff_eq!(check.gradient, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(check.closed_form, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn three_variable_check_needs_three_columns() {
        let x = center(&Matrix::from_fn(5, 2, |i, j| (i * (j + 2)) as f64 + 0.5 * (i % 2) as f64)).unwrap();
        assert!(covariance_banding_gradient(&x).is_err());
    }
}
