//! Covariance estimators.
//!
//! The Cholesky-based estimators all run the same sequence of regressions:
//! `x_1` is kept as is, and each later column `x_j` is regressed either on
//! earlier residuals `e_q` (covariance factor `L`) or on earlier variables
//! `x_q` (inverse factor `T`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::linalg::{
    dot, invert_unit_lower, precision_from_inverse_factors, reconstruct, solve_spd, CholeskyFactors,
    Matrix, SymMatrix,
};
use crate::penalty::{self, PenalizedProblem, PenaltyKind};

/// A residual whose mean square falls below this fraction of its column's
/// second moment is treated as exactly collinear.
pub const DEGENERATE_RESIDUAL_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sample,
    SampleBanding,
    CholBanding,
    InvCholBanding,
    LedoitWolf,
    Diagonal,
    LassoChol,
    NestedLassoChol,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Sample,
        Method::SampleBanding,
        Method::CholBanding,
        Method::InvCholBanding,
        Method::LedoitWolf,
        Method::Diagonal,
        Method::LassoChol,
        Method::NestedLassoChol,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Sample => "sample",
            Method::SampleBanding => "sample_banding",
            Method::CholBanding => "chol_banding",
            Method::InvCholBanding => "inv_chol_banding",
            Method::LedoitWolf => "ledoit_wolf",
            Method::Diagonal => "diagonal",
            Method::LassoChol => "lasso_chol",
            Method::NestedLassoChol => "nested_lasso_chol",
        }
    }

    pub fn is_banding(self) -> bool {
        matches!(
            self,
            Method::SampleBanding | Method::CholBanding | Method::InvCholBanding
        )
    }

    pub fn is_penalized(self) -> bool {
        matches!(self, Method::LassoChol | Method::NestedLassoChol)
    }

    pub fn is_tunable(self) -> bool {
        self.is_banding() || self.is_penalized()
    }

    /// Whether zeros in the estimate come out structurally exact.
    pub fn has_exact_zeros(self) -> bool {
        !self.is_penalized()
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
                Error::InvalidParameter(format!(
                    "unknown method '{s}' (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

/// Method plus tuning parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub method: Method,
    /// Band width, used by the banding methods.
    pub k: usize,
    /// Penalty level, used by the penalized methods.
    pub lambda: f64,
}

impl EstimatorSpec {
    pub fn new(method: Method) -> Self {
        EstimatorSpec {
            method,
            k: 0,
            lambda: 0.0,
        }
    }

    pub fn banded(method: Method, k: usize) -> Self {
        EstimatorSpec {
            method,
            k,
            lambda: 0.0,
        }
    }

    pub fn penalized(method: Method, lambda: f64) -> Self {
        EstimatorSpec {
            method,
            k: 0,
            lambda,
        }
    }

    pub fn validate(&self, n: usize, p: usize) -> Result<()> {
        if matches!(self.method, Method::CholBanding | Method::InvCholBanding) {
            let limit = band_limit(n, p);
            if self.k >= limit {
                return Err(Error::InvalidBand { k: self.k, limit });
            }
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda must be finite and non-negative, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// `min(n − 1, p)`: bands must stay strictly below this.
pub fn band_limit(n: usize, p: usize) -> usize {
    n.saturating_sub(1).min(p)
}

#[derive(Clone, Debug, Serialize)]
pub struct CovarianceEstimate {
    pub sigma: SymMatrix,
    /// Covariance factors `(L, D)` with `sigma = L D Lᵀ`.
    pub factors: Option<CholeskyFactors>,
    /// Inverse factors `(T, D)` with `sigma⁻¹ = Tᵀ D⁻¹ T`.
    pub inverse_factors: Option<CholeskyFactors>,
    pub precision: Option<SymMatrix>,
    pub spec: EstimatorSpec,
}

impl CovarianceEstimate {
    fn plain(sigma: SymMatrix, spec: EstimatorSpec) -> Self {
        CovarianceEstimate {
            sigma,
            factors: None,
            inverse_factors: None,
            precision: None,
            spec,
        }
    }
}

/// Runs the estimator described by `spec`.
pub fn estimate(data: &DataMatrix, spec: &EstimatorSpec) -> Result<CovarianceEstimate> {
    spec.validate(data.n(), data.p())?;
    let mut est = match spec.method {
        Method::Sample => sample_covariance(data)?,
        Method::SampleBanding => sample_banding(data, spec.k)?,
        Method::CholBanding => chol_banding(data, spec.k)?,
        Method::InvCholBanding => inv_chol_banding(data, spec.k)?,
        Method::LedoitWolf => ledoit_wolf(data)?,
        Method::Diagonal => diagonal_estimator(data)?,
        Method::LassoChol => penalized_chol(data, PenaltyKind::Lasso, spec.lambda)?,
        Method::NestedLassoChol => penalized_chol(data, PenaltyKind::NestedLasso, spec.lambda)?,
    };
    est.spec = *spec;
    Ok(est)
}

/// `(1/n) Xᵀ X`.
pub fn sample_covariance(data: &DataMatrix) -> Result<CovarianceEstimate> {
    data.require_centered()?;
    let s = SymMatrix::new(data.values().gram().scale(1.0 / data.n() as f64))?;
    Ok(CovarianceEstimate::plain(s, EstimatorSpec::new(Method::Sample)))
}

/// Zeroes entries more than `k` off the diagonal.
pub fn band_matrix(m: &SymMatrix, k: usize) -> SymMatrix {
    SymMatrix::from_lower_fn(m.dim(), |i, j| if i - j <= k { m[(i, j)] } else { 0.0 })
}

pub fn sample_banding(data: &DataMatrix, k: usize) -> Result<CovarianceEstimate> {
    let s = sample_covariance(data)?.sigma;
    Ok(CovarianceEstimate::plain(
        band_matrix(&s, k),
        EstimatorSpec::banded(Method::SampleBanding, k),
    ))
}

/// Diagonal of the sample covariance.
pub fn diagonal_estimator(data: &DataMatrix) -> Result<CovarianceEstimate> {
    data.require_centered()?;
    let n = data.n() as f64;
    let d: Vec<f64> = data
        .values()
        .columns()
        .iter()
        .map(|c| dot(c, c) / n)
        .collect();
    let factors = CholeskyFactors::new(Matrix::identity(d.len()), d.clone()).ok();
    Ok(CovarianceEstimate {
        sigma: SymMatrix::from_diag(&d),
        inverse_factors: factors.clone(),
        precision: factors.as_ref().map(|_| SymMatrix::from_diag(&d.iter().map(|v| 1.0 / v).collect::<Vec<_>>())),
        factors,
        spec: EstimatorSpec::new(Method::Diagonal),
    })
}

/// Factors and residuals from regressing each column on at most `k`
/// preceding residuals.
#[derive(Clone, Debug)]
pub struct ResidualRegression {
    pub factors: CholeskyFactors,
    /// Residual vectors `e_1, …, e_p`.
    pub residuals: Vec<Vec<f64>>,
}

/// Banded residual regressions: `x_j` on `e_{j−k}, …, e_{j−1}`.
///
/// The design columns inside each window are mutually orthogonal, so the
/// least-squares fit is a sequence of univariate projections (applied in
/// modified Gram-Schmidt order) and the total cost is `O(k p n)`.
pub fn banded_residual_regression(data: &DataMatrix, k: usize) -> Result<ResidualRegression> {
    data.require_centered()?;
    let (n, p) = (data.n(), data.p());
    let limit = band_limit(n, p);
    if k >= limit {
        return Err(Error::InvalidBand { k, limit });
    }
    let cols = data.values().columns();
    let mut l = Matrix::identity(p);
    let mut d = vec![0.0; p];
    let mut resid: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut resid_sq = vec![0.0; p];
    for (j, x) in cols.iter().enumerate() {
        let mut e = x.clone();
        for q in j.saturating_sub(k)..j {
            let coef = dot(&e, &resid[q]) / resid_sq[q];
            l[(j, q)] = coef;
            e.iter_mut().zip(&resid[q]).for_each(|(a, b)| *a -= coef * b);
        }
        let ee = dot(&e, &e);
        if !(ee > DEGENERATE_RESIDUAL_TOL * dot(x, x)) {
            return Err(Error::DegenerateResidual { column: j + 1 });
        }
        resid_sq[j] = ee;
        d[j] = ee / n as f64;
        resid.push(e);
    }
    Ok(ResidualRegression {
        factors: CholeskyFactors::new(l, d)?,
        residuals: resid,
    })
}

/// Banding the covariance Cholesky factor; always positive definite.
pub fn chol_banding(data: &DataMatrix, k: usize) -> Result<CovarianceEstimate> {
    let fit = banded_residual_regression(data, k)?;
    let sigma = reconstruct(&fit.factors);
    Ok(CovarianceEstimate {
        sigma,
        inverse_factors: Some(fit.factors.inverted()),
        factors: Some(fit.factors),
        precision: None,
        spec: EstimatorSpec::banded(Method::CholBanding, k),
    })
}

/// Inverse factors from regressing `x_j` on `x_{j−k}, …, x_{j−1}`.
pub fn inverse_banded_factors(data: &DataMatrix, k: usize) -> Result<CholeskyFactors> {
    data.require_centered()?;
    let (n, p) = (data.n(), data.p());
    let limit = band_limit(n, p);
    if k >= limit {
        return Err(Error::InvalidBand { k, limit });
    }
    let cols = data.values().columns();
    // Banded cross products x_aᵀ x_b for |a − b| <= k.
    let mut gram = Matrix::zeros(p, p);
    for a in 0..p {
        for b in a.saturating_sub(k)..=a {
            let v = dot(&cols[a], &cols[b]);
            gram[(a, b)] = v;
            gram[(b, a)] = v;
        }
    }
    let mut t = Matrix::identity(p);
    let mut d = vec![0.0; p];
    for j in 0..p {
        let lo = j.saturating_sub(k);
        let w = j - lo;
        let mut e = cols[j].clone();
        if w > 0 {
            let g = Matrix::from_fn(w, w, |a, b| gram[(lo + a, lo + b)]);
            let rhs: Vec<f64> = (lo..j).map(|v| gram[(v, j)]).collect();
            let beta = solve_spd(&g, &rhs).ok_or(Error::DegenerateResidual { column: j + 1 })?;
            for (off, b) in beta.iter().enumerate() {
                t[(j, lo + off)] = -b;
                e.iter_mut().zip(&cols[lo + off]).for_each(|(a, x)| *a -= b * x);
            }
        }
        let ee = dot(&e, &e);
        if !(ee > DEGENERATE_RESIDUAL_TOL * gram[(j, j)]) {
            return Err(Error::DegenerateResidual { column: j + 1 });
        }
        d[j] = ee / n as f64;
    }
    CholeskyFactors::new(t, d)
}

/// Banding the Cholesky factor of the inverse covariance.
pub fn inv_chol_banding(data: &DataMatrix, k: usize) -> Result<CovarianceEstimate> {
    let inv = inverse_banded_factors(data, k)?;
    let precision = precision_from_inverse_factors(&inv);
    let factors = CholeskyFactors::new(invert_unit_lower(inv.unit_lower()), inv.diag().to_vec())?;
    Ok(CovarianceEstimate {
        sigma: reconstruct(&factors),
        factors: Some(factors),
        inverse_factors: Some(inv),
        precision: Some(precision),
        spec: EstimatorSpec::banded(Method::InvCholBanding, k),
    })
}

/// Scale and intensity of identity-target shrinkage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Shrinkage {
    /// `trace(S) / p`.
    pub mu: f64,
    /// Weight on `μ I`, in `[0, 1]`.
    pub intensity: f64,
}

/// Identity-target shrinkage coefficients.
///
/// With `‖A‖² = trace(A Aᵀ) / p`: `d² = ‖S − μI‖²`,
/// `b̄² = n⁻² Σ_i ‖x_i x_iᵀ − S‖²`, `b² = min(b̄², d²)` and
/// intensity `b² / d²`.
pub fn ledoit_wolf_shrinkage(data: &DataMatrix) -> Result<Shrinkage> {
    let s = sample_covariance(data)?.sigma;
    let (n, p) = (data.n() as f64, data.p() as f64);
    let mu = s.trace() / p;
    let s_sq: f64 = s.as_slice().iter().map(|v| v * v).sum();
    let d2 = (s_sq - 2.0 * mu * s.trace() + mu * mu * p) / p;
    if !(d2 > 0.0) {
        return Ok(Shrinkage { mu, intensity: 0.0 });
    }
    // Σ_i ‖x_i x_iᵀ − S‖²_F = Σ_i ‖x_i‖⁴ − n ‖S‖²_F.
    let x = data.values();
    let fourth: f64 = (0..x.rows())
        .map(|i| {
            let r = x.row(i);
            let sq = dot(r, r);
            sq * sq
        })
        .sum();
    let b2_bar = ((fourth - n * s_sq) / (n * n) / p).max(0.0);
    let b2 = b2_bar.min(d2);
    Ok(Shrinkage {
        mu,
        intensity: (b2 / d2).clamp(0.0, 1.0),
    })
}

/// `ρ μ I + (1 − ρ) S` with the intensity from [`ledoit_wolf_shrinkage`].
pub fn ledoit_wolf(data: &DataMatrix) -> Result<CovarianceEstimate> {
    let s = sample_covariance(data)?.sigma;
    let Shrinkage { mu, intensity } = ledoit_wolf_shrinkage(data)?;
    let sigma = SymMatrix::from_lower_fn(s.dim(), |i, j| {
        let target = if i == j { mu } else { 0.0 };
        intensity * target + (1.0 - intensity) * s[(i, j)]
    });
    Ok(CovarianceEstimate::plain(sigma, EstimatorSpec::new(Method::LedoitWolf)))
}

/// Penalized residual regressions: `x_j` on all of `e_1, …, e_{j−1}` with
/// a lasso or nested lasso penalty; residuals are those of the penalized fits.
pub fn penalized_chol(data: &DataMatrix, kind: PenaltyKind, lambda: f64) -> Result<CovarianceEstimate> {
    data.require_centered()?;
    let (n, p) = (data.n(), data.p());
    let cols = data.values().columns();
    let mut l = Matrix::identity(p);
    let mut d = vec![0.0; p];
    let mut resid: Vec<Vec<f64>> = Vec::with_capacity(p);
    for (j, x) in cols.iter().enumerate() {
        let mut e = x.clone();
        if j > 0 {
            let prob = PenalizedProblem::new(x, &resid, lambda, kind);
            let fit = penalty::solve(&prob)?;
            for (q, &b) in fit.coefficients.iter().enumerate() {
                if b != 0.0 {
                    l[(j, q)] = b;
                    e.iter_mut().zip(&resid[q]).for_each(|(a, z)| *a -= b * z);
                }
            }
        }
        let ee = dot(&e, &e);
        if !(ee > DEGENERATE_RESIDUAL_TOL * dot(x, x)) {
            return Err(Error::DegenerateResidual { column: j + 1 });
        }
        d[j] = ee / n as f64;
        resid.push(e);
    }
    let factors = CholeskyFactors::new(l, d)?;
    let method = match kind {
        PenaltyKind::Lasso => Method::LassoChol,
        PenaltyKind::NestedLasso => Method::NestedLassoChol,
    };
    Ok(CovarianceEstimate {
        sigma: reconstruct(&factors),
        inverse_factors: Some(factors.inverted()),
        factors: Some(factors),
        precision: None,
        spec: EstimatorSpec::penalized(method, lambda),
    })
}

/// Largest useful penalty for [`penalized_chol`]: at or above it every
/// regression's coefficients are zero.
pub fn penalized_lambda_max(data: &DataMatrix, kind: PenaltyKind) -> Result<f64> {
    data.require_centered()?;
    let cols = data.values().columns();
    let mut lmax: f64 = 0.0;
    for j in 1..cols.len() {
        lmax = lmax.max(penalty::lasso_lambda_max(&cols[j], &cols[..j]));
        if kind == PenaltyKind::NestedLasso {
            // Keeps the nearest coefficient at zero once the others are.
            let z = &cols[j - 1];
            let zz = dot(z, z);
            if zz > 0.0 {
                let zy = dot(z, &cols[j]);
                lmax = lmax.max(2.0 * zy * zy / zz);
            }
        }
    }
    Ok(lmax)
}
