//! Tuning by repeated random splitting, for data without a known truth.
//!
//! Each split puts `⌈n · train_frac⌉` random rows in a training part and the
//! rest in a validation part, each centered on its own mean. Every candidate
//! is fitted on the same training parts (splits are paired across
//! candidates) and the criterion is averaged over splits.

use serde::Serialize;

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::estimators::{
    band_matrix, estimate, inverse_banded_factors, penalized_lambda_max, sample_covariance,
    EstimatorSpec, Method,
};
use crate::linalg::{frobenius_norm, precision_from_inverse_factors, SymMatrix};
use crate::parallel::map_indexed;
use crate::penalty::{lambda_grid, PenaltyKind};
use crate::rng::{derive_seed, permutation, seeded_rng};
use crate::simulation::{LAMBDA_GRID_POINTS, LAMBDA_GRID_RATIO};

pub const DEFAULT_SPLITS: usize = 100;
pub const DEFAULT_TRAIN_FRAC: f64 = 1.0 / 3.0;

#[derive(Clone, Debug, Serialize)]
pub struct SplitSelection {
    pub spec: EstimatorSpec,
    /// Candidates in the order tried.
    pub candidates: Vec<EstimatorSpec>,
    /// Mean criterion per candidate; infinite where a fit failed on some split.
    pub curve: Vec<f64>,
}

impl SplitSelection {
    pub fn k(&self) -> usize {
        self.spec.k
    }
}

/// Training-part size and the largest admissible band.
pub fn split_sizes(n: usize, p: usize, train_frac: f64) -> Result<(usize, usize)> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train fraction must lie in (0, 1), got {train_frac}"
        )));
    }
    if n < 6 {
        return Err(Error::InsufficientData(format!(
            "random splitting needs at least 6 rows, got {n}"
        )));
    }
    let exact = n as f64 * train_frac;
    let n_train = (exact - 1e-9).ceil() as usize;
    if n_train < 3 {
        return Err(Error::InsufficientData(format!(
            "training split has {n_train} rows, need at least 3"
        )));
    }
    if n - n_train < 2 {
        return Err(Error::InsufficientData(format!(
            "validation split has {} rows, need at least 2",
            n - n_train
        )));
    }
    let floor = (exact + 1e-9).floor() as usize;
    let k_max = floor.saturating_sub(2).min(p - 1);
    Ok((n_train, k_max))
}

/// Selects the band for a banding method. The criterion is the Frobenius
/// distance to the validation sample covariance, except for
/// `inv_chol_banding`, which uses the validation negative log-likelihood.
pub fn select_band_random_split(
    data: &DataMatrix,
    method: Method,
    n_splits: usize,
    train_frac: f64,
    seed: u64,
) -> Result<SplitSelection> {
    if !method.is_banding() {
        return Err(Error::InvalidParameter(format!(
            "{method} is not a banding method"
        )));
    }
    let (_, k_max) = split_sizes(data.n(), data.p(), train_frac)?;
    let candidates: Vec<EstimatorSpec> = (0..=k_max).map(|k| EstimatorSpec::banded(method, k)).collect();
    select_random_split(data, &candidates, n_splits, train_frac, seed)
}

/// Selects `λ` for a penalized method over the standard log grid, which
/// starts at the all-zero penalty of the full data.
pub fn select_lambda_random_split(
    data: &DataMatrix,
    method: Method,
    n_splits: usize,
    train_frac: f64,
    seed: u64,
) -> Result<SplitSelection> {
    let kind = match method {
        Method::LassoChol => PenaltyKind::Lasso,
        Method::NestedLassoChol => PenaltyKind::NestedLasso,
        _ => {
            return Err(Error::InvalidParameter(format!(
                "{method} is not a penalized method"
            )))
        }
    };
    let lmax = penalized_lambda_max(&data.centered(), kind)?;
    let candidates: Vec<EstimatorSpec> = lambda_grid(lmax, LAMBDA_GRID_POINTS, LAMBDA_GRID_RATIO)
        .into_iter()
        .map(|l| EstimatorSpec::penalized(method, l))
        .collect();
    select_random_split(data, &candidates, n_splits, train_frac, seed)
}

/// Averages the split criterion of every candidate and returns the first
/// minimizer.
pub fn select_random_split(
    data: &DataMatrix,
    candidates: &[EstimatorSpec],
    n_splits: usize,
    train_frac: f64,
    seed: u64,
) -> Result<SplitSelection> {
    if candidates.is_empty() || n_splits == 0 {
        return Err(Error::InvalidParameter("need candidates and at least one split".into()));
    }
    let (n_train, _) = split_sizes(data.n(), data.p(), train_frac)?;
    let per_split = map_indexed(n_splits, |s| -> Result<Vec<f64>> {
        let perm = permutation(&mut seeded_rng(derive_seed(seed, s as u64)), data.n());
        let train = data.select_rows(&perm[..n_train])?.centered();
        let valid = data.select_rows(&perm[n_train..])?.centered();
        let valid_cov = sample_covariance(&valid)?.sigma;
        let train_cov = sample_covariance(&train)?.sigma;
        Ok(candidates
            .iter()
            .map(|spec| split_criterion(&train, &train_cov, &valid_cov, spec).unwrap_or(f64::INFINITY))
            .collect())
    });
    let mut curve = vec![0.0; candidates.len()];
    for split in per_split {
        for (c, v) in curve.iter_mut().zip(split?) {
            *c += v;
        }
    }
    curve.iter_mut().for_each(|c| *c /= n_splits as f64);
    let best = curve
        .iter()
        .enumerate()
        .fold(None::<(usize, f64)>, |acc, (i, &v)| match acc {
            Some((_, b)) if !(v < b) => acc,
            _ if v.is_finite() => Some((i, v)),
            _ => acc,
        })
        .ok_or_else(|| Error::InsufficientData("no candidate could be fitted on every split".into()))?;
    Ok(SplitSelection {
        spec: candidates[best.0],
        candidates: candidates.to_vec(),
        curve,
    })
}

fn split_criterion(
    train: &DataMatrix,
    train_cov: &SymMatrix,
    valid_cov: &SymMatrix,
    spec: &EstimatorSpec,
) -> Result<f64> {
    match spec.method {
        Method::InvCholBanding => {
            let inv = inverse_banded_factors(train, spec.k)?;
            Ok(validation_neg_loglik(valid_cov, &precision_from_inverse_factors(&inv), -inv.log_det()))
        }
        Method::SampleBanding => frobenius_distance(&band_matrix(train_cov, spec.k), valid_cov),
        _ => frobenius_distance(&estimate(train, spec)?.sigma, valid_cov),
    }
}

fn frobenius_distance(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    Ok(frobenius_norm(a.difference(b)?.as_matrix()))
}

/// `trace(S Ω) − log|Ω|`.
pub fn validation_neg_loglik(valid_cov: &SymMatrix, precision: &SymMatrix, log_det_precision: f64) -> f64 {
    let tr: f64 = valid_cov
        .as_slice()
        .iter()
        .zip(precision.as_slice())
        .map(|(a, b)| a * b)
        .sum();
    tr - log_det_precision
}
