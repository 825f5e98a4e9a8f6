//! Two-class quadratic discriminant analysis on top of the covariance
//! estimators, with leave-one-out error estimation.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::estimators::{estimate, EstimatorSpec, Method};
use crate::linalg::{
    default_pd_tol, modified_cholesky, precision_from_inverse_factors, CholeskyFactors, Matrix,
    SymMatrix,
};
use crate::parallel::map_indexed;
use crate::rng::derive_seed;
use crate::selection::{select_band_random_split, select_lambda_random_split};

pub const SONAR_FEATURES: usize = 60;
pub const LOOCV_SPLITS: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    features: Matrix,
    labels: Vec<usize>,
    class_names: [String; 2],
}

impl LabeledDataset {
    pub fn new(features: Matrix, labels: Vec<usize>, class_names: [String; 2]) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::DimMismatch {
                expected: format!("{} labels", features.rows()),
                actual: labels.len().to_string(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&c| c > 1) {
            return Err(Error::InvalidParameter(format!("class label {bad} is not 0 or 1")));
        }
        let ds = LabeledDataset {
            features,
            labels,
            class_names,
        };
        if ds.class_counts().contains(&0) {
            return Err(Error::InsufficientData("both classes need observations".into()));
        }
        Ok(ds)
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn p(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String; 2] {
        &self.class_names
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&c| c == 1).count();
        [self.labels.len() - ones, ones]
    }

    /// Raw rows of one class.
    pub fn class_data(&self, class: usize) -> Result<DataMatrix> {
        let idx: Vec<usize> = (0..self.n()).filter(|&i| self.labels[i] == class).collect();
        DataMatrix::raw(select(&self.features, &idx)?)
    }

    /// Each feature shifted and scaled to mean 0, variance 1 over all rows.
    pub fn standardized(&self) -> Result<LabeledDataset> {
        let (n, p) = (self.n(), self.p());
        let mut f = self.features.clone();
        for j in 0..p {
            let col = f.column(j);
            let mean = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            if !(var > 0.0) {
                return Err(Error::InvalidParameter(format!("feature {} is constant", j + 1)));
            }
            let sd = var.sqrt();
            for i in 0..n {
                f[(i, j)] = (f[(i, j)] - mean) / sd;
            }
        }
        Ok(LabeledDataset {
            features: f,
            labels: self.labels.clone(),
            class_names: self.class_names.clone(),
        })
    }

    /// Copy without row `i`.
    pub fn without(&self, i: usize) -> Result<LabeledDataset> {
        let idx: Vec<usize> = (0..self.n()).filter(|&r| r != i).collect();
        LabeledDataset::new(
            select(&self.features, &idx)?,
            idx.iter().map(|&r| self.labels[r]).collect(),
            self.class_names.clone(),
        )
    }
}

fn select(m: &Matrix, idx: &[usize]) -> Result<Matrix> {
    let mut data = Vec::with_capacity(idx.len() * m.cols());
    for &i in idx {
        data.extend_from_slice(m.row(i));
    }
    Matrix::from_row_major(idx.len(), m.cols(), data)
}

/// Reads the UCI sonar file: 60 comma-separated reals then `R` (rock,
/// class 0) or `M` (metal, class 1). Blank lines are skipped.
pub fn load_sonar(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    parse_sonar(&fs::read_to_string(path)?)
}

pub fn parse_sonar(text: &str) -> Result<LabeledDataset> {
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parse_err = |message: String| Error::Parse {
            line: no + 1,
            message,
        };
        if fields.len() != SONAR_FEATURES + 1 {
            return Err(parse_err(format!(
                "expected {} features and a label, found {} fields",
                SONAR_FEATURES,
                fields.len()
            )));
        }
        for f in &fields[..SONAR_FEATURES] {
            let v: f64 = f.parse().map_err(|_| parse_err(format!("not a number: {f:?}")))?;
            values.push(v);
        }
        labels.push(match fields[SONAR_FEATURES] {
            "R" => 0,
            "M" => 1,
            other => return Err(parse_err(format!("unknown label {other:?}"))),
        });
    }
    if labels.is_empty() {
        return Err(Error::Shape("sonar file has no rows".into()));
    }
    LabeledDataset::new(
        Matrix::from_row_major(labels.len(), SONAR_FEATURES, values)?,
        labels,
        ["rock".to_string(), "metal".to_string()],
    )
}

/// One class of a fitted rule.
#[derive(Clone, Debug, Serialize)]
pub struct ClassModel {
    pub mean: Vec<f64>,
    /// `(T, D)` with precision `Tᵀ D⁻¹ T`.
    pub inverse_factors: CholeskyFactors,
    pub precision: SymMatrix,
    pub log_det_precision: f64,
    pub prior: f64,
    pub spec: EstimatorSpec,
}

impl ClassModel {
    pub fn new(mean: Vec<f64>, inverse_factors: CholeskyFactors, prior: f64, spec: EstimatorSpec) -> Result<Self> {
        if mean.len() != inverse_factors.dim() {
            return Err(Error::DimMismatch {
                expected: format!("mean of length {}", inverse_factors.dim()),
                actual: mean.len().to_string(),
            });
        }
        if !(prior > 0.0 && prior <= 1.0) {
            return Err(Error::InvalidParameter(format!("prior {prior} outside (0, 1]")));
        }
        Ok(ClassModel {
            precision: precision_from_inverse_factors(&inverse_factors),
            log_det_precision: -inverse_factors.log_det(),
            mean,
            inverse_factors,
            prior,
            spec,
        })
    }

    /// `½ log|Ω| − ½ (x−μ)ᵀ Ω (x−μ) + log π` through the factors.
    pub fn score(&self, x: &[f64]) -> f64 {
        let t = self.inverse_factors.unit_lower();
        let d = self.inverse_factors.diag();
        let c: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        let mut quad = 0.0;
        for (j, dj) in d.iter().enumerate() {
            let z: f64 = t.row(j)[..=j].iter().zip(&c).map(|(a, b)| a * b).sum();
            quad += z * z / dj;
        }
        0.5 * self.log_det_precision - 0.5 * quad + self.prior.ln()
    }

    /// Same score with the explicit precision matrix.
    pub fn score_explicit(&self, x: &[f64]) -> f64 {
        let c: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        let p = c.len();
        let mut quad = 0.0;
        for i in 0..p {
            for j in 0..p {
                quad += c[i] * self.precision[(i, j)] * c[j];
            }
        }
        0.5 * self.log_det_precision - 0.5 * quad + self.prior.ln()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct QdaModel {
    pub classes: [ClassModel; 2],
}

impl QdaModel {
    pub fn scores(&self, x: &[f64]) -> [f64; 2] {
        [self.classes[0].score(x), self.classes[1].score(x)]
    }

    pub fn classify(&self, x: &[f64]) -> usize {
        decide(self.scores(x))
    }
}

/// Larger score wins; ties go to class 0.
pub fn decide(scores: [f64; 2]) -> usize {
    usize::from(scores[1] > scores[0])
}

pub fn classify(model: &QdaModel, x: &[f64]) -> usize {
    model.classify(x)
}

/// Fits one estimator per class. Sample banding is refused because it need
/// not be invertible.
pub fn fit_qda(train: &LabeledDataset, specs: &[EstimatorSpec; 2]) -> Result<QdaModel> {
    let counts = train.class_counts();
    let n = train.n() as f64;
    let fit = |c: usize| -> Result<ClassModel> {
        if counts[c] < 2 {
            return Err(Error::InsufficientData(format!(
                "class {} has {} observations, need at least 2",
                train.class_names[c], counts[c]
            )));
        }
        let raw = train.class_data(c)?;
        let inv = class_inverse_factors(&raw.centered(), &specs[c])?;
        ClassModel::new(raw.column_means(), inv, counts[c] as f64 / n, specs[c])
    };
    Ok(QdaModel {
        classes: [fit(0)?, fit(1)?],
    })
}

fn class_inverse_factors(data: &DataMatrix, spec: &EstimatorSpec) -> Result<CholeskyFactors> {
    if spec.method == Method::SampleBanding {
        return Err(Error::InvalidParameter(
            "sample banding is not supported for classification".into(),
        ));
    }
    let est = estimate(data, spec)?;
    if let Some(inv) = est.inverse_factors {
        return Ok(inv);
    }
    if let Some(f) = est.factors {
        return Ok(f.inverted());
    }
    modified_cholesky(&est.sigma, default_pd_tol(&est.sigma))
        .map(|f| f.inverted())
        .map_err(|e| Error::SingularCovariance(format!("{} estimate: {e}", spec.method)))
}

/// How each fold picks its tuning parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TuningPolicy {
    /// Same band (or penalty) in both classes and every fold.
    Fixed { k: usize, lambda: f64 },
    /// Per-class random-split selection on the fold's training data.
    RandomSplit { n_splits: usize, train_frac: f64, seed: u64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct Prediction {
    pub index: usize,
    pub truth: usize,
    pub predicted: usize,
    pub score_0: f64,
    pub score_1: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LoocvReport {
    pub method: Method,
    pub n: usize,
    pub errors: usize,
    pub error_rate: f64,
    /// Binomial standard error `sqrt(e (1 − e) / n)`.
    pub se: f64,
    pub predictions: Vec<Prediction>,
    /// Specs used per fold, per class.
    pub tuning: Vec<[EstimatorSpec; 2]>,
}

/// Class specs for one training set under `policy`.
pub fn tune_classes(
    train: &LabeledDataset,
    method: Method,
    policy: &TuningPolicy,
    seed_index: u64,
) -> Result<[EstimatorSpec; 2]> {
    if !method.is_tunable() {
        let s = EstimatorSpec::new(method);
        return Ok([s, s]);
    }
    match *policy {
        TuningPolicy::Fixed { k, lambda } => {
            let s = if method.is_penalized() {
                EstimatorSpec::penalized(method, lambda)
            } else {
                EstimatorSpec::banded(method, k)
            };
            Ok([s, s])
        }
        TuningPolicy::RandomSplit {
            n_splits,
            train_frac,
            seed,
        } => {
            let fold_seed = derive_seed(seed, seed_index);
            let pick = |c: usize| -> Result<EstimatorSpec> {
                let data = train.class_data(c)?;
                let s = derive_seed(fold_seed, c as u64);
                let sel = if method.is_penalized() {
                    select_lambda_random_split(&data, method, n_splits, train_frac, s)?
                } else {
                    select_band_random_split(&data, method, n_splits, train_frac, s)?
                };
                Ok(sel.spec)
            };
            Ok([pick(0)?, pick(1)?])
        }
    }
}

/// Leave-one-out misclassification rate. Fold `i` tunes on the other rows
/// with seed index `i`, so results do not depend on execution order.
pub fn loocv_error(data: &LabeledDataset, method: Method, policy: &TuningPolicy) -> Result<LoocvReport> {
    let n = data.n();
    if n < 4 {
        return Err(Error::InsufficientData(format!("leave-one-out needs n ≥ 4, got {n}")));
    }
    let folds = map_indexed(n, |i| -> Result<(Prediction, [EstimatorSpec; 2])> {
        let train = data.without(i)?;
        let specs = tune_classes(&train, method, policy, i as u64)?;
        let model = fit_qda(&train, &specs)?;
        let x = data.features.row(i);
        let scores = model.scores(x);
        Ok((
            Prediction {
                index: i,
                truth: data.labels[i],
                predicted: decide(scores),
                score_0: scores[0],
                score_1: scores[1],
            },
            specs,
        ))
    });
    let mut predictions = Vec::with_capacity(n);
    let mut tuning = Vec::with_capacity(n);
    for f in folds {
        let (pred, specs) = f?;
        predictions.push(pred);
        tuning.push(specs);
    }
    let errors = predictions.iter().filter(|p| p.truth != p.predicted).count();
    let rate = errors as f64 / n as f64;
    Ok(LoocvReport {
        method,
        n,
        errors,
        error_rate: rate,
        se: (rate * (1.0 - rate) / n as f64).sqrt(),
        predictions,
        tuning,
    })
}
