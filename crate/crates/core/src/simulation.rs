//! Population models, seeded normal sampling, and the Monte Carlo runner.
//!
//! Each replication draws independent training and validation sets, tunes
//! every tunable method by minimizing the Frobenius distance between the
//! training estimate and the validation sample covariance, and scores the
//! tuned estimate against the true covariance.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::estimators::{
    band_matrix, estimate, penalized_lambda_max, sample_covariance, EstimatorSpec, Method,
};
use crate::linalg::{
    default_pd_tol, frobenius_norm, modified_cholesky, sym_eigen, EigenDecomposition, Matrix,
    SymMatrix,
};
use crate::metrics::{evaluate, relative_zero_tol, MetricsReport};
use crate::parallel::map_indexed;
use crate::penalty::{lambda_grid, PenaltyKind};
use crate::rng::{derive_seed, seeded_rng, standard_normals};

/// Largest band tried when tuning banding methods.
pub const MAX_TUNING_BAND: usize = 50;
pub const LAMBDA_GRID_POINTS: usize = 25;
pub const LAMBDA_GRID_RATIO: f64 = 1e-4;
pub const DEFAULT_SEED: u64 = 20_080_501;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PopulationModel {
    /// `σ_ij = ρ^|i−j|`.
    Ar1 { rho: f64 },
    /// Moving-average model banded at 4: off-diagonals 0.4, 0.2, 0.2, 0.1.
    Ma4,
    Custom { matrix: SymMatrix },
}

impl PopulationModel {
    pub fn name(&self) -> &'static str {
        match self {
            PopulationModel::Ar1 { .. } => "ar1",
            PopulationModel::Ma4 => "ma4",
            PopulationModel::Custom { .. } => "custom",
        }
    }
}

impl fmt::Display for PopulationModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The `p × p` covariance of `model`, checked positive definite.
pub fn build_model(model: &PopulationModel, p: usize) -> Result<SymMatrix> {
    if p == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    let m = match model {
        PopulationModel::Ar1 { rho } => {
            if !(rho.abs() < 1.0) {
                return Err(Error::InvalidParameter(format!("AR(1) needs |rho| < 1, got {rho}")));
            }
            SymMatrix::from_lower_fn(p, |i, j| rho.powi((i - j) as i32))
        }
        PopulationModel::Ma4 => SymMatrix::from_lower_fn(p, |i, j| match i - j {
            0 => 1.0,
            1 => 0.4,
            2 | 3 => 0.2,
            4 => 0.1,
            _ => 0.0,
        }),
        PopulationModel::Custom { matrix } => {
            if matrix.dim() != p {
                return Err(Error::DimMismatch {
                    expected: format!("{p}x{p}"),
                    actual: format!("{0}x{0}", matrix.dim()),
                });
            }
            matrix.clone()
        }
    };
    modified_cholesky(&m, default_pd_tol(&m))?;
    Ok(m)
}

/// Draws `N_p(0, Σ)` rows as `x = A g` with `A = L diag(√D)` from the
/// modified Cholesky factors of `Σ`.
#[derive(Clone, Debug)]
pub struct MvnSampler {
    factor: Matrix,
}

impl MvnSampler {
    pub fn new(sigma: &SymMatrix) -> Result<Self> {
        let f = modified_cholesky(sigma, default_pd_tol(sigma))?;
        let p = f.dim();
        let l = f.unit_lower();
        let sd: Vec<f64> = f.diag().iter().map(|d| d.sqrt()).collect();
        Ok(MvnSampler {
            factor: Matrix::from_fn(p, p, |r, c| if c <= r { l[(r, c)] * sd[c] } else { 0.0 }),
        })
    }

    pub fn dim(&self) -> usize {
        self.factor.rows()
    }

    /// `n` rows; identical output for identical `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<DataMatrix> {
        let p = self.dim();
        let mut rng = seeded_rng(seed);
        let g = standard_normals(&mut rng, n * p);
        let mut out = Vec::with_capacity(n * p);
        for gi in g.chunks_exact(p) {
            for r in 0..p {
                let a = &self.factor.row(r)[..=r];
                out.push(a.iter().zip(gi).map(|(x, y)| x * y).sum::<f64>());
            }
        }
        DataMatrix::raw(Matrix::from_row_major(n, p, out)?)
    }
}

/// `n` draws from `N_p(0, model)`.
pub fn sample_mvn(model: &SymMatrix, n: usize, seed: u64) -> Result<DataMatrix> {
    MvnSampler::new(model)?.sample(n, seed)
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub model: PopulationModel,
    pub n_train: usize,
    pub n_valid: usize,
    pub p_list: Vec<usize>,
    pub methods: Vec<Method>,
    pub replications: usize,
    pub master_seed: u64,
    /// Compute eigenvectors for the `K(q)` curves (the costly part at large
    /// `p`); eigenvalues are always computed.
    pub eigenvectors: bool,
}

impl ExperimentConfig {
    pub fn new(model: PopulationModel, p_list: Vec<usize>, methods: Vec<Method>) -> Self {
        ExperimentConfig {
            model,
            n_train: 100,
            n_valid: 100,
            p_list,
            methods,
            replications: 50,
            master_seed: DEFAULT_SEED,
            eigenvectors: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidParameter("replications must be at least 1".into()));
        }
        if self.n_train < 2 || self.n_valid < 2 {
            return Err(Error::InsufficientData(
                "training and validation sets need at least 2 rows".into(),
            ));
        }
        if self.p_list.is_empty() || self.methods.is_empty() {
            return Err(Error::InvalidParameter("need at least one p and one method".into()));
        }
        Ok(())
    }
}

/// Mean and standard error (`sd / √count`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub se: f64,
    pub count: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        let m = values.len();
        if m == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / m as f64;
        let se = if m > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
            (var / m as f64).sqrt()
        } else {
            0.0
        };
        Some(Summary { mean, se, count: m })
    }
}

/// Aggregates for one `(model, p, method)` cell.
#[derive(Clone, Debug, Serialize)]
pub struct MethodSummary {
    pub model: String,
    pub p: usize,
    pub method: Method,
    /// `operator_loss`, `frobenius_loss`, `tpr`, `tnr` (only when the model
    /// has zeros) and, for tunable methods, `tuning` (selected `k` or `λ`).
    pub metrics: BTreeMap<String, Summary>,
    pub positive_definite_percent: f64,
    /// Eigenvalues averaged over replications, descending.
    pub scree: Vec<f64>,
    /// `K(q)` averaged over replications; empty without eigenvectors.
    pub kq: Vec<f64>,
    pub replications_ok: usize,
    pub failures: usize,
    /// First few failure messages, for diagnosis.
    pub failure_messages: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PopulationSummary {
    pub model: String,
    pub p: usize,
    pub eigenvalues: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub populations: Vec<PopulationSummary>,
    pub summaries: Vec<MethodSummary>,
}

impl ExperimentResult {
    pub fn summary(&self, p: usize, method: Method) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.p == p && s.method == method)
    }
}

/// One replication's outcome for one method.
#[derive(Clone, Debug, Serialize)]
pub struct ReplicationOutcome {
    pub tuning: f64,
    pub report: MetricsReport,
}

/// Candidate bands `0..=min(n − 2, p − 1, 50)`.
pub fn band_grid(n: usize, p: usize) -> Vec<usize> {
    let top = n.saturating_sub(2).min(p.saturating_sub(1)).min(MAX_TUNING_BAND);
    (0..=top).collect()
}

/// Tunes `method` on `train` against the validation sample covariance and
/// returns the chosen specification with its estimate. Ties go to the
/// earlier (more regularized) grid point.
pub fn tune_by_validation(
    train: &DataMatrix,
    valid_cov: &SymMatrix,
    method: Method,
) -> Result<(EstimatorSpec, SymMatrix)> {
    let train_cov = sample_covariance(train)?.sigma;
    let fit = |spec: &EstimatorSpec| -> Result<SymMatrix> {
        match spec.method {
            Method::SampleBanding => Ok(band_matrix(&train_cov, spec.k)),
            _ => Ok(estimate(train, spec)?.sigma),
        }
    };
    let candidates: Vec<EstimatorSpec> = if method.is_banding() {
        band_grid(train.n(), train.p())
            .into_iter()
            .map(|k| EstimatorSpec::banded(method, k))
            .collect()
    } else if method.is_penalized() {
        let kind = match method {
            Method::LassoChol => PenaltyKind::Lasso,
            _ => PenaltyKind::NestedLasso,
        };
        let lmax = penalized_lambda_max(train, kind)?;
        lambda_grid(lmax, LAMBDA_GRID_POINTS, LAMBDA_GRID_RATIO)
            .into_iter()
            .map(|l| EstimatorSpec::penalized(method, l))
            .collect()
    } else {
        let spec = EstimatorSpec::new(method);
        return Ok((spec, fit(&spec)?));
    };

    let mut best: Option<(f64, EstimatorSpec, SymMatrix)> = None;
    let mut last_err = None;
    for spec in candidates {
        match fit(&spec) {
            Ok(sigma) => {
                let loss = frobenius_norm(sigma.difference(valid_cov)?.as_matrix());
                if best.as_ref().is_none_or(|(b, _, _)| loss < *b) {
                    best = Some((loss, spec, sigma));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some((_, spec, sigma)) => Ok((spec, sigma)),
        None => Err(last_err.unwrap_or_else(|| Error::InvalidParameter("empty tuning grid".into()))),
    }
}

/// Seeds for the training and validation draws of replication `rep` at
/// dimension `p`.
pub fn replication_seeds(master_seed: u64, p: usize, rep: usize) -> (u64, u64) {
    let base = derive_seed(derive_seed(master_seed, p as u64), rep as u64);
    (derive_seed(base, 0), derive_seed(base, 1))
}

/// Runs one replication for every configured method.
pub fn run_replication(
    cfg: &ExperimentConfig,
    truth: &SymMatrix,
    truth_eig: &EigenDecomposition,
    sampler: &MvnSampler,
    rep: usize,
) -> Result<Vec<Result<ReplicationOutcome>>> {
    let p = truth.dim();
    let (train_seed, valid_seed) = replication_seeds(cfg.master_seed, p, rep);
    let train = sampler.sample(cfg.n_train, train_seed)?.centered();
    let valid = sampler.sample(cfg.n_valid, valid_seed)?.centered();
    let valid_cov = sample_covariance(&valid)?.sigma;
    Ok(cfg
        .methods
        .iter()
        .map(|&method| {
            let (spec, sigma) = tune_by_validation(&train, &valid_cov, method)?;
            let zero_tol = if method.has_exact_zeros() {
                0.0
            } else {
                relative_zero_tol(&sigma)
            };
            let report = evaluate(&sigma, truth, truth_eig, zero_tol, cfg.eigenvectors)?;
            let tuning = if method.is_banding() {
                spec.k as f64
            } else {
                spec.lambda
            };
            Ok(ReplicationOutcome { tuning, report })
        })
        .collect())
}

/// Runs the full experiment. Replications run concurrently when the
/// `parallel` feature is enabled; aggregation follows replication order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let mut populations = Vec::new();
    let mut summaries = Vec::new();
    for &p in &cfg.p_list {
        let truth = build_model(&cfg.model, p)?;
        let truth_eig = sym_eigen(&truth)?;
        let sampler = MvnSampler::new(&truth)?;
        let outcomes = map_indexed(cfg.replications, |rep| {
            run_replication(cfg, &truth, &truth_eig, &sampler, rep)
        });
        let outcomes: Vec<Vec<Result<ReplicationOutcome>>> = outcomes.into_iter().collect::<Result<_>>()?;
        for (mi, &method) in cfg.methods.iter().enumerate() {
            let per_rep: Vec<&Result<ReplicationOutcome>> = outcomes.iter().map(|o| &o[mi]).collect();
            summaries.push(summarize(cfg, p, method, &per_rep));
        }
        populations.push(PopulationSummary {
            model: cfg.model.name().to_string(),
            p,
            eigenvalues: truth_eig.values.clone(),
        });
    }
    Ok(ExperimentResult {
        config: cfg.clone(),
        populations,
        summaries,
    })
}

fn summarize(
    cfg: &ExperimentConfig,
    p: usize,
    method: Method,
    per_rep: &[&Result<ReplicationOutcome>],
) -> MethodSummary {
    let ok: Vec<&ReplicationOutcome> = per_rep.iter().filter_map(|r| r.as_ref().ok()).collect();
    let failure_messages: Vec<String> = per_rep
        .iter()
        .filter_map(|r| r.as_ref().err().map(|e| e.to_string()))
        .collect();
    let mut metrics = BTreeMap::new();
    let mut put = |name: &str, vals: Vec<f64>| {
        if let Some(s) = Summary::of(&vals) {
            metrics.insert(name.to_string(), s);
        }
    };
    put("operator_loss", ok.iter().map(|o| o.report.operator_loss).collect());
    put("frobenius_loss", ok.iter().map(|o| o.report.frobenius_loss).collect());
    put("tpr", ok.iter().map(|o| o.report.tpr).collect());
    put("tnr", ok.iter().filter_map(|o| o.report.tnr).collect());
    if method.is_tunable() {
        put("tuning", ok.iter().map(|o| o.tuning).collect());
    }

    let average = |curves: Vec<&Vec<f64>>| -> Vec<f64> {
        let Some(first) = curves.first() else {
            return Vec::new();
        };
        let mut acc = vec![0.0; first.len()];
        for c in &curves {
            acc.iter_mut().zip(c.iter()).for_each(|(a, v)| *a += v);
        }
        acc.iter().map(|a| a / curves.len() as f64).collect()
    };
    let pd = ok.iter().filter(|o| o.report.positive_definite).count();
    MethodSummary {
        model: cfg.model.name().to_string(),
        p,
        method,
        metrics,
        positive_definite_percent: if ok.is_empty() {
            f64::NAN
        } else {
            100.0 * pd as f64 / ok.len() as f64
        },
        scree: average(ok.iter().map(|o| &o.report.eigenvalues).collect()),
        kq: average(ok.iter().map(|o| &o.report.kq_curve).collect()),
        replications_ok: ok.len(),
        failures: failure_messages.len(),
        failure_messages: failure_messages.into_iter().take(5).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn models() {
        let m = build_model(&PopulationModel::Ar1 { rho: 0.7 }, 2).unwrap();
        assert_eq!(m.as_matrix(), &Matrix::from_rows(&[[1.0, 0.7], [0.7, 1.0]]).unwrap());
        let m = build_model(&PopulationModel::Ma4, 6).unwrap();
        assert_eq!(m.row(0), &[1.0, 0.4, 0.2, 0.2, 0.1, 0.0]);
        let m = build_model(&PopulationModel::Ar1 { rho: 0.0 }, 4).unwrap();
        assert_eq!(m.as_matrix(), &Matrix::identity(4));
        assert!(build_model(&PopulationModel::Ar1 { rho: 1.0 }, 4).is_err());
        let bad = SymMatrix::new(Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap()).unwrap();
        assert!(matches!(
            build_model(&PopulationModel::Custom { matrix: bad }, 2),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = build_model(&PopulationModel::Ma4, 5).unwrap();
        let a = sample_mvn(&m, 20, 42).unwrap();
        let b = sample_mvn(&m, 20, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_mvn(&m, 20, 43).unwrap());
    }

    #[test]
    fn identity_model_sample_covariance() {
        let n = 2000;
        let x = sample_mvn(&SymMatrix::identity(4), n, 5).unwrap().centered();
        let s = sample_covariance(&x).unwrap().sigma;
        let tol = 3.0 / (n as f64).sqrt();
        for i in 0..4 {
            for j in 0..4 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((s[(i, j)] - e).abs() < tol, "{i},{j}: {}", s[(i, j)]);
            }
        }
    }

    #[test]
    fn summary_statistics() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_abs_diff_eq!(s.mean, 2.5);
        assert_abs_diff_eq!(s.se, (5.0_f64 / 3.0).sqrt() / 2.0, epsilon = 1e-15);
        assert_eq!(Summary::of(&[7.0]).unwrap().se, 0.0);
        assert!(Summary::of(&[]).is_none());
    }

    #[test]
    fn band_grid_bounds() {
        assert_eq!(band_grid(100, 30), (0..=29).collect::<Vec<_>>());
        assert_eq!(band_grid(100, 200).len(), 51);
        assert_eq!(band_grid(10, 200), (0..=8).collect::<Vec<_>>());
    }
}
