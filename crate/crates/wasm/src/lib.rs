//! Browser bindings: estimate heatmaps, scree curves and positive
//! definiteness rates for the two population models.
//!
//! Each export returns a JSON string. The `*_json` functions hold the logic
//! and run natively as well.

use covchol::estimators::{band_matrix, chol_banding, sample_covariance};
use covchol::linalg::{is_positive_definite, operator_norm, sym_eigenvalues, SymMatrix};
use covchol::rng::derive_seed;
use covchol::simulation::{build_model, sample_mvn, PopulationModel};
use covchol::{Error, Result};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

pub const MAX_DIM: usize = 200;
pub const MAX_REPS: usize = 500;

fn model(name: &str) -> Result<PopulationModel> {
    match name {
        "ar1" => Ok(PopulationModel::Ar1 { rho: 0.7 }),
        "ma4" => Ok(PopulationModel::Ma4),
        other => Err(Error::InvalidParameter(format!("unknown model {other:?}"))),
    }
}

fn check(p: usize, n: usize, k: usize) -> Result<()> {
    if p == 0 || p > MAX_DIM {
        return Err(Error::InvalidParameter(format!("p must be in 1..={MAX_DIM}")));
    }
    if n < 2 {
        return Err(Error::InsufficientData("need n ≥ 2".into()));
    }
    if k >= (n - 1).min(p) {
        return Err(Error::InvalidBand { k, limit: (n - 1).min(p) });
    }
    Ok(())
}

struct Fits {
    truth: SymMatrix,
    sample: SymMatrix,
    sample_banded: SymMatrix,
    chol_banded: SymMatrix,
}

fn fit_all(model_name: &str, p: usize, n: usize, k: usize, seed: u64) -> Result<Fits> {
    check(p, n, k)?;
    let truth = build_model(&model(model_name)?, p)?;
    let data = sample_mvn(&truth, n, seed)?.centered();
    let sample = sample_covariance(&data)?.sigma;
    Ok(Fits {
        sample_banded: band_matrix(&sample, k),
        chol_banded: chol_banding(&data, k)?.sigma,
        sample,
        truth,
    })
}

fn rows(m: &SymMatrix) -> Vec<Vec<f64>> {
    (0..m.dim()).map(|i| m.row(i).to_vec()).collect()
}

fn panel(m: &SymMatrix, truth: &SymMatrix) -> Result<Value> {
    Ok(json!({
        "matrix": rows(m),
        "operator_loss": operator_norm(m.difference(truth)?.as_matrix())?,
        "positive_definite": is_positive_definite(m, None),
    }))
}

pub fn heatmaps_json(model_name: &str, p: usize, n: usize, k: usize, seed: u64) -> Result<String> {
    let f = fit_all(model_name, p, n, k, seed)?;
    Ok(json!({
        "model": model_name, "p": p, "n": n, "k": k, "seed": seed,
        "truth": rows(&f.truth),
        "sample": panel(&f.sample, &f.truth)?,
        "sample_banding": panel(&f.sample_banded, &f.truth)?,
        "chol_banding": panel(&f.chol_banded, &f.truth)?,
    })
    .to_string())
}

fn descending(m: &SymMatrix) -> Result<Vec<f64>> {
    let mut v = sym_eigenvalues(m)?;
    v.sort_by(|a, b| b.total_cmp(a));
    Ok(v)
}

pub fn scree_json(model_name: &str, p: usize, n: usize, k: usize, seed: u64) -> Result<String> {
    let f = fit_all(model_name, p, n, k, seed)?;
    Ok(json!({
        "model": model_name, "p": p, "n": n, "k": k, "seed": seed,
        "truth": descending(&f.truth)?,
        "sample": descending(&f.sample)?,
        "sample_banding": descending(&f.sample_banded)?,
        "chol_banding": descending(&f.chol_banded)?,
    })
    .to_string())
}

/// Share of `reps` draws whose estimate is positive definite, in percent.
pub fn pd_rate_json(model_name: &str, p: usize, n: usize, k: usize, reps: usize, seed: u64) -> Result<String> {
    if reps == 0 || reps > MAX_REPS {
        return Err(Error::InvalidParameter(format!("reps must be in 1..={MAX_REPS}")));
    }
    let mut counts = [0usize; 3];
    for r in 0..reps {
        let f = fit_all(model_name, p, n, k, derive_seed(seed, r as u64))?;
        for (c, m) in counts.iter_mut().zip([&f.sample, &f.sample_banded, &f.chol_banded]) {
            *c += usize::from(is_positive_definite(m, None));
        }
    }
    let pct = |c: usize| 100.0 * c as f64 / reps as f64;
    Ok(json!({
        "model": model_name, "p": p, "n": n, "k": k, "reps": reps, "seed": seed,
        "sample": pct(counts[0]),
        "sample_banding": pct(counts[1]),
        "chol_banding": pct(counts[2]),
    })
    .to_string())
}

#[wasm_bindgen]
pub fn heatmaps(model: &str, p: usize, n: usize, k: usize, seed: u32) -> std::result::Result<String, String> {
    heatmaps_json(model, p, n, k, u64::from(seed)).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn scree(model: &str, p: usize, n: usize, k: usize, seed: u32) -> std::result::Result<String, String> {
    scree_json(model, p, n, k, u64::from(seed)).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn pd_rate(model: &str, p: usize, n: usize, k: usize, reps: usize, seed: u32) -> std::result::Result<String, String> {
    pd_rate_json(model, p, n, k, reps, u64::from(seed)).map_err(|e| e.to_string())
}
