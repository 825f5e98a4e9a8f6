use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use covchol::data::DataMatrix;
use covchol::estimators::{estimate, EstimatorSpec, Method};
use covchol::qda::{fit_qda, load_sonar, loocv_error, tune_classes, LoocvReport, Prediction, TuningPolicy};
use covchol::selection::{select_band_random_split, select_lambda_random_split, SplitSelection};
use covchol::simulation::{run_experiment, ExperimentConfig, ExperimentResult, PopulationModel};
use serde_json::{json, Value};

use crate::io::{emit, fmt_num, matrix_csv, matrix_rows, read_matrix_csv};
use crate::{
    CliError, Command, EstimateArgs, Format, ModelKind, QdaArgs, SelectArgs, SimulateArgs, SplitArgs,
};

pub fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Estimate(a) => estimate_cmd(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Select(a) => select_cmd(a),
        Command::Qda(a) => qda_cmd(a),
    }
}

fn to_json(v: &Value) -> Result<String, CliError> {
    serde_json::to_string_pretty(v)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| CliError::Usage(format!("serialization failed: {e}")))
}

fn selection_json(sel: &SplitSelection, split: &SplitArgs) -> Value {
    let method = sel.spec.method;
    let candidates: Vec<f64> = sel
        .candidates
        .iter()
        .map(|s| if method.is_penalized() { s.lambda } else { s.k as f64 })
        .collect();
    json!({
        "method": method,
        "parameter": if method.is_penalized() { "lambda" } else { "k" },
        "k": sel.spec.k,
        "lambda": sel.spec.lambda,
        "splits": split.splits,
        "train_frac": split.train_frac,
        "seed": split.seed,
        "candidates": candidates,
        "criterion": sel.curve,
    })
}

fn select_for(data: &DataMatrix, method: Method, split: &SplitArgs) -> Result<SplitSelection, CliError> {
    let sel = if method.is_penalized() {
        select_lambda_random_split(data, method, split.splits, split.train_frac, split.seed)?
    } else if method.is_banding() {
        select_band_random_split(data, method, split.splits, split.train_frac, split.seed)?
    } else {
        return Err(CliError::Usage(format!("{method} has no tuning parameter")));
    };
    Ok(sel)
}

fn estimate_cmd(a: EstimateArgs) -> Result<(), CliError> {
    let method = a.method;
    if a.k.is_some() && !method.is_banding() {
        return Err(CliError::Usage(format!("--k does not apply to {method}")));
    }
    if a.lambda.is_some() && !method.is_penalized() {
        return Err(CliError::Usage(format!("--lambda does not apply to {method}")));
    }
    if a.auto && (a.k.is_some() || a.lambda.is_some()) {
        return Err(CliError::Usage("--auto conflicts with --k and --lambda".into()));
    }
    let table = read_matrix_csv(&a.input.input, !a.input.no_header)?;
    let raw = DataMatrix::raw(table.values)?;
    let data = raw.centered();
    let mut selection = None;
    let spec = if a.auto {
        let sel = select_for(&raw, method, &a.split)?;
        let spec = sel.spec;
        selection = Some(selection_json(&sel, &a.split));
        spec
    } else if method.is_banding() {
        let k = a.k.ok_or_else(|| CliError::Usage(format!("{method} needs --k or --auto")))?;
        EstimatorSpec::banded(method, k)
    } else if method.is_penalized() {
        let l = a
            .lambda
            .ok_or_else(|| CliError::Usage(format!("{method} needs --lambda or --auto")))?;
        EstimatorSpec::penalized(method, l)
    } else {
        EstimatorSpec::new(method)
    };
    let est = estimate(&data, &spec)?;
    let text = match a.format {
        Format::Csv => matrix_csv(&table.names, &est.sigma, a.digits),
        Format::Json => {
            let mut v = json!({
                "method": method,
                "k": spec.k,
                "lambda": spec.lambda,
                "n": data.n(),
                "p": data.p(),
                "names": table.names,
                "sigma": matrix_rows(est.sigma.as_matrix()),
            });
            if let Some(prec) = &est.precision {
                v["precision"] = json!(matrix_rows(prec.as_matrix()));
            }
            if let Some(f) = &est.factors {
                v["unit_lower"] = json!(matrix_rows(f.unit_lower()));
                v["diag"] = json!(f.diag());
            }
            to_json(&v)?
        }
    };
    emit(a.out.as_deref(), &text)?;
    if let Some(sel) = selection {
        let path = a
            .selection_out
            .clone()
            .or_else(|| a.out.as_ref().map(|o| sidecar_path(o)));
        let text = to_json(&sel)?;
        match path {
            Some(p) => emit(Some(&p), &text)?,
            None => eprint!("{text}"),
        }
    }
    Ok(())
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".selection.json");
    PathBuf::from(s)
}

fn with_extension_appended(base: &Path, ext: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

pub fn simulation_csv(result: &ExperimentResult, digits: Option<usize>) -> String {
    let mut out = String::from("model,p,method,metric,mean,se\n");
    for s in &result.summaries {
        for (name, m) in &s.metrics {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                s.model,
                s.p,
                s.method,
                name,
                fmt_num(m.mean, digits),
                fmt_num(m.se, digits)
            ));
        }
        out.push_str(&format!(
            "{},{},{},pd_percent,{},NA\n",
            s.model,
            s.p,
            s.method,
            fmt_num(s.positive_definite_percent, digits)
        ));
        out.push_str(&format!("{},{},{},failures,{},NA\n", s.model, s.p, s.method, s.failures));
    }
    out
}

fn simulate_cmd(a: SimulateArgs) -> Result<(), CliError> {
    let model = match a.model {
        ModelKind::Ar1 => PopulationModel::Ar1 { rho: a.rho },
        ModelKind::Ma4 => PopulationModel::Ma4,
    };
    let mut cfg = ExperimentConfig::new(model, a.p.clone(), a.methods.clone());
    cfg.replications = a.reps;
    cfg.master_seed = a.seed;
    cfg.n_train = a.n_train;
    cfg.n_valid = a.n_valid;
    cfg.eigenvectors = !a.no_eigenvectors;
    let result = run_experiment(&cfg)?;
    let csv = simulation_csv(&result, a.digits);
    match &a.out {
        Some(base) => {
            emit(Some(&with_extension_appended(base, ".csv")), &csv)?;
            emit(Some(&with_extension_appended(base, ".json")), &to_json(&json!(result))?)?;
        }
        None => emit(None, &csv)?,
    }
    for s in result.summaries.iter().filter(|s| s.failures > 0) {
        eprintln!(
            "warning: {} p={} {}: {} of {} replications failed",
            s.model,
            s.p,
            s.method,
            s.failures,
            s.failures + s.replications_ok
        );
    }
    Ok(())
}

fn select_cmd(a: SelectArgs) -> Result<(), CliError> {
    let table = read_matrix_csv(&a.input.input, !a.input.no_header)?;
    let raw = DataMatrix::raw(table.values)?;
    let sel = select_for(&raw, a.method, &a.split)?;
    emit(a.out.as_deref(), &to_json(&selection_json(&sel, &a.split))?)
}

fn tuning_distribution(method: Method, tuning: &[[EstimatorSpec; 2]], names: &[String; 2]) -> Value {
    let mut out = serde_json::Map::new();
    for (c, name) in names.iter().enumerate() {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for t in tuning {
            let key = if method.is_penalized() {
                format!("{}", t[c].lambda)
            } else {
                t[c].k.to_string()
            };
            *counts.entry(key).or_default() += 1;
        }
        out.insert(name.clone(), json!(counts));
    }
    Value::Object(out)
}

pub fn predictions_csv(preds: &[Prediction]) -> String {
    let mut out = String::from("index,true,predicted,score_0,score_1\n");
    for p in preds {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            p.index, p.truth, p.predicted, p.score_0, p.score_1
        ));
    }
    out
}

fn qda_cmd(a: QdaArgs) -> Result<(), CliError> {
    let method = a.method;
    if method == Method::SampleBanding {
        return Err(CliError::Usage(
            "sample_banding is not supported for classification; its estimates need not be invertible".into(),
        ));
    }
    if a.k.is_some() && !method.is_banding() {
        return Err(CliError::Usage(format!("--k does not apply to {method}")));
    }
    if a.lambda.is_some() && !method.is_penalized() {
        return Err(CliError::Usage(format!("--lambda does not apply to {method}")));
    }
    let mut data = load_sonar(&a.data).map_err(|e| match e {
        covchol::Error::Io(m) => CliError::Input {
            path: a.data.display().to_string(),
            message: m,
        },
        other => CliError::Core(other),
    })?;
    if a.standardize {
        data = data.standardized()?;
    }
    let policy = match (a.k, a.lambda) {
        (None, None) => TuningPolicy::RandomSplit {
            n_splits: a.splits,
            train_frac: a.train_frac,
            seed: a.seed,
        },
        (k, l) => TuningPolicy::Fixed {
            k: k.unwrap_or(0),
            lambda: l.unwrap_or(0.0),
        },
    };
    let report = if a.loocv {
        loocv_error(&data, method, &policy)?
    } else {
        let specs = tune_classes(&data, method, &policy, 0)?;
        let model = fit_qda(&data, &specs)?;
        let predictions: Vec<Prediction> = (0..data.n())
            .map(|i| {
                let s = model.scores(data.features().row(i));
                Prediction {
                    index: i,
                    truth: data.labels()[i],
                    predicted: covchol::qda::decide(s),
                    score_0: s[0],
                    score_1: s[1],
                }
            })
            .collect();
        let errors = predictions.iter().filter(|p| p.truth != p.predicted).count();
        let rate = errors as f64 / data.n() as f64;
        LoocvReport {
            method,
            n: data.n(),
            errors,
            error_rate: rate,
            se: (rate * (1.0 - rate) / data.n() as f64).sqrt(),
            predictions,
            tuning: vec![specs],
        }
    };
    let v = json!({
        "method": method,
        "evaluation": if a.loocv { "loocv" } else { "training" },
        "n": report.n,
        "p": data.p(),
        "class_names": data.class_names(),
        "class_counts": data.class_counts(),
        "standardized": a.standardize,
        "policy": policy,
        "errors": report.errors,
        "error_rate": report.error_rate,
        "se": report.se,
        "tuning_distribution": tuning_distribution(method, &report.tuning, data.class_names()),
    });
    emit(a.out.as_deref(), &to_json(&v)?)?;
    if let Some(p) = &a.predictions {
        emit(Some(p), &predictions_csv(&report.predictions))?;
    }
    Ok(())
}
