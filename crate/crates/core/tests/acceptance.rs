//! Acceptance run: one PASS/FAIL/SKIP line per criterion, details indented
//! below it. Failures are reported but only change the exit status when
//! `ACCEPTANCE_STRICT=1` is set.

mod common;

use std::path::PathBuf;
use std::time::Instant;

use common::{correlated_data, dotp, max_abs_diff, unit_lower_with_leading_zeros};
use covchol::data::DataMatrix;
use covchol::estimators::{chol_banding, inverse_banded_factors, sample_covariance};
use covchol::likelihood::{covariance_banding_gradient, free_parameters, neg_loglik_td, perturb};
use covchol::linalg::{default_pd_tol, modified_cholesky, Matrix, SymMatrix};
use covchol::penalty::{lasso_lambda_max, solve_lasso, PenalizedProblem, PenaltyKind};
use covchol::qda::{load_sonar, loocv_error, LabeledDataset, TuningPolicy, LOOCV_SPLITS};
use covchol::rng::derive_seed;
use covchol::selection::{select_band_random_split, DEFAULT_SPLITS, DEFAULT_TRAIN_FRAC};
use covchol::simulation::{run_experiment, ExperimentConfig, ExperimentResult, PopulationModel, DEFAULT_SEED};
use covchol::{estimate, EstimatorSpec, Method};

enum Verdict {
    Pass,
    Fail,
    Skip,
}

struct Outcome {
    verdict: Verdict,
    details: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { verdict: Verdict::Pass, details: Vec::new() }
    }

    fn check(&mut self, ok: bool, detail: String) {
        if !ok {
            self.verdict = Verdict::Fail;
        }
        self.details.push(format!("{} {detail}", if ok { "ok  " } else { "FAIL" }));
    }

    fn note(&mut self, detail: String) {
        self.details.push(format!("     {detail}"));
    }
}

struct Tables {
    ar1: ExperimentResult,
    ma4: ExperimentResult,
    ar1_200: ExperimentResult,
    ma4_200: ExperimentResult,
    seconds_p100: f64,
}

fn run_tables() -> Tables {
    let methods = vec![Method::Sample, Method::SampleBanding, Method::CholBanding];
    let config = |model, p_list| {
        let mut c = ExperimentConfig::new(model, p_list, methods.clone());
        c.eigenvectors = false;
        c
    };
    let start = Instant::now();
    let ar1 = run_experiment(&config(PopulationModel::Ar1 { rho: 0.7 }, vec![30, 100])).unwrap();
    let ma4 = run_experiment(&config(PopulationModel::Ma4, vec![30, 100])).unwrap();
    let seconds_p100 = start.elapsed().as_secs_f64();
    let big = |model| {
        let mut c = config(model, vec![200]);
        c.methods = vec![Method::SampleBanding, Method::CholBanding];
        run_experiment(&c).unwrap()
    };
    Tables {
        ar1_200: big(PopulationModel::Ar1 { rho: 0.7 }),
        ma4_200: big(PopulationModel::Ma4),
        ar1,
        ma4,
        seconds_p100,
    }
}

fn metric(r: &ExperimentResult, p: usize, m: Method, name: &str) -> (f64, f64) {
    let s = r.summary(p, m).unwrap();
    let v = s.metrics[name];
    (v.mean, v.se)
}

fn criterion_1(t: &Tables) -> Outcome {
    let mut o = Outcome::new();
    // (model, p, method, reference mean, reference SE)
    let cells = [
        (&t.ar1, "ar1", 30, Method::CholBanding, 1.27, 0.03),
        (&t.ar1, "ar1", 30, Method::Sample, 1.75, 0.04),
        (&t.ar1, "ar1", 100, Method::CholBanding, 1.56, 0.03),
        (&t.ma4, "ma4", 30, Method::CholBanding, 0.75, 0.02),
        (&t.ma4, "ma4", 100, Method::CholBanding, 0.89, 0.02),
    ];
    for (r, model, p, m, want, se) in cells {
        let (mean, got_se) = metric(r, p, m, "operator_loss");
        let tol = 3.0 * se;
        o.check(
            (mean - want).abs() <= tol,
            format!("{model} p={p} {m}: {mean:.3} ({got_se:.3}) vs {want} ± {tol:.2}"),
        );
    }
    o.check(
        t.seconds_p100 < 300.0,
        format!("p <= 100 runs took {:.1} s (limit 300 s)", t.seconds_p100),
    );
    o
}

fn criterion_2(t: &Tables) -> Outcome {
    let mut o = Outcome::new();
    let (tpr, _) = metric(&t.ma4, 100, Method::CholBanding, "tpr");
    let (tnr, _) = metric(&t.ma4, 100, Method::CholBanding, "tnr");
    let (band_tnr, _) = metric(&t.ma4, 100, Method::SampleBanding, "tnr");
    o.check((88.0..=100.0).contains(&(100.0 * tpr)), format!("ma4 p=100 chol_banding TPR {:.2}% in [88, 100] (reference 94.09)", 100.0 * tpr));
    o.check(tnr == 1.0, format!("ma4 p=100 chol_banding TNR {:.2}% == 100", 100.0 * tnr));
    o.check(band_tnr == 1.0, format!("ma4 p=100 sample_banding TNR {:.2}% == 100", 100.0 * band_tnr));
    o
}

fn criterion_3(t: &Tables) -> Outcome {
    let mut o = Outcome::new();
    let pd = |r: &ExperimentResult, p, m| r.summary(p, m).unwrap().positive_definite_percent;
    let v = pd(&t.ar1, 30, Method::SampleBanding);
    o.check((v - 66.0).abs() <= 20.0, format!("ar1 p=30 sample_banding PD {v}% within 66 ± 20"));
    let v = pd(&t.ar1_200, 200, Method::SampleBanding);
    o.check(v == 0.0, format!("ar1 p=200 sample_banding PD {v}% == 0"));
    for (r, p) in [(&t.ma4, 30), (&t.ma4, 100), (&t.ma4_200, 200)] {
        let v = pd(r, p, Method::SampleBanding);
        o.check(v == 100.0, format!("ma4 p={p} sample_banding PD {v}% == 100"));
    }
    o.note(format!("ar1 p=100 sample_banding PD {}% (reference 8)", pd(&t.ar1, 100, Method::SampleBanding)));
    let mut all = true;
    for r in [&t.ar1, &t.ma4, &t.ar1_200, &t.ma4_200] {
        for s in r.summaries.iter().filter(|s| s.method == Method::CholBanding) {
            all &= s.positive_definite_percent == 100.0 && s.failures == 0;
        }
    }
    o.check(all, "chol_banding PD 100% in every cell".into());
    o
}

fn criterion_4() -> Outcome {
    let mut o = Outcome::new();
    let n = 50;
    let mut worst_ratio: f64 = 0.0;
    let mut perturb_ok = true;
    let mut cases = 0;
    for i in 0..20u64 {
        let p = 2 + (i as usize % 7);
        let k = (i as usize % 3).min(p - 1);
        let x = correlated_data(derive_seed(4, i), n, p);
        let inv = inverse_banded_factors(&x, k).unwrap();
        let at = neg_loglik_td(&x, &inv, k).unwrap();
        worst_ratio = worst_ratio.max(at.max_abs_gradient() / n as f64);
        for param in free_parameters(p, k) {
            for delta in [1e-3, -1e-3] {
                let v = neg_loglik_td(&x, &perturb(&inv, param, delta).unwrap(), k).unwrap().value;
                perturb_ok &= v > at.value;
            }
        }
        cases += 1;
    }
    o.check(worst_ratio < 1e-6, format!("{cases} datasets: max |gradient| / n = {worst_ratio:.2e} < 1e-6"));
    o.check(perturb_ok, "every ±1e-3 single-parameter move increases the objective".into());
    o
}

fn criterion_5() -> Outcome {
    let mut o = Outcome::new();
    let mut worst_gap: f64 = 0.0;
    let mut smallest = f64::INFINITY;
    for i in 0..20u64 {
        let x = correlated_data(derive_seed(5, i), 50, 3);
        let c = covariance_banding_gradient(&x).unwrap();
        worst_gap = worst_gap.max((c.gradient - c.closed_form).abs());
        smallest = smallest.min(c.gradient.abs());
    }
    o.check(worst_gap <= 1e-8, format!("max |derivative − closed form| = {worst_gap:.2e} <= 1e-8"));
    o.check(smallest > 1e-6, format!("min |derivative| = {smallest:.3e} > 1e-6"));
    o
}

fn criterion_6() -> Outcome {
    let mut o = Outcome::new();
    let flip = |m: &Matrix| Matrix::from_fn(m.rows(), m.cols(), |i, j| m[(m.rows() - 1 - i, m.cols() - 1 - j)]);
    let (mut cov_ok, mut prec_ok) = (0, 0);
    for trial in 0..100u64 {
        let p = 2 + (trial as usize % 9);
        let lead: Vec<usize> = (0..p).map(|i| (derive_seed(trial, i as u64) % (i as u64 + 1)) as usize).collect();
        let d: Vec<f64> = (0..p).map(|j| 0.5 + (derive_seed(trial ^ 77, j as u64) % 1000) as f64 / 500.0).collect();
        let l = unit_lower_with_leading_zeros(derive_seed(6, trial), &lead);

        // Covariance direction: factor zeros <-> covariance zeros.
        let sigma = l.matmul(&Matrix::from_diag(&d)).unwrap().matmul(&l.transpose()).unwrap();
        let sym = SymMatrix::symmetrize(&sigma).unwrap();
        let f = modified_cholesky(&sym, default_pd_tol(&sym)).unwrap();
        let zeros_fwd = (0..p).all(|i| (0..lead[i]).all(|j| sigma[(i, j)] == 0.0));
        let zeros_back = (0..p).all(|i| (0..lead[i]).all(|j| f.unit_lower()[(i, j)] == 0.0));
        if zeros_fwd && zeros_back && max_abs_diff(f.unit_lower(), &l) < 1e-10 * (1.0 + l.max_abs()) {
            cov_ok += 1;
        }

        // Precision direction, through reversed ordering.
        let t = flip(&l.transpose());
        let dinv: Vec<f64> = d.iter().map(|v| 1.0 / v).collect();
        let omega = t.transpose().matmul(&Matrix::from_diag(&dinv)).unwrap().matmul(&t).unwrap();
        let rev = SymMatrix::symmetrize(&flip(&omega)).unwrap();
        let g = modified_cholesky(&rev, default_pd_tol(&rev)).unwrap();
        let t_back = flip(&g.unit_lower().transpose());
        let pattern = (0..p).all(|i| {
            (0..i).all(|j| t[(i, j)] != 0.0 || (omega[(i, j)] == 0.0 && t_back[(i, j)] == 0.0))
        });
        if pattern && max_abs_diff(&t_back, &t) < 1e-9 * (1.0 + t.max_abs()) {
            prec_ok += 1;
        }
    }
    o.check(cov_ok == 100, format!("covariance factor zero patterns: {cov_ok}/100 exact"));
    o.check(prec_ok == 100, format!("precision factor zero patterns: {prec_ok}/100 exact"));
    o
}

fn criterion_7() -> Outcome {
    let mut o = Outcome::new();
    let mut worst_band: f64 = 0.0;
    let mut worst_pen: f64 = 0.0;
    for i in 0..20u64 {
        let p = 2 + (i as usize % 10);
        let n = p + 5 + (i as usize % 7);
        let x = correlated_data(derive_seed(7, i), n, p);
        let s = sample_covariance(&x).unwrap().sigma;
        let scale = s.max_abs();
        let band = chol_banding(&x, p - 1).unwrap().sigma;
        worst_band = worst_band.max(max_abs_diff(band.as_matrix(), s.as_matrix()) / scale);
        for m in [Method::LassoChol, Method::NestedLassoChol] {
            let e = estimate(&x, &EstimatorSpec::penalized(m, 0.0)).unwrap().sigma;
            worst_pen = worst_pen.max(max_abs_diff(e.as_matrix(), s.as_matrix()) / scale);
        }
    }
    o.check(worst_band <= 1e-9, format!("chol_banding k = p−1: relative error {worst_band:.2e} <= 1e-9"));
    o.check(worst_pen <= 1e-6, format!("penalized at λ = 0: relative error {worst_pen:.2e} <= 1e-6"));
    o
}

/// Zooming grid search for the two-coefficient lasso objective.
fn grid_minimum(y: &[f64], z: &[Vec<f64>], lambda: f64) -> [f64; 2] {
    let f = |b: [f64; 2]| {
        let rss: f64 = (0..y.len()).map(|i| (y[i] - z[0][i] * b[0] - z[1][i] * b[1]).powi(2)).sum();
        rss + lambda * (b[0].abs() + b[1].abs())
    };
    let yy = dotp(y, y).sqrt();
    let mut half = 2.0 * yy / z.iter().map(|c| dotp(c, c).sqrt()).fold(f64::INFINITY, f64::min) + 1.0;
    let mut center = [0.0, 0.0];
    let steps = 40;
    while half > 1e-9 {
        let h = 2.0 * half / steps as f64;
        let mut best = (f64::INFINITY, center);
        for a in 0..=steps {
            for b in 0..=steps {
                let pt = [center[0] - half + a as f64 * h, center[1] - half + b as f64 * h];
                let v = f(pt);
                if v < best.0 {
                    best = (v, pt);
                }
            }
        }
        // Keep the exact axes in play so sparse minima are reachable.
        for pt in [[0.0, best.1[1]], [best.1[0], 0.0], [0.0, 0.0]] {
            if f(pt) < best.0 {
                best = (f(pt), pt);
            }
        }
        center = best.1;
        half = 2.0 * h;
    }
    center
}

fn criterion_8() -> Outcome {
    let mut o = Outcome::new();
    let mut worst: f64 = 0.0;
    let mut kkt_ok = true;
    for i in 0..50u64 {
        let g = common::gaussian(derive_seed(8, i), 20, 3);
        let cols = g.columns();
        let z = vec![cols[0].clone(), cols[1].iter().zip(&cols[0]).map(|(a, b)| a + 0.5 * b).collect::<Vec<_>>()];
        let y: Vec<f64> = (0..20).map(|r| 1.5 * z[0][r] - 0.7 * z[1][r] + cols[2][r]).collect();
        let frac = (derive_seed(88, i) % 1000) as f64 / 1000.0;
        let lambda = frac * lasso_lambda_max(&y, &z);
        let prob = PenalizedProblem::new(&y, &z, lambda, PenaltyKind::Lasso);
        let fit = solve_lasso(&prob).unwrap();
        let grid = grid_minimum(&y, &z, lambda);
        for (a, b) in fit.coefficients.iter().zip(&grid) {
            worst = worst.max((a - b).abs());
        }
        let r = prob.residual(&fit.coefficients);
        for (j, b) in fit.coefficients.iter().enumerate() {
            let gj = dotp(&z[j], &r);
            kkt_ok &= if *b == 0.0 {
                gj.abs() <= lambda / 2.0 + 1e-6
            } else {
                (gj - lambda / 2.0 * b.signum()).abs() <= 1e-6
            };
        }
    }
    o.check(worst <= 1e-4, format!("50 problems: max |coordinate descent − grid| = {worst:.2e} <= 1e-4"));
    o.check(kkt_ok, "KKT conditions hold at every solution".into());
    o
}

fn sonar_path() -> Option<PathBuf> {
    let p = std::env::var_os("SONAR_PATH")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/sonar.all-data"));
    p.exists().then_some(p)
}

/// Columns scaled to unit variance, as for correlation heatmaps.
fn unit_scaled(x: &DataMatrix) -> DataMatrix {
    let c = x.centered();
    let n = c.n() as f64;
    let sd: Vec<f64> = c.values().columns().iter().map(|col| (dotp(col, col) / (n - 1.0)).sqrt()).collect();
    let v = Matrix::from_fn(c.n(), c.p(), |i, j| c.values()[(i, j)] / sd[j]);
    DataMatrix::raw(v).unwrap()
}

fn criterion_9() -> Outcome {
    let mut o = Outcome::new();
    let Some(path) = sonar_path() else {
        o.verdict = Verdict::Skip;
        o.note("sonar data not found; set SONAR_PATH or place data/sonar.all-data at the workspace root".into());
        return o;
    };
    let ds: LabeledDataset = match load_sonar(&path) {
        Ok(d) => d,
        Err(e) => {
            o.check(false, format!("could not load {}: {e}", path.display()));
            return o;
        }
    };
    o.check(ds.class_counts() == [97, 111], format!("class counts {:?} == [97, 111]", ds.class_counts()));
    let targets: [(usize, Method, &[usize]); 4] = [
        (1, Method::CholBanding, &[31]),
        (1, Method::SampleBanding, &[31]),
        (0, Method::CholBanding, &[17, 18]),
        (0, Method::SampleBanding, &[17, 18]),
    ];
    for (class, method, want) in targets {
        let data = unit_scaled(&ds.class_data(class).unwrap());
        let picks: Vec<usize> = (0..10u64)
            .map(|s| {
                select_band_random_split(&data, method, DEFAULT_SPLITS, DEFAULT_TRAIN_FRAC, derive_seed(DEFAULT_SEED, s))
                    .unwrap()
                    .k()
            })
            .collect();
        let hits = picks.iter().filter(|k| want.contains(k)).count();
        o.check(
            hits > 5,
            format!("{} {method}: k = {picks:?}, {hits}/10 in {want:?}", ds.class_names()[class]),
        );
    }
    let policy = TuningPolicy::RandomSplit { n_splits: LOOCV_SPLITS, train_frac: DEFAULT_TRAIN_FRAC, seed: DEFAULT_SEED };
    for (method, want) in [
        (Method::Sample, 24.0),
        (Method::Diagonal, 32.7),
        (Method::CholBanding, 20.2),
        (Method::InvCholBanding, 14.9),
    ] {
        match loocv_error(&ds, method, &policy) {
            Ok(r) => {
                let pct = 100.0 * r.error_rate;
                o.check((pct - want).abs() <= 5.0, format!("{method} LOOCV error {pct:.1}% ({:.1}) vs {want} ± 5", 100.0 * r.se));
            }
            Err(e) => o.check(false, format!("{method} LOOCV failed: {e}")),
        }
    }
    o
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

fn criterion_10() -> Outcome {
    let mut o = Outcome::new();
    let sim = || {
        let mut c = ExperimentConfig::new(
            PopulationModel::Ar1 { rho: 0.7 },
            vec![12, 25],
            vec![Method::SampleBanding, Method::CholBanding, Method::LassoChol, Method::LedoitWolf],
        );
        c.replications = 6;
        c.master_seed = 7;
        serde_json::to_string(&run_experiment(&c).unwrap()).unwrap()
    };
    let runs: Vec<String> = [1, 1, 4, 4].into_iter().map(|t| in_pool(t, sim)).collect();
    o.check(runs.iter().all(|r| *r == runs[0]), "simulation output identical across repeats and 1 vs 4 threads".into());

    let x = correlated_data(10, 40, 5);
    let y = correlated_data(11, 40, 5);
    let mut v = x.values().as_slice().to_vec();
    v.extend(y.values().as_slice().iter().map(|a| a + 0.7));
    let ds = LabeledDataset::new(
        Matrix::from_row_major(80, 5, v).unwrap(),
        (0..80).map(|i| usize::from(i >= 40)).collect(),
        ["a".into(), "b".into()],
    )
    .unwrap();
    let policy = TuningPolicy::RandomSplit { n_splits: 5, train_frac: DEFAULT_TRAIN_FRAC, seed: 3 };
    let qda = || serde_json::to_string(&loocv_error(&ds, Method::InvCholBanding, &policy).unwrap()).unwrap();
    let runs: Vec<String> = [1, 1, 4, 4].into_iter().map(|t| in_pool(t, qda)).collect();
    o.check(runs.iter().all(|r| *r == runs[0]), "LOOCV report identical across repeats and 1 vs 4 threads".into());
    o
}

fn main() {
    let started = Instant::now();
    let tables = run_tables();
    let criteria: Vec<(&str, Outcome)> = vec![
        ("operator-norm losses within 3 SE of reference values", criterion_1(&tables)),
        ("sparsity rates for the MA(4) model at p = 100", criterion_2(&tables)),
        ("positive-definite percentages of banded estimates", criterion_3(&tables)),
        ("inverse-factor banding is a stationary point of the banded likelihood", criterion_4()),
        ("covariance-factor banding derivative matches its closed form and is nonzero", criterion_5()),
        ("zero patterns carry over between factors and matrices", criterion_6()),
        ("exact recovery at the full band and at zero penalty", criterion_7()),
        ("lasso coordinate descent against grid search and KKT", criterion_8()),
        ("sonar band selection and LOOCV errors", criterion_9()),
        ("determinism across repeats and thread counts", criterion_10()),
    ];
    let mut failed = 0;
    for (i, (name, o)) in criteria.iter().enumerate() {
        let tag = match o.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => {
                failed += 1;
                "FAIL"
            }
            Verdict::Skip => "SKIP",
        };
        println!("{tag} [{:>2}] {name}", i + 1);
        for d in &o.details {
            println!("         {d}");
        }
    }
    println!(
        "acceptance: {} criteria, {failed} failed, {:.1} s",
        criteria.len(),
        started.elapsed().as_secs_f64()
    );
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
