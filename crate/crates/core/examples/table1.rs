//! Prints operator-norm losses, sparsity rates and positive-definite
//! percentages for both population models at p = 30 and 100.
//!
//! `cargo run --release -p covchol --example table1`

use covchol::simulation::{run_experiment, ExperimentConfig, PopulationModel};
use covchol::Method;

fn main() -> covchol::Result<()> {
    let methods = vec![
        Method::Sample,
        Method::LedoitWolf,
        Method::SampleBanding,
        Method::CholBanding,
    ];
    for model in [PopulationModel::Ar1 { rho: 0.7 }, PopulationModel::Ma4] {
        let mut cfg = ExperimentConfig::new(model, vec![30, 100], methods.clone());
        cfg.eigenvectors = false;
        let res = run_experiment(&cfg)?;
        for s in &res.summaries {
            let m = |name: &str| {
                s.metrics
                    .get(name)
                    .map_or("--".to_string(), |v| format!("{:.2}({:.2})", v.mean, v.se))
            };
            println!(
                "{:>4} p={:<4} {:<15} loss {}  tpr {}  tnr {}  k {}  pd {:.0}%",
                s.model,
                s.p,
                s.method.name(),
                m("operator_loss"),
                m("tpr"),
                m("tnr"),
                m("tuning"),
                s.positive_definite_percent
            );
        }
    }
    Ok(())
}
