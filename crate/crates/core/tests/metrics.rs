mod common;

use common::{correlated_data, random_spd};
use covchol::estimators::{chol_banding, diagonal_estimator, sample_covariance};
use covchol::linalg::{jacobi_eigen, Matrix, SymMatrix};
use covchol::metrics::{frobenius_loss, krzanowski, operator_loss, sparsity_rates};
use covchol::simulation::{build_model, PopulationModel};
use proptest::prelude::*;

/// Direct double sum over Jacobi eigenvectors.
fn k_oracle(a: &SymMatrix, b: &SymMatrix, q: usize) -> f64 {
    let ea = jacobi_eigen(a).unwrap();
    let eb = jacobi_eigen(b).unwrap();
    let mut s = 0.0;
    for i in 0..q {
        for j in 0..q {
            let u = ea.vector(i);
            let v = eb.vector(j);
            s += u.iter().zip(&v).map(|(x, y)| x * y).sum::<f64>().powi(2);
        }
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn krzanowski_properties(seed in any::<u64>(), p in 1usize..8) {
        let a = random_spd(seed, p, 0.1);
        let b = random_spd(seed.wrapping_add(1), p, 0.1);
        for q in 1..=p {
            let ab = krzanowski(&a, &b, q).unwrap();
            let ba = krzanowski(&b, &a, q).unwrap();
            prop_assert!((ab - ba).abs() < 1e-10);
            prop_assert!((-1e-12..=q as f64 + 1e-10).contains(&ab));
            prop_assert!((ab - k_oracle(&a, &b, q)).abs() < 1e-8);
            prop_assert!((krzanowski(&a, &a, q).unwrap() - q as f64).abs() < 1e-10);
        }
        prop_assert!((krzanowski(&a, &b, p).unwrap() - p as f64).abs() < 1e-10);
        prop_assert!(krzanowski(&a, &b, 0).is_err());
        prop_assert!(krzanowski(&a, &b, p + 1).is_err());
    }

    #[test]
    fn operator_loss_triangle(seed in any::<u64>(), p in 1usize..8) {
        let a = random_spd(seed, p, 0.0);
        let b = random_spd(seed ^ 7, p, 0.0);
        let c = random_spd(seed ^ 13, p, 0.0);
        let ac = operator_loss(&a, &c).unwrap();
        let ab = operator_loss(&a, &b).unwrap();
        let bc = operator_loss(&b, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-9 * (ab + bc).max(1.0));
        prop_assert!(ab <= frobenius_loss(&a, &b).unwrap() * (1.0 + 1e-12));
        // Eigenvalue oracle for the symmetric difference.
        let diff = a.difference(&b).unwrap();
        let ev = jacobi_eigen(&diff).unwrap().values;
        let want = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!((ab - want).abs() < 1e-9 * want.max(1.0));
    }

    #[test]
    fn banded_estimates_have_full_tnr(seed in any::<u64>(), k in 0usize..4) {
        let p = 12;
        let truth = build_model(&PopulationModel::Ma4, p).unwrap();
        let x = correlated_data(seed, 40, p);
        let est = chol_banding(&x, k).unwrap().sigma;
        let r = sparsity_rates(&est, &truth, 0.0).unwrap();
        prop_assert_eq!(r.tnr, Some(1.0));
    }
}

#[test]
fn loss_examples() {
    let t = build_model(&PopulationModel::Ar1 { rho: 0.7 }, 6).unwrap();
    assert_eq!(operator_loss(&t, &t).unwrap(), 0.0);
    let shifted = SymMatrix::symmetrize(&t.as_matrix().add(&Matrix::identity(6)).unwrap()).unwrap();
    assert!((operator_loss(&shifted, &t).unwrap() - 1.0).abs() < 1e-12);
    assert!(operator_loss(&t, &SymMatrix::identity(5)).is_err());
}

#[test]
fn sparsity_examples() {
    let truth = build_model(&PopulationModel::Ma4, 10).unwrap();
    let x = correlated_data(3, 50, 10);
    let s = sample_covariance(&x).unwrap().sigma;
    assert_eq!(sparsity_rates(&s, &truth, 0.0).unwrap().tpr, 1.0);
    let d = diagonal_estimator(&x).unwrap().sigma;
    assert_eq!(sparsity_rates(&d, &truth, 0.0).unwrap().tnr, Some(1.0));
    let same = sparsity_rates(&truth, &truth, 0.0).unwrap();
    assert_eq!((same.tpr, same.tnr), (1.0, Some(1.0)));
    // A dense truth has no negatives.
    let ar = build_model(&PopulationModel::Ar1 { rho: 0.7 }, 5).unwrap();
    assert_eq!(sparsity_rates(&ar, &ar, 0.0).unwrap().tnr, None);
}

#[test]
fn orthogonal_spans_score_zero() {
    let a = SymMatrix::from_diag(&[3.0, 2.0, 1.0, 0.5]);
    let b = SymMatrix::from_diag(&[0.5, 1.0, 2.0, 3.0]);
    assert!(krzanowski(&a, &b, 2).unwrap().abs() < 1e-12);
    assert!((krzanowski(&a, &b, 4).unwrap() - 4.0).abs() < 1e-12);
}
