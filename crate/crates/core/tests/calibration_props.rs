use std::path::PathBuf;

use coco_clearing::calibration::*;
use coco_clearing::io::read_eba;
use coco_clearing::{clear_max, cocoize, ClearingConfig, Scenario};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dataset() -> Vec<EbaRecord> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/eba2011_synthetic.csv");
    read_eba(&path).unwrap()
}

fn sig4(v: f64) -> f64 {
    let mag = 10f64.powi(v.abs().log10().floor() as i32 - 3);
    (v / mag).round() * mag
}

#[test]
fn dataset_reproduces_the_aggregate_totals() {
    let records = dataset();
    assert_eq!(records.len(), 90);
    let m = marginals_from_eba(&records, &CalibrationConfig::default().exclude).unwrap();
    assert_eq!(m.n(), 87);
    let total = |v: &[f64]| sig4(v.iter().sum::<f64>());
    assert_eq!(total(&m.external_assets), 24_380_000.0);
    assert_eq!(total(&m.external_liab), 23_380_000.0);
    assert_eq!(total(&m.row_sums), 3_072_000.0);
    let capital: f64 = records
        .iter()
        .filter(|r| !["DE029", "LU45", "SI058"].contains(&r.bank_id.as_str()))
        .map(|r| r.capital)
        .sum();
    assert_eq!(sig4(capital), 1_002_000.0);
}

fn check_matrix(l: &DMatrix<f64>, m: &Marginals) {
    for i in 0..m.n() {
        assert_eq!(l[(i, i)], 0.0);
    }
    assert!(l.iter().all(|v| *v >= 0.0));
    assert!(marginal_error(l, m, 1e-9) <= 1e-6);
}

#[test]
fn calibrated_matrices_fit_the_marginals() {
    let m = marginals_from_eba(&dataset(), &CalibrationConfig::default().exclude).unwrap();
    let (m, _) = perturb_to_balance(&m, 1e-3).unwrap();
    check_matrix(&ipfp_matrix(&m).unwrap(), &m);
    let cfg = SamplerConfig {
        burn_in: 200_000,
        thinning: 5_000,
        ..SamplerConfig::default()
    };
    for l in sample_matrices(&m, &cfg, 3).unwrap() {
        check_matrix(&l, &m);
    }
}

#[test]
fn pinned_seed_is_deterministic() {
    let cfg = CalibrationConfig {
        burn_in: 50_000,
        ..CalibrationConfig::default()
    };
    let a = calibrate(&dataset(), &cfg).unwrap();
    let b = calibrate(&dataset(), &cfg).unwrap();
    assert_eq!(a, b);
    let other = calibrate(&dataset(), &CalibrationConfig { seed: 7, ..cfg }).unwrap();
    assert_ne!(a.0, other.0);
}

#[test]
fn unshocked_calibrated_system_is_solvent() {
    let (net, _) = calibrate(&dataset(), &CalibrationConfig::default()).unwrap();
    assert!(net.capital().iter().all(|c| *c > 0.0));
    let coco = cocoize(&net, &Scenario::default()).unwrap();
    assert_eq!(
        clear_max(&coco, &ClearingConfig::default())
            .unwrap()
            .default_count(),
        0
    );
}

fn random_marginals(seed: u64, n: usize) -> Marginals {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // start from a matrix so the marginals are feasible with a zero diagonal
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random::<f64>() < 0.7 {
                l[(i, j)] = rng.random_range(0.1..50.0);
            }
        }
    }
    Marginals {
        bank_ids: (0..n).map(|i| format!("B{i}")).collect(),
        row_sums: (0..n).map(|i| l.row(i).sum()).collect(),
        col_sums: (0..n).map(|j| l.column(j).sum()).collect(),
        external_assets: vec![100.0; n],
        external_liab: vec![80.0; n],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sampler_keeps_marginals(seed in any::<u64>(), n in 2usize..=12, burn_in in 1u64..5_000) {
        let m = random_marginals(seed, n);
        let cfg = SamplerConfig { burn_in, thinning: 100, seed, ..SamplerConfig::default() };
        for l in sample_matrices(&m, &cfg, 2).unwrap() {
            for i in 0..n {
                prop_assert_eq!(l[(i, i)], 0.0);
            }
            prop_assert!(l.iter().all(|v| *v >= 0.0));
            prop_assert!(marginal_error(&l, &m, 1e-9) <= 1e-6);
        }
    }
}
