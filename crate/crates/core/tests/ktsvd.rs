mod common;

use common::*;
use nalgebra::DVector;
use proptest::prelude::*;
use tdict_core::ktsvd::{
    atom_update, init_dictionary, train, train_from, AtomUpdate, AtomUpdateOptions, Dictionary, TrainConfig,
};
use tdict_core::sparse::{sparse_code, SparseCodeProblem};
use tdict_core::synth::planted_model;
use tdict_core::tcore::tprod;
use tdict_core::tsvd::Rank1Options;
use tdict_core::Tensor3;

fn sparse_codes(k: usize, n: usize, n3: usize, density: f64, rng: &mut rand_chacha::ChaCha8Rng) -> Tensor3 {
    use rand::Rng;
    let mut x = random_tensor(k, n, n3, rng);
    for j in 0..n {
        for i in 0..k {
            if rng.random::<f64>() > density {
                x.set_tube(i, j, &vec![0.0; n3]);
            }
        }
    }
    x
}

fn opts() -> AtomUpdateOptions {
    AtomUpdateOptions {
        rank1: Rank1Options {
            max_iters: 500,
            ..Default::default()
        },
        full_tsvd: false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn atom_update_contracts(d in 2usize..=6, k in 2usize..=5, n in 3usize..=12, n3 in prop::sample::select(vec![1usize, 2, 3, 4, 5]), seed: u64) {
        let mut rng = seeded(seed);
        let y = random_tensor(d, n, n3, &mut rng);
        let mut dict = Dictionary::from_unnormalized(random_tensor(d, k, n3, &mut rng)).unwrap().into_atoms();
        let mut x = sparse_codes(k, n, n3, 0.6, &mut rng);
        let before_x = x.clone();
        let atom = seed as usize % k;
        let out = atom_update(&mut dict, &mut x, &y, atom, &opts(), &[]).unwrap();

        prop_assert!((dict.lateral(atom).fro_norm() - 1.0).abs() <= 1e-8);
        for j in 0..n {
            for i in 0..k {
                if before_x.is_zero_tube(i, j) && i == atom {
                    prop_assert!(x.is_zero_tube(i, j));
                }
                if i != atom {
                    prop_assert_eq!(x.tube(i, j), before_x.tube(i, j));
                }
            }
        }
        if let AtomUpdate::Refit { restricted_before, restricted_after, .. } = out {
            prop_assert!(restricted_after <= restricted_before + 1e-8);
            // The reported norm is the real restricted residual.
            let support: Vec<usize> = (0..n).filter(|&j| !x.is_zero_tube(atom, j)).collect();
            let fit = tprod(&dict, &x.select_columns(&support)).unwrap();
            let direct = y.select_columns(&support).distance(&fit);
            prop_assert!((direct - restricted_after).abs() <= 1e-8 * (1.0 + direct));
        }
    }
}

#[test]
fn exact_representation_is_a_fixed_point() {
    let mut rng = seeded(2);
    let dict = Dictionary::from_unnormalized(random_tensor(6, 4, 3, &mut rng))
        .unwrap()
        .into_atoms();
    let x = sparse_codes(4, 10, 3, 0.7, &mut rng);
    let y = tprod(&dict, &x).unwrap();
    for k in 0..4 {
        let (mut d2, mut x2) = (dict.clone(), x.clone());
        let out = atom_update(&mut d2, &mut x2, &y, k, &opts(), &[]).unwrap();
        match out {
            AtomUpdate::Refit { restricted_after, .. } => assert!(restricted_after < 1e-9),
            other => panic!("unexpected {other:?}"),
        }
        assert!(tprod(&d2, &x2).unwrap().distance(&y) < 1e-9);
    }
}

#[test]
fn matrix_atom_update_is_rank1_svd() {
    let mut rng = seeded(9);
    let y = random_tensor(7, 15, 1, &mut rng);
    let mut dict = Dictionary::from_unnormalized(random_tensor(7, 4, 1, &mut rng))
        .unwrap()
        .into_atoms();
    let mut x = sparse_codes(4, 15, 1, 0.5, &mut rng);
    let support: Vec<usize> = (0..15).filter(|&j| !x.is_zero_tube(1, j)).collect();
    assert!(!support.is_empty());

    let (ym, dm, xm) = (to_matrix(&y), to_matrix(&dict), to_matrix(&x));
    let mut e = nalgebra::DMatrix::zeros(7, support.len());
    for (c, &j) in support.iter().enumerate() {
        let col = ym.column(j) - &dm * xm.column(j) + dm.column(1) * xm[(1, j)];
        e.set_column(c, &col);
    }
    let svd = e.svd(true, true);
    let top = svd.singular_values.imax();
    let u: DVector<f64> = svd.u.as_ref().unwrap().column(top).into_owned();
    let sign = if u[u.iamax()] < 0.0 { -1.0 } else { 1.0 };

    atom_update(&mut dict, &mut x, &y, 1, &opts(), &[]).unwrap();
    for i in 0..7 {
        assert!((dict[(i, 1, 0)] - sign * u[i]).abs() < 1e-8);
    }
    let vt = svd.v_t.as_ref().unwrap();
    for (c, &j) in support.iter().enumerate() {
        let want = sign * svd.singular_values[top] * vt[(top, c)];
        assert!((x[(1, j, 0)] - want).abs() < 1e-8);
    }
}

#[test]
fn power_iteration_and_full_tsvd_agree() {
    let m = planted_model(8, 6, 4, 40, 2, 12).unwrap();
    let dict = init_dictionary(&m.y, 6, 3).unwrap().into_atoms();
    let codes = sparse_code(&SparseCodeProblem::new(&m.y, &dict, 0.1)).unwrap().x;
    for k in 0..6 {
        let (mut d1, mut x1) = (dict.clone(), codes.clone());
        let (mut d2, mut x2) = (dict.clone(), codes.clone());
        atom_update(&mut d1, &mut x1, &m.y, k, &opts(), &[]).unwrap();
        let full = AtomUpdateOptions {
            full_tsvd: true,
            ..opts()
        };
        atom_update(&mut d2, &mut x2, &m.y, k, &full, &[]).unwrap();
        let r1 = tprod(&d1, &x1).unwrap();
        let r2 = tprod(&d2, &x2).unwrap();
        assert!(r1.distance(&r2) < 1e-6 * (1.0 + r2.fro_norm()), "atom {k}");
    }
}

#[test]
fn training_is_deterministic_and_atom_pass_is_monotone() {
    let m = planted_model(8, 12, 4, 120, 2, 1).unwrap();
    let cfg = TrainConfig::new(12, 0.1, 5, 42);
    let a = train(&m.y, &cfg).unwrap();
    let b = train(&m.y, &cfg).unwrap();
    assert_eq!(a.dictionary, b.dictionary);
    assert_eq!(a.report, b.report);
    for rec in &a.report.sweeps {
        assert!(rec.representation_error <= rec.error_after_coding + 1e-6);
    }
    for k in 0..12 {
        assert!((a.dictionary.atoms().lateral(k).fro_norm() - 1.0).abs() < 1e-8);
    }
    let other = train(&m.y, &TrainConfig::new(12, 0.1, 5, 43)).unwrap();
    assert_ne!(a.dictionary, other.dictionary);
}

#[test]
fn single_sweep_reports_once() {
    let m = planted_model(6, 8, 2, 30, 2, 3).unwrap();
    let out = train(&m.y, &TrainConfig::new(8, 0.1, 1, 0)).unwrap();
    assert_eq!(out.report.sweeps.len(), 1);
    assert_eq!(out.dictionary.sweeps, 1);
    assert!(train(&m.y, &TrainConfig::new(8, 0.1, 0, 0)).is_err());
}

#[test]
fn early_exit_stops_on_plateau() {
    let m = planted_model(6, 8, 2, 30, 2, 3).unwrap();
    let mut cfg = TrainConfig::new(8, 0.1, 200, 0);
    cfg.early_exit_tol = 1e-2;
    let out = train(&m.y, &cfg).unwrap();
    assert!(out.report.stopped_early);
    assert!(out.report.sweeps.len() < 200);
}

#[test]
fn matrix_training_matches_matrix_ksvd() {
    let mut rng = seeded(77);
    let y = random_tensor(8, 60, 1, &mut rng);
    let init = init_dictionary(&y, 12, 5).unwrap();
    let mut cfg = TrainConfig::new(12, 0.2, 8, 5);
    cfg.early_exit_tol = 0.0;
    cfg.rank1_max_iters = 5000;
    let out = train_from(init.clone(), &y, &cfg).unwrap();

    let oracle = matrix_ksvd(
        &to_matrix(&y),
        &to_matrix(init.atoms()),
        &MatrixKsvdConfig {
            lambda: cfg.lambda,
            rho: cfg.rho,
            tol: cfg.tol,
            max_iters: cfg.max_iters,
            sweeps: cfg.sweeps,
        },
    );
    for (s, rec) in out.report.sweeps.iter().enumerate() {
        assert!(
            (rec.error_after_coding - oracle.after_coding[s]).abs() < 1e-6,
            "sweep {s} coding"
        );
        assert!(
            (rec.representation_error - oracle.after_atoms[s]).abs() < 1e-6,
            "sweep {s} atoms"
        );
    }
    let dm = from_matrix(oracle.dictionary.as_ref().unwrap());
    assert!(max_abs_diff(out.dictionary.atoms(), &dm) < 1e-6);
}
