mod common;

use common::*;
use proptest::prelude::*;
use tdict_core::tcore::{fft_mode3, identity_tensor, ifft_mode3, l112_norm, tprod, ttranspose};
use tdict_core::Tensor3;

fn n3_strategy() -> impl Strategy<Value = usize> {
    prop::sample::select(vec![1usize, 2, 3, 4, 5, 8])
}

fn close(a: &Tensor3, b: &Tensor3, tol: f64) -> bool {
    max_abs_diff(a, b) <= tol * (1.0 + a.fro_norm().max(b.fro_norm()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn tprod_matches_circular_convolution(n1 in 1usize..=8, n2 in 1usize..=8, m in 1usize..=8, n3 in n3_strategy(), seed: u64) {
        let mut rng = seeded(seed);
        let a = random_tensor(n1, n2, n3, &mut rng);
        let b = random_tensor(n2, m, n3, &mut rng);
        let fast = tprod(&a, &b).unwrap();
        prop_assert!(close(&fast, &tprod_direct(&a, &b), 1e-12));
    }

    #[test]
    fn tprod_matches_block_circulant_product(n1 in 1usize..=6, n2 in 1usize..=6, m in 1usize..=4, n3 in n3_strategy(), seed: u64) {
        let mut rng = seeded(seed);
        let a = random_tensor(n1, n2, n3, &mut rng);
        let b = random_tensor(n2, m, n3, &mut rng);
        let c = tprod(&a, &b).unwrap();
        let big = bcirc(&a);
        for j in 0..m {
            let expect = &big * unfold_column(&b, j);
            let got = unfold_column(&c, j);
            prop_assert!((expect - got).amax() <= 1e-12 * (1.0 + c.fro_norm()));
        }
    }

    #[test]
    fn tprod_is_associative(n1 in 1usize..=8, n2 in 1usize..=8, n4 in 1usize..=8, m in 1usize..=8, n3 in n3_strategy(), seed: u64) {
        let mut rng = seeded(seed);
        let a = random_tensor(n1, n2, n3, &mut rng);
        let b = random_tensor(n2, n4, n3, &mut rng);
        let c = random_tensor(n4, m, n3, &mut rng);
        let left = tprod(&tprod(&a, &b).unwrap(), &c).unwrap();
        let right = tprod(&a, &tprod(&b, &c).unwrap()).unwrap();
        prop_assert!(close(&left, &right, 1e-10));
    }

    #[test]
    fn identity_is_neutral(n1 in 1usize..=8, n2 in 1usize..=8, n3 in n3_strategy(), seed: u64) {
        let a = random_tensor(n1, n2, n3, &mut seeded(seed));
        prop_assert!(close(&tprod(&identity_tensor(n1, n3), &a).unwrap(), &a, 1e-12));
        prop_assert!(close(&tprod(&a, &identity_tensor(n2, n3)).unwrap(), &a, 1e-12));
    }

    #[test]
    fn transpose_reverses_products(n1 in 1usize..=8, n2 in 1usize..=8, m in 1usize..=8, n3 in n3_strategy(), seed: u64) {
        let mut rng = seeded(seed);
        let a = random_tensor(n1, n2, n3, &mut rng);
        let b = random_tensor(n2, m, n3, &mut rng);
        let lhs = ttranspose(&tprod(&a, &b).unwrap());
        let rhs = tprod(&ttranspose(&b), &ttranspose(&a)).unwrap();
        prop_assert!(close(&lhs, &rhs, 1e-12));
        prop_assert_eq!(ttranspose(&ttranspose(&a)), a);
    }

    #[test]
    fn parseval_and_round_trip(n1 in 1usize..=8, n2 in 1usize..=8, n3 in n3_strategy(), seed: u64) {
        let a = random_tensor(n1, n2, n3, &mut seeded(seed));
        let f = fft_mode3(&a);
        let spectral = f.fro_norm() / (n3 as f64).sqrt();
        prop_assert!((spectral - a.fro_norm()).abs() <= 1e-12 * (1.0 + a.fro_norm()));
        prop_assert!(f.symmetry_defect() <= 1e-12 * (1.0 + f.fro_norm()));
        prop_assert!(close(&ifft_mode3(&f).unwrap(), &a, 1e-12));
    }

    #[test]
    fn l112_is_sum_of_tube_norms(n1 in 1usize..=8, n2 in 1usize..=8, n3 in n3_strategy(), seed: u64) {
        let a = random_tensor(n1, n2, n3, &mut seeded(seed));
        let mut direct = 0.0;
        for j in 0..n2 {
            for i in 0..n1 {
                direct += (0..n3).map(|k| a[(i, j, k)] * a[(i, j, k)]).sum::<f64>().sqrt();
            }
        }
        prop_assert!((l112_norm(&a) - direct).abs() <= 1e-12 * (1.0 + direct));
    }
}

#[test]
fn tube_product_by_hand() {
    // (1, 2) circ (3, 4) = (1*3 + 2*4, 1*4 + 2*3)
    let a = Tensor3::new(1, 1, 2, vec![1.0, 2.0]).unwrap();
    let b = Tensor3::new(1, 1, 2, vec![3.0, 4.0]).unwrap();
    let c = tprod(&a, &b).unwrap();
    assert!(max_abs_diff(&c, &Tensor3::new(1, 1, 2, vec![11.0, 10.0]).unwrap()) < 1e-14);
}

#[test]
fn mismatched_inner_dimensions_fail() {
    let a = Tensor3::zeros(2, 3, 4);
    let b = Tensor3::zeros(2, 3, 4);
    assert!(tprod(&a, &b).is_err());
    let c = Tensor3::zeros(3, 3, 5);
    assert!(tprod(&a, &c).is_err());
}
